#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace mvts {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned storage. Vectorised reductions then split their work the same
/// way on every run, so results do not depend on where the heap put a buffer.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. The first dimension is the batch
/// dimension wherever a layer consumes a tensor.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    /// Contiguous slice along the leading dimension.
    std::span<double> row(std::size_t r);
    std::span<const double> row(std::size_t r) const;
    std::size_t row_size() const;

    Tensor reshaped(Shape shape) const;
    void reshape(Shape shape);
    void fill(double value);

    /// Rows `indices` of the leading dimension, in the given order.
    Tensor gather_rows(std::span<const std::size_t> indices) const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    AlignedVector data_;
};

}  // namespace mvts
