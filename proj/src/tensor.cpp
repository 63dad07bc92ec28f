#include "mvts/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace mvts {

std::size_t element_count(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape)
{
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(element_count(shape_), fill)
{
    if (std::find(shape_.begin(), shape_.end(), std::size_t{0}) != shape_.end())
        throw std::invalid_argument("tensor dimensions must be positive: " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(values.begin(), values.end())
{
    if (data_.size() != element_count(shape_))
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_string(shape_));
}

std::size_t Tensor::dim(std::size_t axis) const
{
    if (axis >= shape_.size())
        throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
    return shape_[axis];
}

std::size_t Tensor::row_size() const
{
    return shape_.empty() ? 0 : data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t r)
{
    const std::size_t n = row_size();
    return std::span<double>(data_).subspan(r * n, n);
}

std::span<const double> Tensor::row(std::size_t r) const
{
    const std::size_t n = row_size();
    return std::span<const double>(data_).subspan(r * n, n);
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (element_count(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
}

void Tensor::reshape(Shape shape)
{
    if (element_count(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
}

void Tensor::fill(double value)
{
    std::fill(data_.begin(), data_.end(), value);
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const
{
    if (indices.empty()) throw std::invalid_argument("gather_rows needs at least one index");
    Shape shape = shape_;
    shape[0] = indices.size();
    const std::size_t n = row_size();
    std::vector<double> out;
    out.reserve(indices.size() * n);
    for (std::size_t idx : indices) {
        if (idx >= shape_[0]) throw std::out_of_range("row index " + std::to_string(idx) + " out of range");
        auto src = row(idx);
        out.insert(out.end(), src.begin(), src.end());
    }
    return Tensor(std::move(shape), std::move(out));
}

}  // namespace mvts
