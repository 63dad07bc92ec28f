#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mvts/tensor.hpp"

namespace mvts {

enum class Mode { train, eval };

/// Persisted tag of each layer kind in checkpoint files.
enum class LayerKind : std::uint64_t {
    dense = 1,
    conv2d = 2,
    relu = 3,
    sigmoid = 4,
    batch_norm = 5,
    max_pool = 6,
    flatten = 7,
    dropout = 8,
    linear = 9,
};

std::string to_string(LayerKind kind);

enum class Init { he_uniform, xavier_uniform };

struct Parameter {
    Tensor value;
    Tensor grad;

    explicit Parameter(Shape shape) : value(shape), grad(std::move(shape)) {}
};

/// A differentiable stage operating on batched tensors (leading dim = batch).
/// `forward` caches what `backward` needs; `backward` accumulates into the
/// parameter gradients and returns the gradient w.r.t. the forward input.
class Layer {
public:
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;
    virtual Tensor forward(Tensor input) = 0;
    virtual Tensor backward(Tensor grad_output) = 0;
    virtual Shape output_shape(const Shape& input_shape) const = 0;

    virtual std::vector<Parameter*> parameters() { return {}; }
    /// Non-trainable tensors that are still part of a checkpoint.
    virtual std::vector<Tensor*> buffers() { return {}; }

    void set_mode(Mode mode) { mode_ = mode; }
    Mode mode() const { return mode_; }

    /// When false, `backward` skips the input gradient and returns an empty tensor.
    void set_input_grad(bool enabled) { input_grad_ = enabled; }

protected:
    void require_cache(bool present) const;

    Mode mode_ = Mode::train;
    bool input_grad_ = true;
};

class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out, Init init, std::mt19937_64& rng);

    LayerKind kind() const override { return LayerKind::dense; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& input_shape) const override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }
    Parameter& weight() { return weight_; }  // out x in
    Parameter& bias() { return bias_; }

private:
    std::size_t in_, out_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

/// 3x3 kernel, stride 1, no padding.
class Conv2D final : public Layer {
public:
    static constexpr std::size_t kernel = 3;

    Conv2D(std::size_t in_channels, std::size_t out_channels, Init init, std::mt19937_64& rng);

    LayerKind kind() const override { return LayerKind::conv2d; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& input_shape) const override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

    Parameter& weight() { return weight_; }  // out x in x 3 x 3
    Parameter& bias() { return bias_; }

private:
    std::size_t in_ch_, out_ch_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

/// floor((in - k + 2 * padding) / stride) + 1
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

class ReLU final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::relu; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& s) const override { return s; }

private:
    Shape shape_;
    std::vector<std::uint8_t> active_;
};

class Sigmoid final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::sigmoid; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& s) const override { return s; }

private:
    Tensor output_;
};

/// Identity activation closing a regression head.
class LinearActivation final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::linear; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& s) const override { return s; }

private:
    bool cached_ = false;
};

/// Per-channel normalization over the batch and any trailing spatial dims.
/// Running statistics follow running = momentum * running + (1 - momentum) * batch.
class BatchNorm final : public Layer {
public:
    explicit BatchNorm(std::size_t channels, double epsilon = 1e-5, double momentum = 0.9);

    LayerKind kind() const override { return LayerKind::batch_norm; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& s) const override { return s; }
    std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
    std::vector<Tensor*> buffers() override { return {&running_mean_, &running_var_}; }

    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }
    const Tensor& running_mean() const { return running_mean_; }
    const Tensor& running_var() const { return running_var_; }

private:
    std::size_t channels_;
    double epsilon_;
    double momentum_;
    Parameter gamma_;
    Parameter beta_;
    Tensor running_mean_;
    Tensor running_var_;
    Tensor normalized_;
    std::vector<double> inv_std_;
    bool used_batch_stats_ = false;
};

/// 2x2 window, stride 2; odd trailing rows/cols are dropped.
class MaxPool final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::max_pool; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& input_shape) const override;

private:
    Shape input_shape_;
    std::vector<std::uint8_t> argmax_;  // window offset dy * 2 + dx
};

class Flatten final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::flatten; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& input_shape) const override;

private:
    Shape input_shape_;
};

/// Inverted dropout: survivors are scaled by 1 / (1 - p) in train mode.
class Dropout final : public Layer {
public:
    Dropout(double p, std::uint64_t seed);

    LayerKind kind() const override { return LayerKind::dropout; }
    Tensor forward(Tensor input) override;
    Tensor backward(Tensor grad_output) override;
    Shape output_shape(const Shape& s) const override { return s; }

    double probability() const { return p_; }
    /// Reuse the previous mask on the next train-mode forward (finite-difference checks).
    void freeze_mask(bool frozen) { frozen_ = frozen; }

private:
    double p_;
    std::mt19937_64 rng_;
    std::vector<double> mask_;
    bool frozen_ = false;
    bool cached_ = false;
};

}  // namespace mvts
