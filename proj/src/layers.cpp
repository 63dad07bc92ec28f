#include "mvts/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <Eigen/Core>

namespace mvts {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void init_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Init init, std::mt19937_64& rng)
{
    const double limit = init == Init::he_uniform ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                                  : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : t.values()) v = dist(rng);
}

void check_same_shape(const Tensor& a, const Shape& expected, const char* what)
{
    if (a.shape() != expected)
        throw std::invalid_argument(std::string(what) + ": gradient shape " + shape_string(a.shape()) +
                                    " does not match " + shape_string(expected));
}

void im2col(const double* image, std::size_t channels, std::size_t h, std::size_t w, double* col)
{
    const std::size_t oh = h - 2, ow = w - 2;
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
                double* dst = col + ((c * 3 + ky) * 3 + kx) * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy)
                    std::memcpy(dst + oy * ow, image + (c * h + oy + ky) * w + kx, ow * sizeof(double));
            }
}

void col2im_add(const double* col, std::size_t channels, std::size_t h, std::size_t w, double* image)
{
    const std::size_t oh = h - 2, ow = w - 2;
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const double* src = col + ((c * 3 + ky) * 3 + kx) * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    double* dst = image + (c * h + oy + ky) * w + kx;
                    const double* s = src + oy * ow;
                    for (std::size_t ox = 0; ox < ow; ++ox) dst[ox] += s[ox];
                }
            }
}

}  // namespace

std::string to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::dense: return "Dense";
    case LayerKind::conv2d: return "Conv2D";
    case LayerKind::relu: return "ReLU";
    case LayerKind::sigmoid: return "Sigmoid";
    case LayerKind::batch_norm: return "BatchNorm";
    case LayerKind::max_pool: return "MaxPool";
    case LayerKind::flatten: return "Flatten";
    case LayerKind::dropout: return "Dropout";
    case LayerKind::linear: return "LinearActivation";
    }
    return "Unknown";
}

void Layer::require_cache(bool present) const
{
    if (!present) throw std::logic_error(to_string(kind()) + ": backward called before forward");
}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding)
{
    if (stride == 0) throw std::invalid_argument("stride must be positive");
    if (in + 2 * padding < kernel)
        throw std::invalid_argument("input of size " + std::to_string(in) + " is smaller than kernel " +
                                    std::to_string(kernel));
    return (in + 2 * padding - kernel) / stride + 1;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in, std::size_t out, Init init, std::mt19937_64& rng)
    : in_(in), out_(out), weight_({out, in}), bias_({out})
{
    init_uniform(weight_.value, in, out, init, rng);
}

Shape Dense::output_shape(const Shape& s) const
{
    if (s.size() != 2 || s[1] != in_)
        throw std::invalid_argument("Dense expects [batch x " + std::to_string(in_) + "], got " + shape_string(s));
    return {s[0], out_};
}

Tensor Dense::forward(Tensor input)
{
    Tensor out(output_shape(input.shape()));
    const std::size_t batch = input.dim(0);
    ConstMatrixMap x(input.data(), batch, in_);
    ConstMatrixMap w(weight_.value.data(), out_, in_);
    Eigen::Map<const Eigen::RowVectorXd> b(bias_.value.data(), out_);
    MatrixMap y(out.data(), batch, out_);
    y.noalias() = x * w.transpose();
    y.rowwise() += b;
    input_ = std::move(input);
    return out;
}

Tensor Dense::backward(Tensor grad_output)
{
    require_cache(!input_.empty());
    const std::size_t batch = input_.dim(0);
    check_same_shape(grad_output, {batch, out_}, "Dense");
    ConstMatrixMap g(grad_output.data(), batch, out_);
    ConstMatrixMap x(input_.data(), batch, in_);
    MatrixMap dw(weight_.grad.data(), out_, in_);
    Eigen::Map<Eigen::RowVectorXd> db(bias_.grad.data(), out_);
    dw.noalias() += g.transpose() * x;
    db += g.colwise().sum();
    if (!input_grad_) return {};
    Tensor grad_input(input_.shape());
    ConstMatrixMap w(weight_.value.data(), out_, in_);
    MatrixMap dx(grad_input.data(), batch, in_);
    dx.noalias() = g * w;
    return grad_input;
}

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(std::size_t in_channels, std::size_t out_channels, Init init, std::mt19937_64& rng)
    : in_ch_(in_channels), out_ch_(out_channels), weight_({out_channels, in_channels, kernel, kernel}),
      bias_({out_channels})
{
    init_uniform(weight_.value, in_channels * kernel * kernel, out_channels * kernel * kernel, init, rng);
}

Shape Conv2D::output_shape(const Shape& s) const
{
    if (s.size() != 4 || s[1] != in_ch_)
        throw std::invalid_argument("Conv2D expects [batch x " + std::to_string(in_ch_) + " x H x W], got " +
                                    shape_string(s));
    return {s[0], out_ch_, conv_output_size(s[2], kernel, 1, 0), conv_output_size(s[3], kernel, 1, 0)};
}

Tensor Conv2D::forward(Tensor input)
{
    const Shape out_shape = output_shape(input.shape());
    const std::size_t batch = out_shape[0], h = input.dim(2), w = input.dim(3);
    const std::size_t oh = out_shape[2], ow = out_shape[3], area = oh * ow, k = in_ch_ * kernel * kernel;
    Tensor out(out_shape);
    AlignedVector col(k * area);
    ConstMatrixMap weights(weight_.value.data(), out_ch_, k);
    Eigen::Map<const Eigen::VectorXd> b(bias_.value.data(), out_ch_);
    for (std::size_t n = 0; n < batch; ++n) {
        im2col(input.data() + n * in_ch_ * h * w, in_ch_, h, w, col.data());
        MatrixMap y(out.data() + n * out_ch_ * area, out_ch_, area);
        y.noalias() = weights * ConstMatrixMap(col.data(), k, area);
        y.colwise() += b;
    }
    input_ = std::move(input);
    return out;
}

Tensor Conv2D::backward(Tensor grad_output)
{
    require_cache(!input_.empty());
    const Shape out_shape = output_shape(input_.shape());
    check_same_shape(grad_output, out_shape, "Conv2D");
    const std::size_t batch = out_shape[0], h = input_.dim(2), w = input_.dim(3);
    const std::size_t area = out_shape[2] * out_shape[3], k = in_ch_ * kernel * kernel;
    AlignedVector col(k * area);
    AlignedVector dcol(input_grad_ ? k * area : 0);
    ConstMatrixMap weights(weight_.value.data(), out_ch_, k);
    MatrixMap dw(weight_.grad.data(), out_ch_, k);
    Eigen::Map<Eigen::VectorXd> db(bias_.grad.data(), out_ch_);
    Tensor grad_input;
    if (input_grad_) grad_input = Tensor(input_.shape());
    for (std::size_t n = 0; n < batch; ++n) {
        ConstMatrixMap g(grad_output.data() + n * out_ch_ * area, out_ch_, area);
        im2col(input_.data() + n * in_ch_ * h * w, in_ch_, h, w, col.data());
        dw.noalias() += g * ConstMatrixMap(col.data(), k, area).transpose();
        db += g.rowwise().sum();
        if (input_grad_) {
            MatrixMap dc(dcol.data(), k, area);
            dc.noalias() = weights.transpose() * g;
            col2im_add(dcol.data(), in_ch_, h, w, grad_input.data() + n * in_ch_ * h * w);
        }
    }
    return grad_input;
}

// ---------------------------------------------------------------- activations

Tensor ReLU::forward(Tensor input)
{
    active_.resize(input.size());
    auto v = input.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool on = v[i] > 0.0;
        active_[i] = on;
        if (!on && !std::isnan(v[i])) v[i] = 0.0;
    }
    shape_ = input.shape();
    return input;
}

Tensor ReLU::backward(Tensor grad_output)
{
    require_cache(!shape_.empty());
    check_same_shape(grad_output, shape_, "ReLU");
    auto g = grad_output.values();
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!active_[i]) g[i] = 0.0;
    return grad_output;
}

Tensor Sigmoid::forward(Tensor input)
{
    for (double& v : input.values()) {
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    output_ = input;
    return input;
}

Tensor Sigmoid::backward(Tensor grad_output)
{
    require_cache(!output_.empty());
    check_same_shape(grad_output, output_.shape(), "Sigmoid");
    auto s = output_.values();
    auto g = grad_output.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s[i] * (1.0 - s[i]);
    return grad_output;
}

Tensor LinearActivation::forward(Tensor input)
{
    cached_ = true;
    return input;
}

Tensor LinearActivation::backward(Tensor grad_output)
{
    require_cache(cached_);
    return grad_output;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t channels, double epsilon, double momentum)
    : channels_(channels), epsilon_(epsilon), momentum_(momentum), gamma_({channels}), beta_({channels}),
      running_mean_({channels}, 0.0), running_var_({channels}, 1.0)
{
    gamma_.value.fill(1.0);
}

Tensor BatchNorm::forward(Tensor input)
{
    if (input.rank() < 2 || input.dim(1) != channels_)
        throw std::invalid_argument("BatchNorm expects [batch x " + std::to_string(channels_) + " x ...], got " +
                                    shape_string(input.shape()));
    const std::size_t batch = input.dim(0);
    const std::size_t spatial = input.size() / (batch * channels_);
    const bool use_batch = mode_ == Mode::train;
    if (use_batch && batch < 2) throw std::invalid_argument("BatchNorm in train mode needs a batch of at least 2");

    const double count = static_cast<double>(batch * spatial);
    std::vector<double> mean(channels_), var(channels_);
    if (use_batch) {
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t c = 0; c < channels_; ++c) {
                const double* p = input.data() + (n * channels_ + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) mean[c] += p[i];
            }
        for (double& m : mean) m /= count;
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t c = 0; c < channels_; ++c) {
                const double* p = input.data() + (n * channels_ + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    const double d = p[i] - mean[c];
                    var[c] += d * d;
                }
            }
        for (double& v : var) v /= count;
        for (std::size_t c = 0; c < channels_; ++c) {
            running_mean_[c] = momentum_ * running_mean_[c] + (1.0 - momentum_) * mean[c];
            running_var_[c] = momentum_ * running_var_[c] + (1.0 - momentum_) * var[c] * count / (count - 1.0);
        }
    } else {
        for (std::size_t c = 0; c < channels_; ++c) {
            mean[c] = running_mean_[c];
            var[c] = running_var_[c];
        }
    }

    inv_std_.assign(channels_, 0.0);
    for (std::size_t c = 0; c < channels_; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + epsilon_);

    if (normalized_.shape() != input.shape()) normalized_ = Tensor(input.shape());
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels_; ++c) {
            const std::size_t off = (n * channels_ + c) * spatial;
            double* x = input.data() + off;
            double* xh = normalized_.data() + off;
            const double m = mean[c], s = inv_std_[c], g = gamma_.value[c], b = beta_.value[c];
            for (std::size_t i = 0; i < spatial; ++i) {
                xh[i] = (x[i] - m) * s;
                x[i] = g * xh[i] + b;
            }
        }
    used_batch_stats_ = use_batch;
    return input;
}

Tensor BatchNorm::backward(Tensor grad_output)
{
    require_cache(!normalized_.empty());
    check_same_shape(grad_output, normalized_.shape(), "BatchNorm");
    const std::size_t batch = normalized_.dim(0);
    const std::size_t spatial = normalized_.size() / (batch * channels_);
    const double count = static_cast<double>(batch * spatial);

    std::vector<double> sum_g(channels_), sum_gx(channels_);
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels_; ++c) {
            const std::size_t off = (n * channels_ + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                sum_g[c] += grad_output[off + i];
                sum_gx[c] += grad_output[off + i] * normalized_[off + i];
            }
        }
    for (std::size_t c = 0; c < channels_; ++c) {
        gamma_.grad[c] += sum_gx[c];
        beta_.grad[c] += sum_g[c];
    }
    if (!input_grad_) return {};

    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels_; ++c) {
            const std::size_t off = (n * channels_ + c) * spatial;
            const double scale = gamma_.value[c] * inv_std_[c];
            double* g = grad_output.data() + off;
            const double* xh = normalized_.data() + off;
            if (used_batch_stats_) {
                const double mg = sum_g[c] / count, mgx = sum_gx[c] / count;
                for (std::size_t i = 0; i < spatial; ++i) g[i] = scale * (g[i] - mg - xh[i] * mgx);
            } else {
                for (std::size_t i = 0; i < spatial; ++i) g[i] *= scale;
            }
        }
    return grad_output;
}

// ---------------------------------------------------------------- MaxPool

Shape MaxPool::output_shape(const Shape& s) const
{
    if (s.size() != 4 || s[2] < 2 || s[3] < 2)
        throw std::invalid_argument("MaxPool expects [batch x C x H x W] with H, W >= 2, got " + shape_string(s));
    return {s[0], s[1], s[2] / 2, s[3] / 2};
}

Tensor MaxPool::forward(Tensor input)
{
    const Shape out_shape = output_shape(input.shape());
    const std::size_t planes = out_shape[0] * out_shape[1];
    const std::size_t h = input.dim(2), w = input.dim(3), oh = out_shape[2], ow = out_shape[3];
    Tensor out(out_shape);
    argmax_.assign(out.size(), 0);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = input.data() + p * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const double* top = src + 2 * oy * w;
            const double* bottom = top + w;
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const double window[4] = {top[2 * ox], top[2 * ox + 1], bottom[2 * ox], bottom[2 * ox + 1]};
                std::uint8_t best = 0;
                for (std::uint8_t k = 1; k < 4; ++k)
                    if (window[k] > window[best]) best = k;
                const std::size_t o = (p * oh + oy) * ow + ox;
                out[o] = window[best];
                argmax_[o] = best;
            }
        }
    }
    input_shape_ = input.shape();
    return out;
}

Tensor MaxPool::backward(Tensor grad_output)
{
    require_cache(!input_shape_.empty());
    const Shape out_shape = output_shape(input_shape_);
    check_same_shape(grad_output, out_shape, "MaxPool");
    const std::size_t planes = out_shape[0] * out_shape[1];
    const std::size_t h = input_shape_[2], w = input_shape_[3], oh = out_shape[2], ow = out_shape[3];
    Tensor grad_input(input_shape_);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::size_t o = (p * oh + oy) * ow + ox;
                const std::size_t dy = argmax_[o] >> 1, dx = argmax_[o] & 1u;
                grad_input[p * h * w + (2 * oy + dy) * w + 2 * ox + dx] += grad_output[o];
            }
    return grad_input;
}

// ---------------------------------------------------------------- Flatten

Shape Flatten::output_shape(const Shape& s) const
{
    if (s.empty()) throw std::invalid_argument("Flatten needs a batched tensor");
    return {s[0], element_count(s) / s[0]};
}

Tensor Flatten::forward(Tensor input)
{
    input_shape_ = input.shape();
    input.reshape(output_shape(input_shape_));
    return input;
}

Tensor Flatten::backward(Tensor grad_output)
{
    require_cache(!input_shape_.empty());
    grad_output.reshape(input_shape_);
    return grad_output;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed)
{
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
}

Tensor Dropout::forward(Tensor input)
{
    cached_ = true;
    if (mode_ == Mode::eval || p_ == 0.0) {
        mask_.assign(input.size(), 1.0);
        return input;
    }
    if (!frozen_ || mask_.size() != input.size()) {
        std::bernoulli_distribution keep(1.0 - p_);
        const double scale = 1.0 / (1.0 - p_);
        mask_.resize(input.size());
        for (double& m : mask_) m = keep(rng_) ? scale : 0.0;
    }
    for (std::size_t i = 0; i < input.size(); ++i) input[i] *= mask_[i];
    return input;
}

Tensor Dropout::backward(Tensor grad_output)
{
    require_cache(cached_);
    if (grad_output.size() != mask_.size()) throw std::invalid_argument("Dropout: gradient size mismatch");
    for (std::size_t i = 0; i < grad_output.size(); ++i) grad_output[i] *= mask_[i];
    return grad_output;
}

}  // namespace mvts
