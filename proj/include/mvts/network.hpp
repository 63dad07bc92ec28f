#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "mvts/layers.hpp"

namespace mvts {

/// Ordered stack of layers with a shared train/eval mode.
class Network {
public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    template <typename L, typename... Args>
    L& emplace(Args&&... args)
    {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layer->set_mode(mode_);
        layers_.push_back(std::move(layer));
        return ref;
    }

    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output);

    void set_mode(Mode mode);
    Mode mode() const { return mode_; }

    /// Skip the gradient w.r.t. the network input (raw data needs none).
    void set_input_grad(bool enabled);

    std::vector<Parameter*> parameters();
    std::vector<Layer*> layers();
    std::size_t parameter_count() const;
    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }

    Shape output_shape(Shape input_shape) const;
    void zero_grad();

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    Mode mode_ = Mode::train;
};

std::size_t parameter_count(const std::vector<Parameter*>& params);
void zero_grad(const std::vector<Parameter*>& params);

/// Flat copy of all parameter values, e.g. to restore the best epoch.
std::vector<Tensor> snapshot(const std::vector<Parameter*>& params);
void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& values);

}  // namespace mvts
