#include "mvts/network.hpp"

#include <stdexcept>

namespace mvts {

Tensor Network::forward(const Tensor& input)
{
    if (layers_.empty()) throw std::logic_error("network has no layers");
    Tensor x = layers_.front()->forward(input);
    for (std::size_t i = 1; i < layers_.size(); ++i) x = layers_[i]->forward(std::move(x));
    return x;
}

Tensor Network::backward(const Tensor& grad_output)
{
    Tensor g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(std::move(g));
    return g;
}

void Network::set_mode(Mode mode)
{
    mode_ = mode;
    for (auto& l : layers_) l->set_mode(mode);
}

void Network::set_input_grad(bool enabled)
{
    if (!layers_.empty()) layers_.front()->set_input_grad(enabled);
}

std::vector<Parameter*> Network::parameters()
{
    std::vector<Parameter*> out;
    for (auto& l : layers_)
        for (Parameter* p : l->parameters()) out.push_back(p);
    return out;
}

std::vector<Layer*> Network::layers()
{
    std::vector<Layer*> out;
    out.reserve(layers_.size());
    for (auto& l : layers_) out.push_back(l.get());
    return out;
}

std::size_t Network::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_)
        for (Parameter* p : l->parameters()) n += p->value.size();
    return n;
}

Shape Network::output_shape(Shape input_shape) const
{
    for (const auto& l : layers_) input_shape = l->output_shape(input_shape);
    return input_shape;
}

void Network::zero_grad()
{
    mvts::zero_grad(parameters());
}

std::size_t parameter_count(const std::vector<Parameter*>& params)
{
    std::size_t n = 0;
    for (const Parameter* p : params) n += p->value.size();
    return n;
}

void zero_grad(const std::vector<Parameter*>& params)
{
    for (Parameter* p : params) p->grad.fill(0.0);
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& params)
{
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const Parameter* p : params) out.push_back(p->value);
    return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& values)
{
    if (params.size() != values.size()) throw std::invalid_argument("snapshot does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->value.shape() != values[i].shape())
            throw std::invalid_argument("snapshot shape mismatch at parameter " + std::to_string(i));
        params[i]->value = values[i];
    }
}

}  // namespace mvts
