#include "mvts/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mvts {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), options_(options)
{
    for (const Parameter* p : params_) {
        if (p->value.shape() != p->grad.shape()) throw std::invalid_argument("parameter and gradient shapes differ");
        first_.emplace_back(p->value.shape());
        second_.emplace_back(p->value.shape());
    }
    scales_.assign(params_.size(), 1.0);
}

void Adam::set_rate_scales(std::vector<double> scales)
{
    if (scales.size() != params_.size()) throw std::invalid_argument("one rate scale per parameter is required");
    scales_ = std::move(scales);
}

void Adam::step()
{
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(options_.beta1, t);
    const double c2 = 1.0 - std::pow(options_.beta2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto value = params_[k]->value.values();
        auto grad = params_[k]->grad.values();
        auto m = first_[k].values();
        auto v = second_[k].values();
        const double lr = options_.learning_rate * scales_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * grad[i];
            v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * grad[i] * grad[i];
            value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
        }
    }
}

Sgd::Sgd(std::vector<Parameter*> params, double learning_rate)
    : params_(std::move(params)), learning_rate_(learning_rate)
{
}

void Sgd::step()
{
    for (Parameter* p : params_) {
        auto value = p->value.values();
        auto grad = p->grad.values();
        for (std::size_t i = 0; i < value.size(); ++i) value[i] -= learning_rate_ * grad[i];
    }
}

}  // namespace mvts
