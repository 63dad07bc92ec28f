#pragma once

#include <cstddef>
#include <vector>

#include "mvts/layers.hpp"

namespace mvts {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamOptions options = {});

    void step();
    std::size_t steps() const { return step_; }
    /// Per-parameter multipliers on the learning rate, one per parameter tensor.
    void set_rate_scales(std::vector<double> scales);
    const AdamOptions& options() const { return options_; }

private:
    std::vector<Parameter*> params_;
    AdamOptions options_;
    std::vector<Tensor> first_;
    std::vector<Tensor> second_;
    std::vector<double> scales_;
    std::size_t step_ = 0;
};

/// Plain gradient descent: value -= learning_rate * grad.
class Sgd {
public:
    Sgd(std::vector<Parameter*> params, double learning_rate);
    void step();

private:
    std::vector<Parameter*> params_;
    double learning_rate_;
};

}  // namespace mvts
