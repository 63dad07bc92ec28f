#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "mvts/dataset.hpp"
#include "mvts/network.hpp"

namespace mvts {

class BaselineError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct BpConfig {
    std::size_t hidden = 16;
    std::size_t epochs = 2000;
    double learning_rate = 1.0;
    std::uint64_t seed = 1;

    nlohmann::json to_json() const;
};

struct AnnConfig {
    std::vector<std::size_t> hidden = {32, 32};
    std::size_t epochs = 300;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;

    nlohmann::json to_json() const;
};

struct BaselineModel {
    Network network;
    std::size_t input_width = 0;
    std::vector<double> loss_history;  // one entry per epoch
};

/// Input -> Dense(hidden) + Sigmoid -> Dense(1) + Sigmoid.
Network build_bp(std::size_t input_width, const BpConfig& config);
/// Input -> [Dense(h) + ReLU]... -> Dense(1) + LinearActivation.
Network build_ann(std::size_t input_width, const AnnConfig& config);

/// 1/2 mean (o - y)^2 over the batch; runs forward and backward, accumulating gradients.
double half_squared_error_step(Network& net, const Tensor& X, std::span<const double> y);
/// mean (o - y)^2; runs forward and backward, accumulating gradients.
double squared_error_step(Network& net, const Tensor& X, std::span<const double> y);

/// Full-batch gradient descent; targets must lie strictly inside (0, 1).
BaselineModel fit_bp(const Tensor& X, std::span<const double> y_norm, const BpConfig& config);
/// Mini-batch Adam on squared error.
BaselineModel fit_ann(const Tensor& X, std::span<const double> y_norm, const AnnConfig& config);

/// Head outputs mapped through the price scaler.
std::vector<double> predict_baseline(BaselineModel& model, const Tensor& X, const PriceScaler& price_scaler);

/// Text block concatenated with the deep block when present.
Tensor tabular_features(const EncodedDataset& data);

}  // namespace mvts
