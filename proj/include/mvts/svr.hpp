#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "mvts/tensor.hpp"

namespace mvts {

class SvrError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SvrOptions {
    double epsilon = 0.05;
    double C = 10.0;
    std::size_t max_iter = 100000;
    /// Rows per subgradient step; 0 means all rows up to 256, else 32.
    std::size_t batch_size = 0;
    std::uint64_t seed = 1;
    std::size_t trace_interval = 100;
};

struct SvrModel {
    std::vector<double> w;
    double b = 0.0;
    double epsilon = 0.05;
    double C = 10.0;
    double objective = 0.0;
    /// Objective of the model held at every trace_interval steps.
    std::vector<double> objective_trace;

    nlohmann::json to_json() const;
    static SvrModel from_json(const nlohmann::json& j);
};

/// 1/2 |w|^2 + C sum max(0, |w.x_i + b - y_i| - epsilon)
double svr_objective(std::span<const double> w, double b, const Tensor& X, std::span<const double> y,
                     double epsilon, double C);

/// Averaged subgradient descent with step 1 / (lambda t), lambda = 1 / C, started at
/// (w = 0, b = median(y)); returns the best model seen among the running and
/// averaged iterates, so the result never scores worse than that start.
SvrModel fit_svr(const Tensor& X, std::span<const double> y, const SvrOptions& options = {});

double predict_svr(const SvrModel& model, std::span<const double> x);
std::vector<double> predict_svr(const SvrModel& model, const Tensor& X);

}  // namespace mvts
