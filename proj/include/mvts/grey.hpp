#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mvts {

class GreyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// r-fold accumulated generating operation (running sums).
std::vector<double> ago(std::span<const double> series, int r = 1);
/// r-fold inverse: y(1) = x(1), y(k) = x(k) - x(k-1).
std::vector<double> iago(std::span<const double> series, int r = 1);

/// How accumulated values are extrapolated from (a, u).
///   discrete:   x1(k+1) = (x0(1) - u/a) rho^k + u/a,  rho = (1 - a/2) / (1 + a/2),
///               the exact solution of x0(k) + a z1(k) = u; exact on geometric data.
///   continuous: x1(k+1) = (x0(1) - u/a) e^{-ak} + u/a, the whitening-equation solution.
/// Both use x1(k+1) = x0(1) + u k when |a| < 1e-12.
enum class GreyResponse { discrete, continuous };

struct GreyModel {
    double a = 0.0;
    double u = 0.0;
    double x0_first = 0.0;
    std::size_t n = 0;
    GreyResponse response = GreyResponse::discrete;
    std::vector<double> fitted;     // in-sample x0 estimates, k = 1..n
    std::vector<double> residuals;  // (x0(k) - fitted(k)) / x0(k)
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

/// Least-squares identification of (a, u); needs >= 4 strictly positive values.
GreyModel fit_gm11(std::span<const double> series, GreyResponse response = GreyResponse::discrete);

/// Accumulated estimate x1 at 1-based position k.
double gm11_accumulated(const GreyModel& model, std::size_t k);

/// Raw-scale forecasts for positions n + offset + 1 ... n + offset + steps.
std::vector<double> predict_gm11(const GreyModel& model, std::size_t steps, std::size_t offset = 0);

struct GreyCheck {
    std::vector<double> level_ratios;  // x0(k-1) / x0(k), k = 2..n
    double lower = 0.0;
    double upper = 0.0;
    bool ratios_admissible = true;
    double mean_relative_error = 0.0;
    bool pass = true;

    std::string verdict() const { return pass ? "pass" : "warn"; }
    nlohmann::json to_json() const;
};

/// Level ratios must lie in (e^{-2/(n+1)}, e^{2/(n+1)}); pass also needs mean relative error < 10%.
GreyCheck check_gm11(const GreyModel& model, std::span<const double> series);

}  // namespace mvts
