#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mvts {

class TimeSeriesError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// d-fold first differencing; result has length n - d.
std::vector<double> difference(std::span<const double> series, int d);

/// Continuation of a series from its d-th differences. `head` holds the d original
/// values that precede the differenced segment, so that
/// head ++ undifference(head, difference(x, d)) == x with head = x[0..d).
std::vector<double> undifference(std::span<const double> head, std::span<const double> diffs);

/// Sample autocorrelations r(0..max_lag); r(0) = 1.
std::vector<double> acf(std::span<const double> series, std::size_t max_lag);
/// Partial autocorrelations by Durbin-Levinson; element 0 is 1.
std::vector<double> pacf(std::span<const double> series, std::size_t max_lag);

/// y(t) - mean = sum phi_i (y(t-i) - mean) + a(t) - sum theta_j a(t-j),
/// on the d-times differenced series.
struct ArimaModel {
    std::size_t p = 0, d = 0, q = 0;
    std::vector<double> phi;
    std::vector<double> theta;
    double mean = 0.0;
    bool has_mean = true;  // false: mean fixed at 0
    double sigma2 = 0.0;
    std::vector<double> residuals;  // shocks over the differenced training series
    std::vector<std::string> warnings;

    /// n log(sigma2) + 2 (p + q + [has_mean]) over the residuals used in estimation.
    double aic() const;
    nlohmann::json to_json() const;
};

/// Least squares on p lags with an intercept; mean = intercept / (1 - sum phi).
ArimaModel fit_ar(std::span<const double> series, std::size_t p);

struct ArimaOptions {
    bool refine = true;  // conditional-sum-of-squares descent after Hannan-Rissanen
    std::size_t max_iter = 200;
    double tolerance = 1e-8;
    /// Estimate a mean for the differenced series; unset means "only when d = 0",
    /// so a differenced model carries no drift.
    std::optional<bool> include_mean;
};

ArimaModel fit_arima(std::span<const double> series, std::size_t p, std::size_t d, std::size_t q,
                     const ArimaOptions& options = {});

/// Conditional shocks of `model` over an already differenced series (pre-sample shocks 0).
std::vector<double> arma_shocks(const ArimaModel& model, std::span<const double> differenced);

/// h forecasts in the original scale of `history`.
std::vector<double> forecast(const ArimaModel& model, std::span<const double> history, std::size_t h);

/// Heuristic stationarity indicators; not a formal unit-root test.
struct StationarityReport {
    double trend_slope = 0.0;
    double acf_lag1 = 0.0;
    double acf_tail_variance = 0.0;
    bool looks_stationary = true;

    nlohmann::json to_json() const;
};

StationarityReport stationarity_report(std::span<const double> series);

}  // namespace mvts
