#include "mvts/grey.hpp"

#include <cmath>

namespace mvts {

namespace {

struct Band {
    double lower, upper;
};

Band level_ratio_band(std::size_t n)
{
    const double e = 2.0 / static_cast<double>(n + 1);
    return {std::exp(-e), std::exp(e)};
}

}  // namespace

std::vector<double> ago(std::span<const double> series, int r)
{
    if (series.empty()) throw GreyError("ago of an empty series");
    if (r < 0) throw GreyError("accumulation order must be nonnegative");
    std::vector<double> out(series.begin(), series.end());
    for (int pass = 0; pass < r; ++pass)
        for (std::size_t k = 1; k < out.size(); ++k) out[k] += out[k - 1];
    return out;
}

std::vector<double> iago(std::span<const double> series, int r)
{
    if (series.empty()) throw GreyError("iago of an empty series");
    if (r < 0) throw GreyError("accumulation order must be nonnegative");
    std::vector<double> out(series.begin(), series.end());
    for (int pass = 0; pass < r; ++pass)
        for (std::size_t k = out.size() - 1; k > 0; --k) out[k] -= out[k - 1];
    return out;
}

GreyModel fit_gm11(std::span<const double> series, GreyResponse response)
{
    const std::size_t n = series.size();
    if (n < 4) throw GreyError("GM(1,1) needs at least 4 values, got " + std::to_string(n));
    for (std::size_t k = 0; k < n; ++k)
        if (!(series[k] > 0.0) || !std::isfinite(series[k]))
            throw GreyError("GM(1,1) needs strictly positive data; value " + std::to_string(k + 1) + " is " +
                            std::to_string(series[k]));

    const auto x1 = ago(series);
    // Regression x0(k) = -a z(k) + u over k = 2..n, solved in centred form
    // (algebraically the normal equations of B = [-z, 1]).
    const std::size_t m = n - 1;
    std::vector<double> z(m), y(m);
    double z_mean = 0.0, y_mean = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        z[k] = 0.5 * (x1[k] + x1[k + 1]);
        y[k] = series[k + 1];
        z_mean += z[k];
        y_mean += y[k];
    }
    z_mean /= static_cast<double>(m);
    y_mean /= static_cast<double>(m);
    double szz = 0.0, szy = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        szz += (z[k] - z_mean) * (z[k] - z_mean);
        szy += (z[k] - z_mean) * (y[k] - y_mean);
    }
    if (!(szz > 1e-300) || szz <= 1e-24 * z_mean * z_mean * static_cast<double>(m))
        throw GreyError("singular B^T B in GM(1,1) identification");

    GreyModel model;
    model.a = -szy / szz;
    model.u = y_mean + model.a * z_mean;
    model.x0_first = series[0];
    model.n = n;
    model.response = response;
    if (response == GreyResponse::discrete && std::abs(1.0 + 0.5 * model.a) < 1e-12)
        throw GreyError("development coefficient a = -2 has no discrete response");

    const Band band = level_ratio_band(n);
    for (std::size_t k = 1; k < n; ++k) {
        const double ratio = series[k - 1] / series[k];
        if (!(ratio > band.lower && ratio < band.upper)) {
            model.warnings.push_back("level ratio " + std::to_string(ratio) + " at k=" + std::to_string(k + 1) +
                                     " is outside the admissible band");
        }
    }

    model.fitted.resize(n);
    model.residuals.resize(n);
    model.fitted[0] = series[0];
    model.residuals[0] = 0.0;
    for (std::size_t k = 2; k <= n; ++k) {
        model.fitted[k - 1] = gm11_accumulated(model, k) - gm11_accumulated(model, k - 1);
        model.residuals[k - 1] = (series[k - 1] - model.fitted[k - 1]) / series[k - 1];
    }
    return model;
}

double gm11_accumulated(const GreyModel& model, std::size_t k)
{
    if (k == 0) throw GreyError("accumulated positions are 1-based");
    const double steps = static_cast<double>(k - 1);
    if (std::abs(model.a) < 1e-12) return model.x0_first + model.u * steps;
    const double c = model.u / model.a;
    const double growth = model.response == GreyResponse::discrete
                              ? std::pow((1.0 - 0.5 * model.a) / (1.0 + 0.5 * model.a), steps)
                              : std::exp(-model.a * steps);
    return (model.x0_first - c) * growth + c;
}

std::vector<double> predict_gm11(const GreyModel& model, std::size_t steps, std::size_t offset)
{
    if (model.n == 0) throw GreyError("model is not fitted");
    std::vector<double> out;
    out.reserve(steps);
    for (std::size_t s = 1; s <= steps; ++s) {
        const std::size_t k = model.n + offset + s;
        out.push_back(gm11_accumulated(model, k) - gm11_accumulated(model, k - 1));
    }
    return out;
}

GreyCheck check_gm11(const GreyModel& model, std::span<const double> series)
{
    if (series.size() != model.n) throw GreyError("check series length differs from the fitted length");
    GreyCheck check;
    const Band band = level_ratio_band(model.n);
    check.lower = band.lower;
    check.upper = band.upper;
    for (std::size_t k = 1; k < series.size(); ++k) {
        const double ratio = series[k - 1] / series[k];
        check.level_ratios.push_back(ratio);
        if (!(ratio > band.lower && ratio < band.upper)) check.ratios_admissible = false;
    }
    double s = 0.0;
    for (std::size_t k = 1; k < series.size(); ++k) s += std::abs((series[k] - model.fitted[k]) / series[k]);
    check.mean_relative_error = s / static_cast<double>(series.size() - 1);
    check.pass = check.ratios_admissible && check.mean_relative_error < 0.10;
    return check;
}

nlohmann::json GreyModel::to_json() const
{
    return {{"a", a},
            {"u", u},
            {"x0_first", x0_first},
            {"n", n},
            {"response", response == GreyResponse::discrete ? "discrete" : "continuous"},
            {"fitted", fitted},
            {"relative_residuals", residuals},
            {"warnings", warnings}};
}

nlohmann::json GreyCheck::to_json() const
{
    return {{"level_ratios", level_ratios},
            {"band", {lower, upper}},
            {"ratios_admissible", ratios_admissible},
            {"mean_relative_error", mean_relative_error},
            {"verdict", verdict()}};
}

}  // namespace mvts
