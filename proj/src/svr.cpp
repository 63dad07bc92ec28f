#include "mvts/svr.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mvts {

namespace {

void check_inputs(const Tensor& X, std::span<const double> y)
{
    if (X.rank() != 2 || X.empty()) throw SvrError("SVR needs a nonempty n x d matrix");
    if (X.dim(0) != y.size())
        throw SvrError("SVR rows (" + std::to_string(X.dim(0)) + ") and targets (" + std::to_string(y.size()) +
                       ") differ");
    for (double v : X.values())
        if (!std::isfinite(v)) throw SvrError("SVR features contain NaN or infinity");
    for (double v : y)
        if (!std::isfinite(v)) throw SvrError("SVR targets contain NaN or infinity");
}

double median(std::span<const double> y)
{
    std::vector<double> v(y.begin(), y.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

double svr_objective(std::span<const double> w, double b, const Tensor& X, std::span<const double> y,
                     double epsilon, double C)
{
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) loss += std::max(0.0, std::abs(dot(w, X.row(i)) + b - y[i]) - epsilon);
    return 0.5 * dot(w, w) + C * loss;
}

SvrModel fit_svr(const Tensor& X, std::span<const double> y, const SvrOptions& options)
{
    check_inputs(X, y);
    if (options.epsilon < 0.0) throw SvrError("epsilon must be nonnegative");
    if (!(options.C > 0.0)) throw SvrError("C must be positive");
    if (options.trace_interval == 0) throw SvrError("trace interval must be positive");

    const std::size_t n = X.dim(0), d = X.dim(1);
    const std::size_t batch =
        options.batch_size != 0 ? std::min(options.batch_size, n) : (n <= 256 ? n : std::size_t{32});
    const bool full = batch == n;
    const double lambda = 1.0 / options.C;
    const double eps = options.epsilon;
    auto objective = [&](std::span<const double> w, double b) { return svr_objective(w, b, X, y, eps, options.C); };

    std::vector<double> w(d, 0.0), w_avg(d, 0.0), gw(d);
    double b = median(y), b_avg = b;

    SvrModel best;
    best.epsilon = eps;
    best.C = options.C;
    best.w = w;
    best.b = b;
    best.objective = objective(w, b);

    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(batch);
    const double weight = static_cast<double>(n) / static_cast<double>(batch);

    for (std::size_t t = 1; t <= options.max_iter; ++t) {
        if (full)
            for (std::size_t i = 0; i < n; ++i) rows[i] = i;
        else
            for (auto& r : rows) r = pick(rng);

        // Subgradient of lambda/2 |w|^2 + sum_i loss_i, i.e. the objective divided by C.
        for (std::size_t k = 0; k < d; ++k) gw[k] = lambda * w[k];
        double gb = 0.0;
        for (std::size_t r : rows) {
            const auto x = X.row(r);
            const double residual = dot(w, x) + b - y[r];
            const double s = residual > eps ? 1.0 : (residual < -eps ? -1.0 : 0.0);
            if (s == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) gw[k] += weight * s * x[k];
            gb += weight * s;
        }
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        for (std::size_t k = 0; k < d; ++k) w[k] -= eta * gw[k];
        b -= eta * gb;

        const double mix = 1.0 / static_cast<double>(t);
        for (std::size_t k = 0; k < d; ++k) w_avg[k] += (w[k] - w_avg[k]) * mix;
        b_avg += (b - b_avg) * mix;

        if (t % options.trace_interval == 0 || t == options.max_iter) {
            const double f_avg = objective(w_avg, b_avg);
            if (f_avg < best.objective) {
                best.w = w_avg;
                best.b = b_avg;
                best.objective = f_avg;
            }
            const double f_last = objective(w, b);
            if (f_last < best.objective) {
                best.w = w;
                best.b = b;
                best.objective = f_last;
            }
            best.objective_trace.push_back(best.objective);
        }
    }
    return best;
}

double predict_svr(const SvrModel& model, std::span<const double> x)
{
    if (x.size() != model.w.size())
        throw SvrError("SVR input has " + std::to_string(x.size()) + " features, model expects " +
                       std::to_string(model.w.size()));
    return dot(model.w, x) + model.b;
}

std::vector<double> predict_svr(const SvrModel& model, const Tensor& X)
{
    if (X.rank() != 2) throw SvrError("SVR prediction needs an n x d matrix");
    std::vector<double> out;
    out.reserve(X.dim(0));
    for (std::size_t i = 0; i < X.dim(0); ++i) out.push_back(predict_svr(model, X.row(i)));
    return out;
}

nlohmann::json SvrModel::to_json() const
{
    return {{"w", w}, {"b", b}, {"epsilon", epsilon}, {"C", C}, {"objective", objective}};
}

SvrModel SvrModel::from_json(const nlohmann::json& j)
{
    SvrModel m;
    m.w = j.at("w").get<std::vector<double>>();
    m.b = j.at("b").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
    m.C = j.at("C").get<double>();
    m.objective = j.at("objective").get<double>();
    return m;
}

}  // namespace mvts
