#include "mvts/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

namespace mvts {

namespace {

// Least squares with a rank check; columns of X are regressors.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-12);
    if (qr.rank() < X.cols()) throw TimeSeriesError("singular design matrix");
    return qr.solve(y);
}

double sum_squares(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

// True when every root of 1 - c_1 B - ... - c_k B^k lies outside the unit circle.
bool roots_outside_unit_circle(const std::vector<double>& c)
{
    if (c.empty()) return true;
    const auto k = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) companion(0, i) = c[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < k; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
    for (Eigen::Index i = 0; i < k; ++i)
        if (std::abs(es.eigenvalues()(i)) >= 1.0) return false;
    return true;
}

void add_root_warnings(ArimaModel& m)
{
    if (!roots_outside_unit_circle(m.phi)) m.warnings.push_back("AR part is explosive or has a unit root");
    if (!roots_outside_unit_circle(m.theta)) m.warnings.push_back("MA part is not invertible");
}

double process_mean(double intercept, const std::vector<double>& phi, std::span<const double> w, ArimaModel& m)
{
    const double denom = 1.0 - std::accumulate(phi.begin(), phi.end(), 0.0);
    if (std::abs(denom) > 1e-8) return intercept / denom;
    m.warnings.push_back("sum of AR coefficients is 1; using the sample mean");
    return std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
}

}  // namespace

std::vector<double> difference(std::span<const double> series, int d)
{
    if (d < 0) throw TimeSeriesError("differencing order must be nonnegative");
    if (series.size() <= static_cast<std::size_t>(d))
        throw TimeSeriesError("series of length " + std::to_string(series.size()) + " is too short for d=" +
                              std::to_string(d));
    std::vector<double> out(series.begin(), series.end());
    for (int pass = 0; pass < d; ++pass) {
        for (std::size_t t = 0; t + 1 < out.size(); ++t) out[t] = out[t + 1] - out[t];
        out.pop_back();
    }
    return out;
}

std::vector<double> undifference(std::span<const double> head, std::span<const double> diffs)
{
    const std::size_t d = head.size();
    if (d == 0) return {diffs.begin(), diffs.end()};
    // last[j] = most recent value of the j-th difference of the head.
    std::vector<double> level(head.begin(), head.end());
    std::vector<double> last(d);
    for (std::size_t j = 0; j < d; ++j) {
        last[j] = level.back();
        for (std::size_t t = 0; t + 1 < level.size(); ++t) level[t] = level[t + 1] - level[t];
        level.pop_back();
    }
    std::vector<double> out;
    out.reserve(diffs.size());
    for (double v : diffs) {
        double value = v;
        for (std::size_t j = d; j-- > 0;) {
            value = last[j] + value;
            last[j] = value;
        }
        out.push_back(value);
    }
    return out;
}

std::vector<double> acf(std::span<const double> series, std::size_t max_lag)
{
    const std::size_t n = series.size();
    if (n <= max_lag + 1)
        throw TimeSeriesError("acf needs more than max_lag + 1 = " + std::to_string(max_lag + 1) + " values");
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    std::vector<double> z(n);
    for (std::size_t t = 0; t < n; ++t) z[t] = series[t] - mean;
    const double c0 = sum_squares(z);
    if (!(c0 > 0.0)) throw TimeSeriesError("acf of a constant series");
    std::vector<double> r(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double c = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) c += z[t] * z[t + k];
        r[k] = c / c0;
    }
    r[0] = 1.0;
    return r;
}

std::vector<double> pacf(std::span<const double> series, std::size_t max_lag)
{
    const auto r = acf(series, max_lag);
    std::vector<double> out(max_lag + 1, 0.0);
    out[0] = 1.0;
    std::vector<double> phi, next;
    double v = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double num = r[k];
        for (std::size_t j = 1; j < k; ++j) num -= phi[j - 1] * r[k - j];
        const double kk = k == 1 ? r[1] : num / v;
        next.assign(k, 0.0);
        for (std::size_t j = 1; j < k; ++j) next[j - 1] = phi[j - 1] - kk * phi[k - j - 1];
        next[k - 1] = kk;
        phi.swap(next);
        v *= 1.0 - kk * kk;
        out[k] = kk;
        if (!(v > 0.0)) break;
    }
    return out;
}

double ArimaModel::aic() const
{
    const double n = static_cast<double>(residuals.size());
    if (n == 0.0 || !(sigma2 > 0.0)) return -std::numeric_limits<double>::infinity();
    return n * std::log(sigma2) + 2.0 * static_cast<double>(p + q + (has_mean ? 1 : 0));
}

nlohmann::json ArimaModel::to_json() const
{
    return {{"p", p},           {"d", d},         {"q", q},
            {"phi", phi},       {"theta", theta}, {"mean", mean},
            {"has_mean", has_mean}, {"sigma2", sigma2}, {"aic", aic()},   {"warnings", warnings}};
}

namespace {

ArimaModel fit_ar_impl(std::span<const double> series, std::size_t p, bool intercept)
{
    const std::size_t n = series.size();
    if (n < 5 * p || n < p + 2)
        throw TimeSeriesError("AR(" + std::to_string(p) + ") needs at least max(5p, p+2) values, got " +
                              std::to_string(n));
    ArimaModel m;
    m.p = p;
    m.has_mean = intercept;
    if (p == 0) {
        m.mean = intercept ? std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n) : 0.0;
        for (double v : series) m.residuals.push_back(v - m.mean);
        m.sigma2 = sum_squares(m.residuals) / static_cast<double>(n);
        return m;
    }
    const auto rows = static_cast<Eigen::Index>(n - p);
    const Eigen::Index off = intercept ? 1 : 0;
    Eigen::MatrixXd X(rows, static_cast<Eigen::Index>(p) + off);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = static_cast<std::size_t>(r) + p;
        y(r) = series[t];
        if (intercept) X(r, 0) = 1.0;
        for (std::size_t i = 1; i <= p; ++i) X(r, static_cast<Eigen::Index>(i) - 1 + off) = series[t - i];
    }
    const Eigen::VectorXd beta = least_squares(X, y);
    for (std::size_t i = 1; i <= p; ++i) m.phi.push_back(beta(static_cast<Eigen::Index>(i) - 1 + off));
    if (intercept) m.mean = process_mean(beta(0), m.phi, series, m);
    const Eigen::VectorXd res = y - X * beta;
    m.residuals.assign(res.data(), res.data() + res.size());
    m.sigma2 = sum_squares(m.residuals) / static_cast<double>(m.residuals.size());
    add_root_warnings(m);
    return m;
}

}  // namespace

ArimaModel fit_ar(std::span<const double> series, std::size_t p)
{
    return fit_ar_impl(series, p, true);
}

std::vector<double> arma_shocks(const ArimaModel& model, std::span<const double> w)
{
    const std::size_t n = w.size(), p = model.p, q = model.q;
    std::vector<double> a(n, 0.0);
    for (std::size_t t = p; t < n; ++t) {
        double v = w[t] - model.mean;
        for (std::size_t i = 1; i <= p; ++i) v -= model.phi[i - 1] * (w[t - i] - model.mean);
        for (std::size_t j = 1; j <= q && j <= t; ++j) v += model.theta[j - 1] * a[t - j];
        a[t] = v;
    }
    return a;
}

namespace {

double css_objective(const ArimaModel& m, std::span<const double> w)
{
    const auto a = arma_shocks(m, w);
    double s = 0.0;
    for (std::size_t t = m.p; t < a.size(); ++t) s += a[t] * a[t];
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

std::vector<double> pack(const ArimaModel& m)
{
    std::vector<double> x{m.mean};
    x.insert(x.end(), m.phi.begin(), m.phi.end());
    x.insert(x.end(), m.theta.begin(), m.theta.end());
    return x;
}

void unpack(ArimaModel& m, const std::vector<double>& x)
{
    m.mean = x[0];
    std::copy_n(x.begin() + 1, m.p, m.phi.begin());
    std::copy_n(x.begin() + 1 + static_cast<std::ptrdiff_t>(m.p), m.q, m.theta.begin());
}

void refine_css(ArimaModel& m, std::span<const double> w, const ArimaOptions& opt)
{
    std::vector<double> x = pack(m);
    double f = css_objective(m, w);
    double step = 1.0;
    ArimaModel probe = m;
    for (std::size_t iter = 0; iter < opt.max_iter; ++iter) {
        std::vector<double> g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            unpack(probe, xp);
            const double fp = css_objective(probe, w);
            unpack(probe, xm);
            const double fm = css_objective(probe, w);
            g[i] = (fp - fm) / (2.0 * h);
        }
        if (!m.has_mean) g[0] = 0.0;
        const double gg = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
        if (!(gg > 0.0) || !std::isfinite(gg)) break;
        bool improved = false;
        double f_new = f;
        std::vector<double> x_new;
        for (int halvings = 0; halvings < 60; ++halvings) {
            x_new = x;
            for (std::size_t i = 0; i < x.size(); ++i) x_new[i] -= step * g[i];
            unpack(probe, x_new);
            f_new = css_objective(probe, w);
            if (f_new <= f - 1e-4 * step * gg) {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
        const double change = f - f_new;
        x = x_new;
        f = f_new;
        step *= 2.0;
        if (change <= opt.tolerance * std::max(1.0, f)) break;
    }
    unpack(m, x);
}

}  // namespace

ArimaModel fit_arima(std::span<const double> series, std::size_t p, std::size_t d, std::size_t q,
                     const ArimaOptions& options)
{
    if (series.size() < d + 5 * (p + q) + 10)
        throw TimeSeriesError("ARIMA(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) +
                              ") needs at least " + std::to_string(d + 5 * (p + q) + 10) + " values, got " +
                              std::to_string(series.size()));
    const auto w = difference(series, static_cast<int>(d));
    const bool with_mean = options.include_mean.value_or(d == 0);
    if (q == 0) {
        ArimaModel m = fit_ar_impl(w, p, with_mean);
        m.d = d;
        return m;
    }

    // Hannan-Rissanen: long-AR residuals stand in for the unobserved shocks.
    const std::size_t n = w.size();
    const std::size_t long_order = std::max(p + q, std::min<std::size_t>(20, n / 10));
    const ArimaModel long_ar = fit_ar_impl(w, long_order, with_mean);
    std::vector<double> e(n, 0.0);
    for (std::size_t t = long_order; t < n; ++t) e[t] = long_ar.residuals[t - long_order];

    const std::size_t start = long_order + q;
    if (n <= start + p + q + 1) throw TimeSeriesError("series too short for the Hannan-Rissanen regression");
    const auto rows = static_cast<Eigen::Index>(n - start);
    const Eigen::Index off = with_mean ? 1 : 0;
    Eigen::MatrixXd X(rows, static_cast<Eigen::Index>(p + q) + off);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = static_cast<std::size_t>(r) + start;
        y(r) = w[t];
        if (with_mean) X(r, 0) = 1.0;
        for (std::size_t i = 1; i <= p; ++i) X(r, static_cast<Eigen::Index>(i) - 1 + off) = w[t - i];
        for (std::size_t j = 1; j <= q; ++j) X(r, static_cast<Eigen::Index>(p + j) - 1 + off) = e[t - j];
    }
    const Eigen::VectorXd beta = least_squares(X, y);

    ArimaModel m;
    m.p = p;
    m.d = d;
    m.q = q;
    m.has_mean = with_mean;
    for (std::size_t i = 1; i <= p; ++i) m.phi.push_back(beta(static_cast<Eigen::Index>(i) - 1 + off));
    for (std::size_t j = 1; j <= q; ++j) m.theta.push_back(-beta(static_cast<Eigen::Index>(p + j) - 1 + off));
    if (with_mean) m.mean = process_mean(beta(0), m.phi, w, m);

    if (options.refine) refine_css(m, w, options);

    const auto a = arma_shocks(m, w);
    m.residuals.assign(a.begin() + static_cast<std::ptrdiff_t>(p), a.end());
    m.sigma2 = sum_squares(m.residuals) / static_cast<double>(m.residuals.size());
    add_root_warnings(m);
    return m;
}

std::vector<double> forecast(const ArimaModel& model, std::span<const double> history, std::size_t h)
{
    const std::size_t need = std::max(model.p, model.q) + model.d;
    if (history.size() < need || history.size() <= model.d)
        throw TimeSeriesError("forecast needs at least " + std::to_string(std::max(need, model.d + 1)) +
                              " history values, got " + std::to_string(history.size()));
    const auto w = difference(history, static_cast<int>(model.d));
    auto a = arma_shocks(model, w);
    std::vector<double> z(w.size());
    for (std::size_t t = 0; t < w.size(); ++t) z[t] = w[t] - model.mean;

    std::vector<double> future;
    future.reserve(h);
    for (std::size_t s = 0; s < h; ++s) {
        const std::size_t t = z.size();
        double v = 0.0;
        for (std::size_t i = 1; i <= model.p; ++i) v += model.phi[i - 1] * z[t - i];
        for (std::size_t j = 1; j <= model.q && j <= t; ++j) v -= model.theta[j - 1] * a[t - j];
        z.push_back(v);
        a.push_back(0.0);
        future.push_back(v + model.mean);
    }
    return undifference(history.subspan(history.size() - model.d), future);
}

nlohmann::json StationarityReport::to_json() const
{
    return {{"trend_slope", trend_slope},
            {"acf_lag1", acf_lag1},
            {"acf_tail_variance", acf_tail_variance},
            {"looks_stationary", looks_stationary}};
}

StationarityReport stationarity_report(std::span<const double> series)
{
    const std::size_t n = series.size();
    if (n < 4) throw TimeSeriesError("stationarity report needs at least 4 values");
    StationarityReport rep;
    const double tn = static_cast<double>(n);
    const double t_mean = (tn - 1.0) / 2.0;
    const double y_mean = std::accumulate(series.begin(), series.end(), 0.0) / tn;
    double sty = 0.0, stt = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        sty += (static_cast<double>(t) - t_mean) * (series[t] - y_mean);
        stt += (static_cast<double>(t) - t_mean) * (static_cast<double>(t) - t_mean);
    }
    rep.trend_slope = sty / stt;
    const std::size_t lags = std::min<std::size_t>(20, n - 2);
    const auto r = acf(series, lags);
    rep.acf_lag1 = r[1];
    double mean = 0.0;
    for (std::size_t k = 1; k <= lags; ++k) mean += r[k];
    mean /= static_cast<double>(lags);
    for (std::size_t k = 1; k <= lags; ++k) rep.acf_tail_variance += (r[k] - mean) * (r[k] - mean);
    rep.acf_tail_variance /= static_cast<double>(lags);
    rep.looks_stationary = rep.acf_lag1 < 0.9;
    return rep;
}

}  // namespace mvts
