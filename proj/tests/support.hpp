#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace mvts::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mvts_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline double rel_diff(double a, double b)
{
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

/// ARMA path y(t) = sum phi_i y(t-i) + a(t) - sum theta_j a(t-j) with N(0,1) shocks,
/// after a 500-step burn-in from zeros.
inline std::vector<double> simulate_arma(const std::vector<double>& phi, const std::vector<double>& theta,
                                         std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> shock(0.0, 1.0);
    const std::size_t burn = 500, total = n + burn;
    std::vector<double> y(total, 0.0), a(total, 0.0);
    for (std::size_t t = 0; t < total; ++t) {
        a[t] = shock(rng);
        double v = a[t];
        for (std::size_t i = 0; i < phi.size(); ++i)
            if (t > i) v += phi[i] * y[t - i - 1];
        for (std::size_t j = 0; j < theta.size(); ++j)
            if (t > j) v -= theta[j] * a[t - j - 1];
        y[t] = v;
    }
    return {y.begin() + static_cast<std::ptrdiff_t>(burn), y.end()};
}

/// Minimum of 1/2 w^2 + C sum max(0, |w x_i + b - y_i| - eps) over the grid
/// [-5, 5]^2 at step 1e-3. The objective is convex in b, so each column of the grid is
/// scanned by discrete ternary search instead of exhaustively.
inline double svr_grid_minimum(const std::vector<double>& x, const std::vector<double>& y, double eps, double C)
{
    constexpr long steps = 10000;
    const auto at = [](long i) { return -5.0 + 1e-3 * static_cast<double>(i); };
    const auto f = [&](double w, double b) {
        double s = 0.5 * w * w, slack = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) slack += std::max(0.0, std::abs(w * x[i] + b - y[i]) - eps);
        return s + C * slack;
    };
    double best = std::numeric_limits<double>::infinity();
    for (long iw = 0; iw <= steps; ++iw) {
        const double w = at(iw);
        long lo = 0, hi = steps;
        while (hi - lo > 2) {
            const long m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
            if (f(w, at(m1)) <= f(w, at(m2)))
                hi = m2;
            else
                lo = m1;
        }
        for (long ib = lo; ib <= hi; ++ib) best = std::min(best, f(w, at(ib)));
    }
    return best;
}

}  // namespace mvts::test
