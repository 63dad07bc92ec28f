#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mvts/timeseries.hpp"
#include "support.hpp"

using namespace mvts;
using mvts::test::simulate_arma;

namespace {

std::vector<double> random_walk(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> step(0.0, 1.0);
    std::vector<double> x(n);
    double v = 50;
    for (double& e : x) e = v += step(rng);
    return x;
}

}  // namespace

TEST_CASE("difference examples")
{
    CHECK(difference(std::vector<double>{1, 2, 4}, 1) == std::vector<double>{1, 2});
    const std::vector<double> x{3, 1, 4, 1, 5};
    CHECK(difference(x, 0) == x);
    CHECK(difference(std::vector<double>{1, 2, 3, 4, 5}, 1) == std::vector<double>{1, 1, 1, 1});
    CHECK(difference(std::vector<double>{1, 4, 9, 16}, 2) == std::vector<double>{2, 2});
    CHECK_THROWS_AS(difference(std::vector<double>{1, 2}, 2), TimeSeriesError);
}

TEST_CASE("undifference examples")
{
    CHECK(undifference(std::vector<double>{4}, std::vector<double>{1, 1}) == std::vector<double>{5, 6});
    const std::vector<double> d{2, -1, 3};
    CHECK(undifference(std::vector<double>{}, d) == d);
}

TEST_CASE("difference and undifference are exact inverses for d up to 3")
{
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> val(-500, 500), len(4, 60);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> x(static_cast<std::size_t>(len(rng)));
        for (double& v : x) v = val(rng);
        for (int d = 0; d <= 3; ++d) {
            const std::vector<double> head(x.begin(), x.begin() + d);
            auto back = head;
            const auto tail = undifference(head, difference(x, d));
            back.insert(back.end(), tail.begin(), tail.end());
            REQUIRE(back == x);
        }
    }
}

TEST_CASE("acf and pacf")
{
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g;
    std::vector<double> noise(5000);
    for (double& v : noise) v = g(rng);
    const auto r = acf(noise, 10);
    CHECK(r[0] == 1.0);
    const double band = 3.0 / std::sqrt(5000.0);
    for (std::size_t k = 1; k <= 10; ++k) CHECK(std::abs(r[k]) < band);

    const auto ar1 = simulate_arma({0.8}, {}, 5000, 4);
    const auto ra = acf(ar1, 5);
    CHECK(ra[0] == 1.0);
    for (std::size_t k = 1; k <= 5; ++k) CHECK(std::abs(ra[k] - std::pow(0.8, k)) < 0.05);
    const auto pa = pacf(ar1, 5);
    CHECK(std::abs(pa[1] - ra[1]) < 1e-12);
    for (std::size_t k = 2; k <= 5; ++k) CHECK(std::abs(pa[k]) < 0.05);

    CHECK_THROWS_AS(acf(std::vector<double>(20, 3.0), 3), TimeSeriesError);
    CHECK_THROWS_AS(acf(std::vector<double>{1, 2, 3}, 5), TimeSeriesError);
}

TEST_CASE("pacf(1) equals acf(1) on random series")
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(50);
        for (double& v : x) v = g(rng);
        CHECK(std::abs(pacf(x, 3)[1] - acf(x, 3)[1]) < 1e-12);
    }
}

TEST_CASE("AR(2) estimates recover the generating coefficients")
{
    const auto x = simulate_arma({0.5, -0.3}, {}, 2000, 1);
    const ArimaModel m = fit_ar(x, 2);
    REQUIRE(m.phi.size() == 2);
    CHECK(std::abs(m.phi[0] - 0.5) < 0.05);
    CHECK(std::abs(m.phi[1] + 0.3) < 0.05);
    CHECK(m.sigma2 == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("noiseless AR(1) is determined exactly")
{
    std::vector<double> x(20);
    x[0] = 1;
    for (std::size_t t = 1; t < x.size(); ++t) x[t] = 0.5 * x[t - 1];
    const ArimaModel m = fit_ar(x, 1);
    CHECK(std::abs(m.phi[0] - 0.5) < 1e-10);
}

TEST_CASE("AR(0) is mean only")
{
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const ArimaModel m = fit_ar(x, 0);
    CHECK(m.phi.empty());
    CHECK(m.mean == doctest::Approx(5.5));
    REQUIRE(m.residuals.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(m.residuals[i] == doctest::Approx(x[i] - 5.5));
}

TEST_CASE("fit_arima with q = 0 reproduces fit_ar")
{
    const auto x = simulate_arma({0.4, 0.2}, {}, 600, 7);
    const ArimaModel a = fit_ar(x, 2);
    const ArimaModel b = fit_arima(x, 2, 0, 0);
    CHECK(a.phi == b.phi);
    CHECK(a.mean == b.mean);
    CHECK(a.sigma2 == b.sigma2);
}

TEST_CASE("ARMA(1,1) estimates recover the generating coefficients")
{
    const auto x = simulate_arma({0.6}, {0.4}, 4000, 1);
    const ArimaModel m = fit_arima(x, 1, 0, 1);
    CHECK(std::abs(m.phi[0] - 0.6) < 0.08);
    CHECK(std::abs(m.theta[0] - 0.4) < 0.08);
    CHECK(m.warnings.empty());
}

TEST_CASE("ARIMA(1,1,0) on the level series matches AR on the differences")
{
    const auto w = simulate_arma({0.5}, {}, 1500, 3);
    std::vector<double> level(w.size() + 1, 100.0);
    for (std::size_t t = 0; t < w.size(); ++t) level[t + 1] = level[t] + w[t];
    const ArimaModel on_level = fit_arima(level, 1, 1, 0);
    const ArimaModel on_diff = fit_ar(w, 1);
    CHECK(std::abs(on_level.phi[0] - on_diff.phi[0]) < 0.05);
    CHECK(std::abs(on_level.phi[0] - 0.5) < 0.05);
}

TEST_CASE("fit_arima rejects short series")
{
    CHECK_THROWS_AS(fit_arima(simulate_arma({0.5}, {}, 20, 1), 2, 0, 2), TimeSeriesError);
}

TEST_CASE("forecast examples")
{
    ArimaModel ar;
    ar.p = 1;
    ar.phi = {0.5};
    ar.mean = 0;
    ar.has_mean = false;
    const auto f = forecast(ar, std::vector<double>{1, -3, 4}, 3);
    CHECK(f == std::vector<double>{2, 1, 0.5});

    const std::vector<double> noise{2, 4, 6, 8};
    const ArimaModel m0 = fit_arima(std::vector<double>{3, 5, 4, 6, 2, 7, 5, 4, 6, 3, 5, 4}, 0, 0, 0);
    for (double v : forecast(m0, noise, 4)) CHECK(v == doctest::Approx(m0.mean));
    CHECK(m0.mean == doctest::Approx(54.0 / 12));

    const auto rw = random_walk(300, 8);
    const ArimaModel walk = fit_arima(rw, 0, 1, 0);
    CHECK_FALSE(walk.has_mean);
    for (double v : forecast(walk, rw, 5)) CHECK(v == rw.back());

    CHECK_THROWS_AS(forecast(ar, std::vector<double>{}, 2), TimeSeriesError);
}

TEST_CASE("h single steps equal one h-step forecast")
{
    const auto x = simulate_arma({0.6, -0.2}, {0.3}, 800, 12);
    for (std::size_t d : {0u, 1u}) {
        const ArimaModel m = fit_arima(x, 2, d, 1);
        const auto joint = forecast(m, x, 6);
        auto hist = x;
        for (std::size_t s = 0; s < 6; ++s) {
            const double one = forecast(m, hist, 1)[0];
            CHECK(one == doctest::Approx(joint[s]).epsilon(1e-9));
            hist.push_back(one);
        }
    }
}

TEST_CASE("estimated shocks reproduce the series")
{
    const auto x = simulate_arma({0.6}, {0.4}, 500, 2);
    const ArimaModel m = fit_arima(x, 1, 0, 1);
    const auto a = arma_shocks(m, x);
    REQUIRE(a.size() == x.size());
    for (std::size_t t = 1; t < x.size(); ++t) {
        const double rebuilt = m.mean + m.phi[0] * (x[t - 1] - m.mean) + a[t] - m.theta[0] * a[t - 1];
        CHECK(rebuilt == doctest::Approx(x[t]).epsilon(1e-10));
    }
}

TEST_CASE("AIC prefers the generating order")
{
    const auto x = simulate_arma({0.7}, {}, 1000, 5);
    CHECK(fit_arima(x, 1, 0, 0).aic() < fit_arima(x, 0, 0, 0).aic());
}

TEST_CASE("stationarity heuristics")
{
    CHECK(stationarity_report(simulate_arma({0.3}, {}, 500, 1)).looks_stationary);
    CHECK_FALSE(stationarity_report(random_walk(500, 1)).looks_stationary);
    std::vector<double> ramp(100);
    std::iota(ramp.begin(), ramp.end(), 0.0);
    CHECK(stationarity_report(ramp).trend_slope == doctest::Approx(1.0));
}
