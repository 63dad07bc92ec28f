#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mvts/svr.hpp"
#include "support.hpp"

using namespace mvts;
using mvts::test::svr_grid_minimum;

namespace {

Tensor column(const std::vector<double>& x)
{
    Tensor t({x.size(), 1});
    std::copy(x.begin(), x.end(), t.values().begin());
    return t;
}

struct Instance {
    std::vector<double> x, y;
};

Instance random_instance(std::mt19937_64& rng, std::size_t n = 5)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Instance in;
    for (std::size_t i = 0; i < n; ++i) {
        in.x.push_back(u(rng));
        in.y.push_back(u(rng));
    }
    return in;
}

}  // namespace

TEST_CASE("objective definition")
{
    const Tensor X = column({0.0, 1.0});
    const std::vector<double> y{1.0, 0.0};
    const std::vector<double> w{2.0};
    // residuals 2*0+0.5-1 = -0.5 and 2+0.5-0 = 2.5; slack 0.4 and 2.4.
    CHECK(svr_objective(w, 0.5, X, y, 0.1, 3.0) == doctest::Approx(0.5 * 4 + 3.0 * 2.8));
}

TEST_CASE("constant targets converge to the trivial optimum")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    Tensor X({40, 3});
    for (double& v : X.values()) v = u(rng);
    for (double eps : {0.0, 0.05}) {
        const std::vector<double> y(40, 0.7);
        const SvrModel m = fit_svr(X, y, {.epsilon = eps});
        double norm = 0;
        for (double wi : m.w) norm += wi * wi;
        CHECK(std::sqrt(norm) < 1e-3);
        CHECK(std::abs(m.b - 0.7) < 1e-3);
        CHECK(m.objective < 1e-3);
    }
}

TEST_CASE("exact line lies inside the tube")
{
    std::vector<double> x, y;
    for (int i = 0; i <= 20; ++i) {
        x.push_back(i / 20.0);
        y.push_back(2 * x.back() + 1);
    }
    const Tensor X = column(x);
    const SvrModel m = fit_svr(X, y, {.epsilon = 0.1});
    const auto pred = predict_svr(m, X);
    double loss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        loss += std::max(0.0, std::abs(pred[i] - y[i]) - 0.1);
        CHECK(std::abs(pred[i] - y[i]) < 0.15);
    }
    CHECK(loss < 1e-4);
}

TEST_CASE("ternary grid scan agrees with an exhaustive grid")
{
    std::mt19937_64 rng(99);
    const Instance in = random_instance(rng);
    double brute = std::numeric_limits<double>::infinity();
    for (long iw = 0; iw <= 10000; iw += 1) {
        const double w = -5.0 + 1e-3 * static_cast<double>(iw);
        for (long ib = 0; ib <= 10000; ++ib) {
            const double b = -5.0 + 1e-3 * static_cast<double>(ib);
            double s = 0;
            for (std::size_t i = 0; i < 5; ++i) s += std::max(0.0, std::abs(w * in.x[i] + b - in.y[i]) - 0.05);
            brute = std::min(brute, 0.5 * w * w + 10.0 * s);
        }
    }
    CHECK(svr_grid_minimum(in.x, in.y, 0.05, 10.0) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("5-point instances reach the grid optimum within 1e-3")
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 10; ++t) {
        const Instance in = random_instance(rng);
        const SvrModel m = fit_svr(column(in.x), in.y, {.seed = static_cast<std::uint64_t>(t + 1)});
        const double grid = svr_grid_minimum(in.x, in.y, m.epsilon, m.C);
        INFO("instance " << t << ": solver " << m.objective << ", grid " << grid);
        CHECK(m.objective <= grid + 1e-3);
        CHECK(m.objective == doctest::Approx(svr_objective(m.w, m.b, column(in.x), in.y, m.epsilon, m.C)));
    }
}

TEST_CASE("duplicating a point moves the optimum by at most one point's loss")
{
    std::mt19937_64 rng(17);
    for (int t = 0; t < 5; ++t) {
        Instance in = random_instance(rng, 4);
        const double base = svr_grid_minimum(in.x, in.y, 0.05, 1.0);
        in.x.push_back(in.x[0]);
        in.y.push_back(in.y[0]);
        const double dup = svr_grid_minimum(in.x, in.y, 0.05, 1.0);
        // The added term is nonnegative and at most C times the slack of that point at
        // the old optimum, itself bounded by the worst slack over the box.
        CHECK(dup >= base);
        const SvrModel m = fit_svr(column(in.x), in.y, {.C = 1.0});
        CHECK(m.objective <= dup + 1e-3);
        CHECK(dup - base <= 1.0 * (1.0 + 5.0 + 5.0));
    }
}

TEST_CASE("never worse than the median model and trace is nonincreasing")
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    Tensor X({60, 4});
    for (double& v : X.values()) v = u(rng);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) y[i] = 0.3 * X.at(i, 0) - 0.2 * X.at(i, 3) + 0.5 + 0.1 * u(rng);
    const SvrModel m = fit_svr(X, y, {.max_iter = 5000});
    auto sorted = y;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[29] + sorted[30]);
    const std::vector<double> zero(4, 0.0);
    CHECK(m.objective <= svr_objective(zero, median, X, y, m.epsilon, m.C) + 1e-12);
    REQUIRE(m.objective_trace.size() >= 2);
    for (std::size_t k = 1; k < m.objective_trace.size(); ++k)
        CHECK(m.objective_trace[k] <= m.objective_trace[k - 1] + 1e-6);
}

TEST_CASE("deterministic under a fixed seed")
{
    std::mt19937_64 rng(3);
    const Instance in = random_instance(rng, 30);
    const SvrModel a = fit_svr(column(in.x), in.y, {.max_iter = 2000, .seed = 5});
    const SvrModel b = fit_svr(column(in.x), in.y, {.max_iter = 2000, .seed = 5});
    CHECK(a.w == b.w);
    CHECK(a.b == b.b);
    CHECK(a.objective_trace == b.objective_trace);
}

TEST_CASE("prediction is affine and checks shapes")
{
    SvrModel c;
    c.w = {0.0, 0.0};
    c.b = 4.2;
    CHECK(predict_svr(c, std::vector<double>{1.0, -3.0}) == 4.2);

    SvrModel m;
    m.w = {0.3, -1.7, 2.2};
    m.b = 0.4;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x1(3), x2(3), mix(3);
        const double a = u(rng);
        for (std::size_t i = 0; i < 3; ++i) {
            x1[i] = u(rng);
            x2[i] = u(rng);
            mix[i] = a * x1[i] + (1 - a) * x2[i];
        }
        CHECK(std::abs(predict_svr(m, mix) - (a * predict_svr(m, x1) + (1 - a) * predict_svr(m, x2))) < 1e-12);
    }
    CHECK_THROWS_AS(predict_svr(m, std::vector<double>{1.0}), SvrError);
}

TEST_CASE("input validation and JSON round trip")
{
    CHECK_THROWS_AS(fit_svr(column({0.5}), std::vector<double>{}), SvrError);
    Tensor X = column({0.1, std::nan(""), 0.3});
    CHECK_THROWS_AS(fit_svr(X, std::vector<double>{1, 2, 3}), SvrError);
    CHECK_THROWS_AS(fit_svr(column({0.1, 0.2}), std::vector<double>{1, 2}, {.C = 0.0}), SvrError);
    CHECK_THROWS_AS(fit_svr(column({0.1, 0.2}), std::vector<double>{1, 2}, {.epsilon = -1}), SvrError);

    std::mt19937_64 rng(2);
    const Instance in = random_instance(rng, 10);
    const SvrModel m = fit_svr(column(in.x), in.y, {.max_iter = 500});
    const SvrModel back = SvrModel::from_json(m.to_json());
    CHECK(back.w == m.w);
    CHECK(back.b == m.b);
    CHECK(back.epsilon == m.epsilon);
    CHECK(back.C == m.C);
}
