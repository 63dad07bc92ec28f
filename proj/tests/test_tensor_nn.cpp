#include <doctest.h>

#include <cstring>
#include <sstream>

#include "gradcheck.hpp"
#include "mvts/checkpoint.hpp"
#include "mvts/optim.hpp"
#include "support.hpp"

using namespace mvts;
using mvts::test::random_tensor;

namespace {

// Direct sliding-window evaluation, independent of the im2col path.
Tensor naive_conv(const Tensor& x, Conv2D& conv)
{
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const Tensor& k = conv.weight().value;
    const std::size_t cout = k.dim(0), oh = h - 2, ow = w - 2;
    Tensor y({n, cout, oh, ow});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    double s = conv.bias().value[o];
                    for (std::size_t c = 0; c < cin; ++c)
                        for (std::size_t di = 0; di < 3; ++di)
                            for (std::size_t dj = 0; dj < 3; ++dj)
                                s += k[((o * cin + c) * 3 + di) * 3 + dj] *
                                     x[((b * cin + c) * h + i + di) * w + j + dj];
                    y[((b * cout + o) * oh + i) * ow + j] = s;
                }
    return y;
}

}  // namespace

TEST_CASE("tensor shape invariants")
{
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.row_size() == 12);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(t.reshaped({5, 5}), std::invalid_argument);
    const Tensor r = t.reshaped({6, 4});
    CHECK(r.shape() == Shape{6, 4});
    Tensor m({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
    const std::vector<std::size_t> idx{2, 0};
    CHECK(m.gather_rows(idx) == Tensor({2, 2}, std::vector<double>{5, 6, 1, 2}));
    CHECK(reinterpret_cast<std::uintptr_t>(m.data()) % 64 == 0);
}

TEST_CASE("conv output size formula matches window enumeration")
{
    CHECK(conv_output_size(6, 3, 1, 0) == 4);
    for (std::size_t in = 3; in < 40; ++in) {
        std::size_t windows = 0;
        for (std::size_t start = 0; start + 3 <= in; ++start) ++windows;
        CHECK(conv_output_size(in, 3, 1, 0) == windows);
    }
    CHECK_THROWS_AS(conv_output_size(2, 3, 1, 0), std::invalid_argument);
}

TEST_CASE("conv forward: 6x6 gives 4x4, zero input, centre filter, naive oracle")
{
    std::mt19937_64 rng(1);
    Conv2D conv(1, 1, Init::he_uniform, rng);
    conv.bias().value.fill(0.0);
    CHECK(conv.forward(Tensor({1, 1, 6, 6})).shape() == Shape{1, 1, 4, 4});
    const Tensor zero = conv.forward(Tensor({1, 1, 6, 6}));
    for (double v : zero.values()) CHECK(v == 0.0);

    conv.weight().value.fill(0.0);
    conv.weight().value[4] = 1.0;  // centre tap
    const Tensor x = random_tensor({1, 1, 6, 6}, rng);
    const Tensor y = conv.forward(x);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(y[i * 4 + j] == x[(i + 1) * 6 + j + 1]);

    Conv2D multi(3, 5, Init::he_uniform, rng);
    for (double& b : multi.bias().value.values()) b = 0.3;
    const Tensor xm = random_tensor({2, 3, 7, 9}, rng);
    const Tensor got = multi.forward(xm), want = naive_conv(xm, multi);
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("shallow-branch shape algebra on 128x128x3")
{
    std::mt19937_64 rng(2);
    Network net;
    std::size_t channels = 3;
    for (int block = 0; block < 3; ++block) {
        net.emplace<Conv2D>(channels, 64, Init::he_uniform, rng);
        net.emplace<ReLU>();
        net.emplace<BatchNorm>(64);
        net.emplace<MaxPool>();
        channels = 64;
    }
    net.emplace<Flatten>();
    CHECK(net.output_shape({1, 3, 128, 128}) == Shape{1, 12544});
}

TEST_CASE("relu and sigmoid definitions")
{
    ReLU r;
    CHECK(r.forward(Tensor({1, 3}, std::vector<double>{-1, 0, 2})) == Tensor({1, 3}, std::vector<double>{0, 0, 2}));
    std::mt19937_64 rng(3);
    Tensor pos = random_tensor({4, 5}, rng, 0.0, 2.0);
    CHECK(r.forward(pos) == pos);
    CHECK(std::isnan(r.forward(Tensor({1, 1}, std::nan("")))[0]));

    Sigmoid s;
    CHECK(s.forward(Tensor({1, 1}, 0.0))[0] == 0.5);
    const Tensor x = random_tensor({1, 200}, rng, -30.0, 30.0);
    Tensor neg = x;
    for (double& v : neg.values()) v = -v;
    const Tensor a = s.forward(x);
    Sigmoid s2;
    const Tensor b = s2.forward(neg);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a[i] + b[i] - 1.0) <= 1e-12);
        CHECK((a[i] > 0.0 && a[i] < 1.0));
    }
}

TEST_CASE("relu derivative is 0 below and 1 above zero")
{
    ReLU r;
    Tensor x({1, 2}, std::vector<double>{-0.7, 0.9});
    r.forward(x);
    const Tensor g = r.backward(Tensor({1, 2}, 1.0));
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 1.0);
    for (int i = 0; i < 2; ++i) {
        Tensor up = x, down = x;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double fd = (ReLU().forward(up)[i] - ReLU().forward(down)[i]) / 2e-6;
        CHECK(fd == doctest::Approx(g[i]).epsilon(1e-9));
    }
}

TEST_CASE("maxpool windows, constant input, odd sizes and first-occurrence ties")
{
    MaxPool mp;
    Tensor x({1, 1, 4, 4}, std::vector<double>{1, 3, 2, 0, 4, 2, 1, 1, 0, 0, 5, 6, 7, 1, 2, 3});
    CHECK(mp.forward(x) == Tensor({1, 1, 2, 2}, std::vector<double>{4, 2, 7, 6}));
    CHECK(MaxPool().forward(Tensor({1, 2, 6, 6}, 2.5)) == Tensor({1, 2, 3, 3}, 2.5));
    CHECK(MaxPool().output_shape({1, 1, 5, 7}) == Shape{1, 1, 2, 3});

    MaxPool tie;
    tie.forward(Tensor({1, 1, 2, 2}, 1.0));
    const Tensor g = tie.backward(Tensor({1, 1, 1, 1}, 1.0));
    CHECK(g == Tensor({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 0}));
}

TEST_CASE("batchnorm moments in train mode, affine arithmetic and eval determinism")
{
    std::mt19937_64 rng(4);
    BatchNorm bn(3);
    const Tensor x = random_tensor({8, 3, 4, 4}, rng, -5.0, 9.0);
    const Tensor y = bn.forward(x);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        const std::size_t m = 8 * 16;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t k = 0; k < 16; ++k) mean += y[(b * 3 + c) * 16 + k];
        mean /= m;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t k = 0; k < 16; ++k) var += std::pow(y[(b * 3 + c) * 16 + k] - mean, 2);
        var /= m;
        CHECK(std::abs(mean) < 1e-9);
        // Epsilon 1e-5 shifts the variance by eps / (var + eps), about 6e-7 here.
        CHECK(std::abs(var - 1.0) < 1e-6);
    }

    BatchNorm affine(2);
    affine.gamma().value.fill(2.0);
    affine.beta().value.fill(3.0);
    const Tensor z = affine.forward(random_tensor({500, 2}, rng, 10.0, 20.0));
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t b = 0; b < 500; ++b) mean += z.at(b, c);
        mean /= 500;
        for (std::size_t b = 0; b < 500; ++b) var += std::pow(z.at(b, c) - mean, 2);
        var /= 500;
        CHECK(mean == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(4.0).epsilon(1e-3));
    }

    bn.set_mode(Mode::eval);
    const Tensor probe = random_tensor({1, 3, 4, 4}, rng);
    CHECK(bn.forward(probe) == bn.forward(probe));
    CHECK_THROWS_AS([] {
        BatchNorm one(2);
        one.forward(Tensor({1, 2}, 1.0));
    }(), std::invalid_argument);
}

TEST_CASE("dense identity, constant map and shape errors")
{
    std::mt19937_64 rng(5);
    Dense d(3, 3, Init::xavier_uniform, rng);
    d.weight().value.fill(0.0);
    for (int i = 0; i < 3; ++i) d.weight().value[i * 3 + i] = 1.0;
    d.bias().value.fill(0.0);
    const Tensor x = random_tensor({2, 3}, rng);
    CHECK(d.forward(x) == x);
    d.weight().value.fill(0.0);
    d.bias().value.fill(1.5);
    CHECK(d.forward(x) == Tensor({2, 3}, 1.5));
    CHECK_THROWS_AS(d.forward(Tensor({2, 4})), std::invalid_argument);
}

TEST_CASE("backward before forward is an error; linear passes gradients through; gradients accumulate")
{
    std::mt19937_64 rng(6);
    Dense d(2, 2, Init::he_uniform, rng);
    CHECK_THROWS_AS(d.backward(Tensor({1, 2}, 1.0)), std::logic_error);

    LinearActivation lin;
    const Tensor x = random_tensor({3, 2}, rng);
    lin.forward(x);
    const Tensor g = random_tensor({3, 2}, rng);
    CHECK(lin.backward(g) == g);

    Network net;
    net.emplace<Dense>(2, 1, Init::he_uniform, rng);
    net.zero_grad();
    net.forward(x);
    net.backward(Tensor({3, 1}, 1.0));
    const Tensor once = net.parameters()[0]->grad;
    net.forward(x);
    net.backward(Tensor({3, 1}, 1.0));
    const Tensor twice = net.parameters()[0]->grad;
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-15));
}

TEST_CASE("dropout: p = 0 and eval are identity, train preserves the mean")
{
    std::mt19937_64 rng(7);
    const Tensor x = random_tensor({4, 50}, rng);
    Dropout none(0.0, 1);
    CHECK(none.forward(x) == x);
    Dropout half(0.5, 1);
    half.set_mode(Mode::eval);
    CHECK(half.forward(x) == x);

    Dropout train(0.5, 9);
    const Tensor ones({1, 200000}, 1.0);
    const Tensor y = train.forward(ones);
    double mean = 0.0;
    std::size_t zeros = 0;
    for (double v : y.values()) {
        mean += v;
        zeros += v == 0.0;
        CHECK((v == 0.0 || v == 2.0));
    }
    mean /= static_cast<double>(y.size());
    CHECK(std::abs(mean - 1.0) < 0.05);
    CHECK(zeros > 90000);
    CHECK_THROWS_AS(Dropout(1.0, 1), std::invalid_argument);
}

TEST_CASE("adam: zero gradient is a fixed point, quadratic converges, runs are reproducible")
{
    Parameter p({1});
    p.value[0] = 0.7;
    Adam still({&p});
    p.grad.fill(0.0);
    for (int i = 0; i < 10; ++i) still.step();
    CHECK(p.value[0] == 0.7);

    const auto run = [] {
        Parameter x({1});
        Adam opt({&x}, {.learning_rate = 0.1});
        for (int i = 0; i < 500; ++i) {
            x.grad[0] = 2.0 * (x.value[0] - 3.0);
            opt.step();
        }
        return x.value[0];
    };
    const double a = run();
    CHECK(std::abs(a - 3.0) < 1e-3);
    CHECK(run() == a);
}

TEST_CASE("adam rate scales divide the first step")
{
    Parameter a({1}), b({1});
    Adam opt({&a, &b}, {.learning_rate = 0.01});
    opt.set_rate_scales({1.0, 0.25});
    a.grad[0] = b.grad[0] = 5.0;
    opt.step();
    // The first bias-corrected Adam step has magnitude lr regardless of the gradient scale.
    CHECK(a.value[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(b.value[0] == doctest::Approx(-0.0025).epsilon(1e-6));
    CHECK_THROWS_AS(opt.set_rate_scales({1.0}), std::invalid_argument);
}

TEST_CASE("sgd moves against the gradient")
{
    Parameter p({2});
    p.value[0] = 1.0;
    p.value[1] = -1.0;
    p.grad[0] = 2.0;
    p.grad[1] = -4.0;
    Sgd({&p}, 0.5).step();
    CHECK(p.value[0] == 0.0);
    CHECK(p.value[1] == 1.0);
}

TEST_CASE("checkpoint round trip, header layout and mismatch errors")
{
    std::mt19937_64 rng(8);
    const auto build = [](std::mt19937_64& r) {
        Network n;
        n.emplace<Conv2D>(1, 2, Init::he_uniform, r);
        n.emplace<BatchNorm>(2);
        n.emplace<Flatten>();
        n.emplace<Dense>(8, 1, Init::xavier_uniform, r);
        return n;
    };
    Network a = build(rng);
    a.forward(random_tensor({3, 1, 4, 4}, rng));  // moves BatchNorm running statistics
    std::stringstream buf;
    const auto la = a.layers();
    write_checkpoint(buf, la);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 5) == "MVTS1");
    std::uint64_t count = 0;
    std::memcpy(&count, bytes.data() + 5, 8);
    CHECK(count == 4);

    std::mt19937_64 other(99);
    Network b = build(other);
    const auto lb = b.layers();
    std::stringstream in(bytes);
    read_checkpoint(in, lb);
    const auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
    CHECK(static_cast<BatchNorm&>(b.layer(1)).running_mean() == static_cast<BatchNorm&>(a.layer(1)).running_mean());

    Network c;
    c.emplace<Dense>(8, 1, Init::xavier_uniform, other);
    const auto lc = c.layers();
    std::stringstream in2(bytes);
    CHECK_THROWS_AS(read_checkpoint(in2, lc), CheckpointError);
    std::stringstream junk("NOPE!");
    CHECK_THROWS_AS(read_checkpoint(junk, lb), CheckpointError);
    std::stringstream cut(bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(read_checkpoint(cut, lb), CheckpointError);
}

TEST_CASE("fixed seeds give bit-identical forward and backward passes")
{
    const auto run = [] {
        std::mt19937_64 rng(21);
        Network n;
        n.emplace<Conv2D>(3, 4, Init::he_uniform, rng);
        n.emplace<ReLU>();
        n.emplace<BatchNorm>(4);
        n.emplace<MaxPool>();
        n.emplace<Flatten>();
        n.emplace<Dense>(64, 2, Init::he_uniform, rng);
        const Tensor x = random_tensor({3, 3, 10, 10}, rng);
        const Tensor y = n.forward(x);
        n.zero_grad();
        n.backward(Tensor(y.shape(), 1.0));
        std::vector<Tensor> out{y};
        for (Parameter* p : n.parameters()) out.push_back(p->grad);
        return out;
    };
    CHECK(run() == run());
}
