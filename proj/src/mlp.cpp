#include "mvts/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mvts/optim.hpp"

namespace mvts {

namespace {

void check_training_data(const Tensor& X, std::span<const double> y)
{
    if (X.rank() != 2 || X.empty()) throw BaselineError("training features must be a nonempty n x d matrix");
    if (X.dim(0) != y.size())
        throw BaselineError("feature rows (" + std::to_string(X.dim(0)) + ") and targets (" +
                            std::to_string(y.size()) + ") differ");
}

}  // namespace

nlohmann::json BpConfig::to_json() const
{
    return {{"hidden", hidden}, {"epochs", epochs}, {"learning_rate", learning_rate}, {"seed", seed}};
}

nlohmann::json AnnConfig::to_json() const
{
    return {{"hidden", hidden},
            {"epochs", epochs},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"seed", seed}};
}

Network build_bp(std::size_t input_width, const BpConfig& config)
{
    if (config.hidden < 1) throw BaselineError("BP needs at least one hidden unit");
    if (input_width < 1) throw BaselineError("BP needs at least one input feature");
    std::mt19937_64 rng(config.seed);
    Network net;
    net.emplace<Dense>(input_width, config.hidden, Init::xavier_uniform, rng);
    net.emplace<Sigmoid>();
    net.emplace<Dense>(config.hidden, 1, Init::xavier_uniform, rng);
    net.emplace<Sigmoid>();
    net.set_input_grad(false);
    return net;
}

Network build_ann(std::size_t input_width, const AnnConfig& config)
{
    if (input_width < 1) throw BaselineError("ANN needs at least one input feature");
    std::mt19937_64 rng(config.seed);
    Network net;
    std::size_t width = input_width;
    for (std::size_t h : config.hidden) {
        if (h < 1) throw BaselineError("ANN hidden widths must be at least 1");
        net.emplace<Dense>(width, h, Init::he_uniform, rng);
        net.emplace<ReLU>();
        width = h;
    }
    net.emplace<Dense>(width, 1, Init::xavier_uniform, rng);
    net.emplace<LinearActivation>();
    net.set_input_grad(false);
    return net;
}

double half_squared_error_step(Network& net, const Tensor& X, std::span<const double> y)
{
    const Tensor out = net.forward(X);
    const double n = static_cast<double>(y.size());
    Tensor grad(out.shape());
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = out[i] - y[i];
        loss += 0.5 * e * e;
        grad[i] = e / n;
    }
    net.backward(grad);
    return loss / n;
}

double squared_error_step(Network& net, const Tensor& X, std::span<const double> y)
{
    const Tensor out = net.forward(X);
    const double n = static_cast<double>(y.size());
    Tensor grad(out.shape());
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = out[i] - y[i];
        loss += e * e;
        grad[i] = 2.0 * e / n;
    }
    net.backward(grad);
    return loss / n;
}

BaselineModel fit_bp(const Tensor& X, std::span<const double> y_norm, const BpConfig& config)
{
    check_training_data(X, y_norm);
    for (std::size_t i = 0; i < y_norm.size(); ++i)
        if (!(y_norm[i] > 0.0 && y_norm[i] < 1.0))
            throw BaselineError("BP targets must lie strictly inside (0, 1); target " + std::to_string(i) + " is " +
                                std::to_string(y_norm[i]));
    BaselineModel model{build_bp(X.dim(1), config), X.dim(1), {}};
    Sgd sgd(model.network.parameters(), config.learning_rate);
    model.network.set_mode(Mode::train);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        model.network.zero_grad();
        const double loss = half_squared_error_step(model.network, X, y_norm);
        if (!std::isfinite(loss)) throw BaselineError("BP loss diverged at epoch " + std::to_string(epoch + 1));
        model.loss_history.push_back(loss);
        sgd.step();
    }
    model.network.set_mode(Mode::eval);
    return model;
}

BaselineModel fit_ann(const Tensor& X, std::span<const double> y_norm, const AnnConfig& config)
{
    check_training_data(X, y_norm);
    if (config.batch_size < 1) throw BaselineError("ANN batch size must be positive");
    BaselineModel model{build_ann(X.dim(1), config), X.dim(1), {}};
    AdamOptions opts;
    opts.learning_rate = config.learning_rate;
    Adam adam(model.network.parameters(), opts);
    model.network.set_mode(Mode::train);

    const std::size_t n = X.dim(0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config.seed ^ 0x5bd1e995ull);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            std::vector<double> yb;
            for (std::size_t r : rows) yb.push_back(y_norm[r]);
            model.network.zero_grad();
            const double loss = squared_error_step(model.network, X.gather_rows(rows), yb);
            if (!std::isfinite(loss)) throw BaselineError("ANN loss diverged at epoch " + std::to_string(epoch + 1));
            total += loss * static_cast<double>(rows.size());
            adam.step();
        }
        model.loss_history.push_back(total / static_cast<double>(n));
    }
    model.network.set_mode(Mode::eval);
    return model;
}

std::vector<double> predict_baseline(BaselineModel& model, const Tensor& X, const PriceScaler& price_scaler)
{
    if (X.rank() != 2 || X.dim(1) != model.input_width)
        throw BaselineError("baseline expects " + std::to_string(model.input_width) + " input features, got " +
                            shape_string(X.shape()));
    const Mode previous = model.network.mode();
    model.network.set_mode(Mode::eval);
    const Tensor out = model.network.forward(X);
    model.network.set_mode(previous);
    std::vector<double> prices(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) prices[i] = price_scaler.inverse(out[i]);
    return prices;
}

Tensor tabular_features(const EncodedDataset& data)
{
    if (data.deep.empty()) return data.text;
    const std::size_t n = data.rows(), dt = data.text.dim(1), dd = data.deep.dim(1);
    Tensor out({n, dt + dd});
    for (std::size_t i = 0; i < n; ++i) {
        auto dst = out.row(i);
        std::copy(data.text.row(i).begin(), data.text.row(i).end(), dst.begin());
        std::copy(data.deep.row(i).begin(), data.deep.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(dt));
    }
    return out;
}

}  // namespace mvts
