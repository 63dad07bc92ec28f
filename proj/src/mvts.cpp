#include "mvts/mvts.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "mvts/checkpoint.hpp"
#include "mvts/optim.hpp"
#include "mvts/text_io.hpp"

namespace mvts {

namespace {

constexpr std::uint64_t deep_stream = 0x6a09e667f3bcc908ull;
constexpr std::uint64_t shallow_stream = 0xbb67ae8584caa73bull;
constexpr std::uint64_t text_stream = 0x3c6ef372fe94f82bull;
constexpr std::uint64_t head_stream = 0xa54ff53a5f1d36f1ull;
constexpr std::uint64_t holdout_stream = 0x510e527fade682d1ull;
constexpr std::uint64_t shuffle_stream = 0x9b05688c2b3e6c1full;

double sign(double v)
{
    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

void check_loss_inputs(std::span<const double> y, std::span<const double> y_pred)
{
    if (y.empty()) throw ModelError("loss of empty vectors");
    if (y.size() != y_pred.size()) throw ModelError("loss length mismatch");
    for (double v : y)
        if (!(v > 0.0)) throw ModelError("loss needs strictly positive targets");
}

// Shifts the bias of each Dense layer that feeds a ReLU so its smallest output on `x` is 0.
Tensor prime_stack(Network& net, Tensor x)
{
    for (std::size_t i = 0; i < net.size(); ++i) {
        Layer& layer = net.layer(i);
        x = layer.forward(std::move(x));
        const bool feeds_relu = i + 1 < net.size() && net.layer(i + 1).kind() == LayerKind::relu;
        if (layer.kind() != LayerKind::dense || !feeds_relu) continue;
        auto& bias = static_cast<Dense&>(layer).bias().value;
        for (std::size_t j = 0; j < x.dim(1); ++j) {
            double lowest = x.at(0, j);
            for (std::size_t r = 1; r < x.dim(0); ++r) lowest = std::min(lowest, x.at(r, j));
            if (lowest >= 0.0) continue;
            bias[j] -= lowest;
            for (std::size_t r = 0; r < x.dim(0); ++r) x.at(r, j) -= lowest;
        }
    }
    return x;
}

std::vector<double> fan_in_rate_scales(const std::vector<Parameter*>& params, double reference)
{
    std::vector<double> scales;
    for (const Parameter* p : params) {
        const Tensor& v = p->value;
        const double fan_in = v.rank() >= 2 ? static_cast<double>(v.size() / v.dim(0)) : 1.0;
        scales.push_back(std::min(1.0, reference / fan_in));
    }
    return scales;
}

}  // namespace

// ---------------------------------------------------------------- config

std::string BranchSet::label() const
{
    if (count() == 3) return "MVTs";
    std::vector<std::string> parts;
    if (deep) parts.push_back("deep");
    if (shallow) parts.push_back("shallow");
    if (text) parts.push_back("text");
    if (parts.size() == 1) return parts[0] + "-only";
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : "+") + p;
    return out.empty() ? "none" : out;
}

BranchSet BranchSet::parse(const std::string& spec)
{
    if (spec == "all" || spec == "MVTs") return {};
    BranchSet b{false, false, false};
    std::string token;
    auto flush = [&] {
        if (token == "deep")
            b.deep = true;
        else if (token == "shallow")
            b.shallow = true;
        else if (token == "text")
            b.text = true;
        else
            throw ModelError("unknown branch '" + token + "' (expected deep, shallow, text or all)");
        token.clear();
    };
    for (char c : spec) {
        if (c == ',' || c == '+')
            flush();
        else if (c != ' ')
            token += c;
    }
    flush();
    return b;
}

std::string to_string(LossMode mode)
{
    switch (mode) {
    case LossMode::combined: return "combined";
    case LossMode::mape_only: return "L_M";
    case LossMode::mean_only: return "L_A";
    }
    return "?";
}

LossMode parse_loss_mode(const std::string& text)
{
    if (text == "combined") return LossMode::combined;
    if (text == "L_M" || text == "mape_only") return LossMode::mape_only;
    if (text == "L_A" || text == "mean_only") return LossMode::mean_only;
    throw ModelError("unknown loss mode '" + text + "' (expected combined, L_M or L_A)");
}

void MvtsConfig::validate() const
{
    if (branches.count() == 0) throw ModelError("at least one branch must be enabled");
    if (!(alpha >= 0.0)) throw ModelError("alpha must be nonnegative");
    if (epochs < 1) throw ModelError("epochs must be at least 1");
    if (batch_size < 1) throw ModelError("batch size must be positive");
    if (branches.shallow && batch_size < 2) throw ModelError("batch normalisation needs batch size >= 2");
    if (!(learning_rate > 0.0)) throw ModelError("learning rate must be positive");
    if (patience < 1) throw ModelError("patience must be at least 1");
    if (!(lr_fan_in >= 0.0)) throw ModelError("lr_fan_in must be nonnegative");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ModelError("validation fraction must lie in [0, 1)");
    if (image_side < 2 || image_side % 2 != 0) throw ModelError("image side must be even");
}

nlohmann::json MvtsConfig::to_json() const
{
    std::string b;
    if (branches.deep) b += "deep";
    if (branches.shallow) b += b.empty() ? "shallow" : ",shallow";
    if (branches.text) b += b.empty() ? "text" : ",text";
    nlohmann::json j = {{"alpha", alpha},
                        {"image_side", image_side},
                        {"epochs", epochs},
                        {"batch_size", batch_size},
                        {"learning_rate", learning_rate},
                        {"seed", seed},
                        {"branches", b},
                        {"loss", to_string(loss)},
                        {"patience", patience},
                        {"validation_fraction", validation_fraction},
                        {"lr_fan_in", lr_fan_in},
                        {"normalize_targets", normalize_targets}};
    j["target_loss"] = target_loss ? nlohmann::json(*target_loss) : nlohmann::json(nullptr);
    return j;
}

MvtsConfig MvtsConfig::from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw ModelError("model config must be a JSON object");
    MvtsConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "alpha")
                c.alpha = v.get<double>();
            else if (key == "image_side")
                c.image_side = v.get<std::size_t>();
            else if (key == "epochs")
                c.epochs = v.get<std::size_t>();
            else if (key == "batch_size")
                c.batch_size = v.get<std::size_t>();
            else if (key == "learning_rate")
                c.learning_rate = v.get<double>();
            else if (key == "seed")
                c.seed = v.get<std::uint64_t>();
            else if (key == "branches")
                c.branches = BranchSet::parse(v.get<std::string>());
            else if (key == "loss")
                c.loss = parse_loss_mode(v.get<std::string>());
            else if (key == "patience")
                c.patience = v.get<std::size_t>();
            else if (key == "validation_fraction")
                c.validation_fraction = v.get<double>();
            else if (key == "lr_fan_in")
                c.lr_fan_in = v.get<double>();
            else if (key == "normalize_targets")
                c.normalize_targets = v.get<bool>();
            else if (key == "target_loss")
                c.target_loss = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            else
                throw ModelError("unknown model config key '" + key + "'");
        } catch (const nlohmann::json::exception&) {
            throw ModelError("model config key '" + key + "' has the wrong type");
        }
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------- loss

LossValue loss_combined(std::span<const double> y, std::span<const double> y_pred, double alpha)
{
    check_loss_inputs(y, y_pred);
    const double n = static_cast<double>(y.size());
    LossValue v;
    double sum_y = 0.0, sum_p = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        v.mape_term += std::abs((y[i] - y_pred[i]) / y[i]);
        sum_y += y[i];
        sum_p += y_pred[i];
    }
    v.mape_term /= n;
    const double mean_y = sum_y / n;
    v.mean_term = std::abs(mean_y - sum_p / n) / mean_y;
    v.total = v.mape_term + alpha * v.mean_term;
    return v;
}

double objective(const LossValue& value, double alpha, LossMode mode)
{
    switch (mode) {
    case LossMode::combined: return value.mape_term + alpha * value.mean_term;
    case LossMode::mape_only: return value.mape_term;
    case LossMode::mean_only: return value.mean_term;
    }
    return value.total;
}

LossValue loss_with_gradient(std::span<const double> y, std::span<const double> y_pred, double alpha, LossMode mode,
                             std::span<double> grad)
{
    LossValue v = loss_combined(y, y_pred, alpha);
    if (grad.size() != y.size()) throw ModelError("gradient buffer has the wrong length");
    const double n = static_cast<double>(y.size());
    double sum_y = 0.0, sum_p = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sum_y += y[i];
        sum_p += y_pred[i];
    }
    const double mean_y = sum_y / n;
    const double mean_weight = mode == LossMode::mape_only ? 0.0 : (mode == LossMode::mean_only ? 1.0 : alpha);
    const double mape_weight = mode == LossMode::mean_only ? 0.0 : 1.0;
    const double g_mean = sign(sum_p / n - mean_y) / (n * mean_y);
    for (std::size_t i = 0; i < y.size(); ++i)
        grad[i] = mape_weight * sign(y_pred[i] - y[i]) / (n * y[i]) + mean_weight * g_mean;
    v.total = objective(v, alpha, mode);
    return v;
}

// ---------------------------------------------------------------- network

MvtsNetwork::MvtsNetwork(const MvtsConfig& config, std::size_t text_width, std::size_t deep_width)
    : branches_(config.branches), text_width_(text_width), deep_width_(deep_width), image_side_(config.image_side)
{
    config.validate();
    if (branches_.text && text_width < 1) throw ModelError("text branch needs at least one text column");
    if (branches_.deep && deep_width < 1) throw ModelError("deep branch needs at least one deep feature");

    if (branches_.deep) {
        std::mt19937_64 rng(config.seed ^ deep_stream);
        deep_.emplace<Dense>(deep_width, 1000, Init::he_uniform, rng);
        deep_.emplace<ReLU>();
        deep_.emplace<Dense>(1000, 4, Init::he_uniform, rng);
        deep_.emplace<ReLU>();
        deep_.set_input_grad(false);
    }
    if (branches_.shallow) {
        std::mt19937_64 rng(config.seed ^ shallow_stream);
        std::size_t channels = 3;
        for (std::size_t filters : {16, 32, 64}) {
            shallow_.emplace<Conv2D>(channels, filters, Init::he_uniform, rng);
            shallow_.emplace<ReLU>();
            shallow_.emplace<BatchNorm>(filters);
            shallow_.emplace<MaxPool>();
            channels = filters;
        }
        shallow_.emplace<Flatten>();
        Shape s;
        try {
            s = shallow_.output_shape({1, 3, image_side_, image_side_});
        } catch (const std::invalid_argument& e) {
            throw ModelError("image side " + std::to_string(image_side_) + " is too small for the shallow branch: " +
                             e.what());
        }
        shallow_.emplace<Dense>(s[1], 16, Init::he_uniform, rng);
        shallow_.emplace<ReLU>();
        shallow_.emplace<Dense>(16, 4, Init::he_uniform, rng);
        shallow_.emplace<ReLU>();
        shallow_.set_input_grad(false);
    }
    if (branches_.text) {
        std::mt19937_64 rng(config.seed ^ text_stream);
        text_.emplace<Dense>(text_width, 8, Init::he_uniform, rng);
        text_.emplace<ReLU>();
        text_.emplace<Dense>(8, 4, Init::he_uniform, rng);
        text_.emplace<ReLU>();
        text_.set_input_grad(false);
    }
    std::mt19937_64 rng(config.seed ^ head_stream);
    head_.emplace<Dense>(fusion_width(), 4, Init::he_uniform, rng);
    head_.emplace<ReLU>();
    head_.emplace<Dense>(4, 1, Init::xavier_uniform, rng);
    head_.emplace<LinearActivation>();
    set_mode(Mode::train);
}

std::vector<Network*> MvtsNetwork::enabled()
{
    std::vector<Network*> out;
    if (branches_.deep) out.push_back(&deep_);
    if (branches_.shallow) out.push_back(&shallow_);
    if (branches_.text) out.push_back(&text_);
    return out;
}

Tensor MvtsNetwork::forward(const MvtsInput& input)
{
    std::vector<Tensor> parts;
    std::size_t batch = 0;
    auto run = [&](Network& net, const Tensor* x, const char* what) {
        if (x == nullptr || x->empty()) throw ModelError(std::string(what) + " branch is enabled but has no input");
        if (batch == 0) batch = x->dim(0);
        if (x->dim(0) != batch) throw ModelError(std::string(what) + " input has a different batch size");
        parts.push_back(net.forward(*x));
    };
    if (branches_.deep) run(deep_, input.deep, "deep");
    if (branches_.shallow) {
        if (input.images && !input.images->empty() &&
            (input.images->rank() != 4 || input.images->dim(2) != image_side_ || input.images->dim(3) != image_side_))
            throw ModelError("image input must be batch x 3 x " + std::to_string(image_side_) + " x " +
                             std::to_string(image_side_) + ", got " + shape_string(input.images->shape()));
        run(shallow_, input.images, "shallow");
    }
    if (branches_.text) run(text_, input.text, "text");

    const std::size_t width = fusion_width();
    Tensor fused({batch, width});
    for (std::size_t b = 0; b < parts.size(); ++b)
        for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t k = 0; k < 4; ++k) fused.at(i, 4 * b + k) = parts[b].at(i, k);
    return head_.forward(fused);
}

void MvtsNetwork::backward(const Tensor& grad_output)
{
    const Tensor g = head_.backward(grad_output);
    const std::size_t batch = g.dim(0);
    const auto nets = enabled();
    for (std::size_t b = 0; b < nets.size(); ++b) {
        Tensor part({batch, 4});
        for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t k = 0; k < 4; ++k) part.at(i, k) = g.at(i, 4 * b + k);
        nets[b]->backward(part);
    }
}

void MvtsNetwork::set_mode(Mode mode)
{
    mode_ = mode;
    for (Network* n : enabled()) n->set_mode(mode);
    head_.set_mode(mode);
}

std::vector<Parameter*> MvtsNetwork::parameters()
{
    std::vector<Parameter*> out;
    for (Network* n : enabled())
        for (Parameter* p : n->parameters()) out.push_back(p);
    for (Parameter* p : head_.parameters()) out.push_back(p);
    return out;
}

std::vector<Layer*> MvtsNetwork::layers()
{
    std::vector<Layer*> out;
    for (Network* n : enabled())
        for (Layer* l : n->layers()) out.push_back(l);
    for (Layer* l : head_.layers()) out.push_back(l);
    return out;
}

std::size_t MvtsNetwork::parameter_count()
{
    return mvts::parameter_count(parameters());
}

void MvtsNetwork::zero_grad()
{
    mvts::zero_grad(parameters());
}

void MvtsNetwork::prime(const MvtsInput& batch, double target_mean)
{
    // Priming runs in train mode but must leave the BatchNorm running statistics alone.
    std::vector<Tensor> buffers;
    for (Layer* l : layers())
        for (Tensor* t : l->buffers()) buffers.push_back(*t);
    const Mode previous = mode_;
    set_mode(Mode::train);

    std::vector<Tensor> parts;
    std::size_t rows = 0;
    auto run = [&](Network& net, const Tensor* x, const char* what) {
        if (x == nullptr || x->empty()) throw ModelError(std::string(what) + " branch is enabled but has no input");
        rows = x->dim(0);
        parts.push_back(prime_stack(net, *x));
    };
    if (branches_.deep) run(deep_, batch.deep, "deep");
    if (branches_.shallow) run(shallow_, batch.images, "shallow");
    if (branches_.text) run(text_, batch.text, "text");
    Tensor fused({rows, fusion_width()});
    for (std::size_t b = 0; b < parts.size(); ++b)
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t k = 0; k < 4; ++k) fused.at(i, 4 * b + k) = parts[b].at(i, k);
    prime_stack(head_, std::move(fused));

    auto& out = static_cast<Dense&>(head_.layer(head_.size() - 2));
    out.weight().value.fill(0.0);
    out.bias().value.fill(target_mean);

    std::size_t i = 0;
    for (Layer* l : layers())
        for (Tensor* t : l->buffers()) *t = buffers[i++];
    set_mode(previous);
}

std::vector<Tensor> MvtsNetwork::state()
{
    std::vector<Tensor> out;
    for (Layer* l : layers()) {
        for (Parameter* p : l->parameters()) out.push_back(p->value);
        for (Tensor* t : l->buffers()) out.push_back(*t);
    }
    return out;
}

void MvtsNetwork::load_state(const std::vector<Tensor>& values)
{
    std::size_t i = 0;
    auto take = [&](Tensor& dst) {
        if (i >= values.size() || values[i].shape() != dst.shape()) throw ModelError("state does not match network");
        dst = values[i++];
    };
    for (Layer* l : layers()) {
        for (Parameter* p : l->parameters()) take(p->value);
        for (Tensor* t : l->buffers()) take(*t);
    }
    if (i != values.size()) throw ModelError("state does not match network");
}

// ---------------------------------------------------------------- training

MvtsInput MvtsBatch::input() const
{
    return {text.empty() ? nullptr : &text, deep.empty() ? nullptr : &deep, images.empty() ? nullptr : &images};
}

MvtsBatch gather_batch(const EncodedDataset& data, std::span<const std::size_t> rows, const BranchSet& branches)
{
    MvtsBatch b;
    if (branches.text && !data.text.empty()) b.text = data.text.gather_rows(rows);
    if (branches.deep && !data.deep.empty()) b.deep = data.deep.gather_rows(rows);
    if (branches.shallow && !data.images.empty()) b.images = data.images.gather_rows(rows);
    return b;
}

std::vector<double> predict_mvts(MvtsNetwork& network, const EncodedDataset& data, std::span<const std::size_t> rows)
{
    const Mode previous = network.mode();
    network.set_mode(Mode::eval);
    std::vector<double> out;
    out.reserve(rows.size());
    constexpr std::size_t chunk = 64;
    for (std::size_t start = 0; start < rows.size(); start += chunk) {
        const auto part = rows.subspan(start, std::min(chunk, rows.size() - start));
        const MvtsBatch batch = gather_batch(data, part, network.branches());
        const Tensor o = network.forward(batch.input());
        for (std::size_t i = 0; i < o.size(); ++i) out.push_back(data.price_scaler.inverse(o[i]));
    }
    network.set_mode(previous);
    return out;
}

nlohmann::json TrainHistory::to_json() const
{
    nlohmann::json j = {{"train_loss", train_loss},
                        {"validation_mape", validation_mape},
                        {"epochs_run", epochs_run},
                        {"best_epoch", best_epoch},
                        {"stopped_early", stopped_early}};
    j["epochs_to_target"] = epochs_to_target ? nlohmann::json(*epochs_to_target) : nlohmann::json(nullptr);
    return j;
}

TrainHistory train_mvts(MvtsNetwork& network, const EncodedDataset& data, std::span<const std::size_t> rows,
                        const MvtsConfig& config)
{
    config.validate();
    if (rows.empty()) throw ModelError("no training rows");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::size_t> fit(rows.begin(), rows.end()), holdout;
    if (config.validation_fraction > 0.0 && fit.size() >= 10) {
        std::mt19937_64 rng(config.seed ^ holdout_stream);
        std::shuffle(fit.begin(), fit.end(), rng);
        const auto n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(fit.size()))));
        holdout.assign(fit.begin(), fit.begin() + static_cast<std::ptrdiff_t>(n_val));
        fit.erase(fit.begin(), fit.begin() + static_cast<std::ptrdiff_t>(n_val));
        std::sort(holdout.begin(), holdout.end());
        std::sort(fit.begin(), fit.end());
    }
    if (network.branches().shallow && fit.size() < 2)
        throw ModelError("batch normalisation needs at least 2 training rows");
    std::vector<double> holdout_price;
    for (std::size_t r : holdout) holdout_price.push_back(data.price[r]);

    {
        const std::size_t n_prime = std::min<std::size_t>(fit.size(), 64);
        const MvtsBatch batch = gather_batch(data, std::span(fit.data(), n_prime), network.branches());
        double target_mean = 0.0;
        for (std::size_t r : fit) target_mean += data.target[r];
        network.prime(batch.input(), target_mean / static_cast<double>(fit.size()));
    }

    AdamOptions opts;
    opts.learning_rate = config.learning_rate;
    Adam adam(network.parameters(), opts);
    if (config.lr_fan_in > 0.0) adam.set_rate_scales(fan_in_rate_scales(network.parameters(), config.lr_fan_in));
    std::mt19937_64 shuffle_rng(config.seed ^ shuffle_stream);
    const double scale = data.price_scaler.scale();

    TrainHistory h;
    double best = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_state = network.state();
    std::size_t since_best = 0;
    network.set_mode(Mode::train);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(fit.begin(), fit.end(), shuffle_rng);
        std::vector<std::pair<std::size_t, std::size_t>> batches;
        for (std::size_t s = 0; s < fit.size(); s += config.batch_size)
            batches.emplace_back(s, std::min(fit.size(), s + config.batch_size));
        if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
            batches[batches.size() - 2].second = batches.back().second;
            batches.pop_back();
        }

        double epoch_loss = 0.0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const std::span<const std::size_t> part(fit.data() + batches[bi].first,
                                                    batches[bi].second - batches[bi].first);
            const MvtsBatch batch = gather_batch(data, part, network.branches());
            const Tensor out = network.forward(batch.input());
            std::vector<double> y(part.size()), pred(part.size()), g(part.size());
            for (std::size_t i = 0; i < part.size(); ++i) {
                y[i] = data.price[part[i]];
                pred[i] = data.price_scaler.inverse(out[i]);
            }
            const LossValue loss = loss_with_gradient(y, pred, config.alpha, config.loss, g);
            if (!std::isfinite(loss.total) || !std::all_of(pred.begin(), pred.end(), [](double v) { return std::isfinite(v); }))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(bi + 1));
            Tensor grad({part.size(), 1});
            for (std::size_t i = 0; i < part.size(); ++i) grad[i] = g[i] * scale;
            network.zero_grad();
            network.backward(grad);
            adam.step();
            epoch_loss += loss.total * static_cast<double>(part.size());
        }
        epoch_loss /= static_cast<double>(fit.size());
        h.train_loss.push_back(epoch_loss);
        h.epochs_run = epoch;
        if (config.target_loss && !h.epochs_to_target && epoch_loss <= *config.target_loss) h.epochs_to_target = epoch;

        double score = epoch_loss;
        if (!holdout.empty()) {
            const auto pred = predict_mvts(network, data, holdout);
            score = mape(holdout_price, pred);
            h.validation_mape.push_back(score);
        }
        if (score < best) {
            best = score;
            h.best_epoch = epoch;
            best_state = network.state();
            since_best = 0;
        } else if (++since_best >= config.patience) {
            h.stopped_early = true;
            break;
        }
    }
    network.load_state(best_state);
    network.set_mode(Mode::eval);
    h.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return h;
}

// ---------------------------------------------------------------- variants

std::vector<VariantSpec> branch_variants()
{
    return {{"deep-only", {true, false, false}},
            {"text-only", {false, false, true}},
            {"shallow-only", {false, true, false}},
            {"MVTs", {true, true, true}}};
}

std::vector<VariantSpec> loss_variants()
{
    return {{"L_M", {}, LossMode::mape_only}, {"L_A", {}, LossMode::mean_only}, {"combined", {}, LossMode::combined}};
}

std::vector<VariantResult> run_variants(const EncodedDataset& normalized, const EncodedDataset* raw, const Split& split,
                                        const MvtsConfig& base, std::span<const VariantSpec> variants,
                                        std::size_t threads)
{
    std::vector<VariantResult> results(variants.size());
    auto train_one = [&](std::size_t i) {
        const VariantSpec& spec = variants[i];
        MvtsConfig cfg = base;
        cfg.branches = spec.branches;
        cfg.loss = spec.loss;
        cfg.normalize_targets = spec.normalize_targets;
        if (spec.epochs != 0) cfg.epochs = spec.epochs;
        const EncodedDataset* data = &normalized;
        if (!spec.normalize_targets) {
            if (raw == nullptr) throw ModelError("variant '" + spec.name + "' needs a raw-target encoding");
            data = raw;
        }
        const std::size_t deep_width = data->deep.empty() ? 1000 : data->deep.dim(1);
        MvtsNetwork net(cfg, data->text.dim(1), deep_width);
        results[i].spec = spec;
        results[i].history = train_mvts(net, *data, split.train, cfg);
        results[i].predictions = predict_mvts(net, *data, split.test);
    };

    threads = std::max<std::size_t>(1, std::min(threads, variants.size()));
    if (threads == 1) {
        for (std::size_t i = 0; i < variants.size(); ++i) train_one(i);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < variants.size(); i = next++) {
                try {
                    train_one(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

MetricsReport ablate(const EncodedDataset& data, const Split& split, const MvtsConfig& config,
                     const std::string& dataset_id, std::size_t threads)
{
    const auto specs = branch_variants();
    const auto results = run_variants(data, nullptr, split, config, specs, threads);
    std::vector<ModelPredictions> preds;
    std::vector<std::string> columns;
    for (const auto& r : results) {
        preds.push_back({r.spec.name, r.predictions});
        columns.push_back(r.spec.name);
    }
    std::vector<double> y;
    for (std::size_t r : split.test) y.push_back(data.price[r]);
    return make_report(columns, preds, y, data.price_scaler, !data.price_scaler.identity(), config.seed, dataset_id);
}

// ---------------------------------------------------------------- persistence

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint)
{
    return checkpoint.string() + ".json";
}

}  // namespace

void save_mvts(MvtsNetwork& network, const MvtsConfig& config, const EncodedDataset& data,
               const std::filesystem::path& checkpoint_path)
{
    const auto layers = network.layers();
    write_checkpoint(checkpoint_path, layers);
    nlohmann::json side = {{"format", "MVTS1"},
                           {"config", config.to_json()},
                           {"schema_hash", data.schema.hash()},
                           {"schema", data.schema.to_json()},
                           {"text_width", network.text_width()},
                           {"deep_width", network.deep_width()},
                           {"image_side", network.image_side()},
                           {"scalers",
                            {{"text", data.text_scaler.to_json()},
                             {"deep", data.deep.empty() ? nlohmann::json(nullptr) : data.deep_scaler.to_json()},
                             {"price", data.price_scaler.to_json()}}}};
    write_text(sidecar_path(checkpoint_path), side.dump(2) + "\n");
}

LoadedMvts load_mvts(const std::filesystem::path& checkpoint_path)
{
    nlohmann::json side;
    try {
        side = nlohmann::json::parse(read_text(sidecar_path(checkpoint_path)));
    } catch (const nlohmann::json::exception& e) {
        throw ModelError("invalid model sidecar: " + std::string(e.what()));
    }
    MvtsConfig config = MvtsConfig::from_json(side.at("config"));
    MvtsNetwork net(config, side.at("text_width").get<std::size_t>(), side.at("deep_width").get<std::size_t>());
    const auto layers = net.layers();
    read_checkpoint(checkpoint_path, layers);
    net.set_mode(Mode::eval);
    return {config, side, std::move(net)};
}

}  // namespace mvts
