#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvts/checkpoint.hpp"
#include "mvts/compare.hpp"
#include "mvts/synth.hpp"
#include "mvts/text_io.hpp"

namespace mvts::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Options of one command, with typed getters for the resolved config.
struct Registry {
    std::vector<std::pair<std::string, std::function<json()>>> items;
    std::set<std::string> flags;

    template <typename T>
    CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& help)
    {
        items.emplace_back(name, [&var] { return json(var); });
        return app->add_option("--" + name, var, help)->capture_default_str();
    }

    CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& help)
    {
        items.emplace_back(name, [&var] { return json(var); });
        flags.insert(name);
        return app->add_flag("--" + name, var, help);
    }

    bool has(const std::string& name) const
    {
        return std::any_of(items.begin(), items.end(), [&](const auto& it) { return it.first == name; });
    }

    json resolved() const
    {
        json j = json::object();
        for (const auto& [name, get] : items) j[name] = get();
        return j;
    }
};

struct Globals {
    std::string config;
    std::uint64_t seed = 1;
    std::string out;
};

struct MvtsFlags {
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double lr = 0.0;
    double alpha = 1.0;
    std::string branches = "all";
    std::string loss = "combined";
    std::size_t image_side = 128;
    std::size_t patience = 10;
    double validation_fraction = 0.1;
    double lr_fan_in = 30.0;
    double target_loss = 0.0;
    bool raw_targets = false;

    void add(CLI::App* app, Registry& reg)
    {
        reg.option(app, "epochs", epochs, "training epochs (0: model default)");
        reg.option(app, "batch-size", batch_size, "mini-batch size (0: model default)");
        reg.option(app, "lr", lr, "learning rate (0: model default)");
        reg.option(app, "alpha", alpha, "weight of the mean term in the combined loss");
        reg.option(app, "branches", branches, "enabled MVTs branches: all or a list like deep,text");
        reg.option(app, "loss", loss, "MVTs loss mode")->check(CLI::IsMember({"combined", "L_M", "L_A"}));
        reg.option(app, "image-side", image_side, "side of the tiled 2x2 image grid");
        reg.option(app, "patience", patience, "early-stopping patience in epochs");
        reg.option(app, "validation-fraction", validation_fraction, "share of training rows held out");
        reg.option(app, "lr-fan-in", lr_fan_in, "fan-in reference for Adam step scaling (0: plain Adam)");
        reg.option(app, "target-loss", target_loss, "record the first epoch whose training loss is below this");
        reg.flag(app, "raw-targets", raw_targets, "train on raw prices instead of min-max normalised ones");
    }

    MvtsConfig config(std::uint64_t seed) const
    {
        MvtsConfig c;
        if (epochs != 0) c.epochs = epochs;
        if (batch_size != 0) c.batch_size = batch_size;
        if (lr != 0.0) c.learning_rate = lr;
        c.alpha = alpha;
        c.branches = BranchSet::parse(branches);
        c.loss = parse_loss_mode(loss);
        c.image_side = image_side;
        c.patience = patience;
        c.validation_fraction = validation_fraction;
        c.lr_fan_in = lr_fan_in;
        if (target_loss > 0.0) c.target_loss = target_loss;
        c.normalize_targets = !raw_targets;
        c.seed = seed;
        c.validate();
        return c;
    }
};

struct BaselineFlags {
    std::vector<std::size_t> hidden;
    double epsilon = 0.05;
    double C = 10.0;
    std::size_t max_iter = 0;

    void add(CLI::App* app, Registry& reg)
    {
        reg.option(app, "hidden", hidden, "hidden widths for bp (one) or ann (several)");
        reg.option(app, "epsilon", epsilon, "SVR insensitivity in normalised price units");
        reg.option(app, "C", C, "SVR penalty");
        reg.option(app, "max-iter", max_iter, "SVR iterations (0: default)");
    }
};

void write_json(const fs::path& path, const json& j)
{
    write_text(path, j.dump(2) + "\n");
}

fs::path require_out(const Globals& g, const std::string& command)
{
    if (g.out.empty()) throw UsageError(command + " needs --out DIR");
    fs::path out(g.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    return out;
}

std::string dataset_id(const std::string& dir)
{
    const fs::path p = fs::path(dir).lexically_normal();
    const std::string name = p.filename().string();
    return name.empty() ? p.parent_path().filename().string() : name;
}

std::string percent(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f%%", v);
    return buf;
}

struct Prepared {
    EncodedDataset data;
    std::vector<HouseRecord> records;
    Split split;
};

Prepared prepare(const std::string& dir, bool images, bool deep, std::size_t side, std::uint64_t seed,
                 double train_fraction, bool normalize)
{
    if (dir.empty()) throw UsageError("--data DIR is required");
    const bool have_deep = fs::exists(fs::path(dir) / "deep_features.csv");
    if (deep && !have_deep) throw DataError(dir + ": deep_features.csv is required by the deep branch");
    RawDataset raw = load_dataset(dir, images, deep || have_deep, side);
    Prepared p;
    p.records = raw.records;
    p.split = split(raw.records.size(), train_fraction, seed);
    p.data = encode_dataset(std::move(raw), p.split.train, normalize);
    return p;
}

std::vector<double> test_prices(const Prepared& p)
{
    std::vector<double> y;
    for (std::size_t r : p.split.test) y.push_back(p.data.price[r]);
    return y;
}

json scalers_json(const EncodedDataset& data)
{
    return {{"text", data.text_scaler.to_json()},
            {"deep", data.deep.empty() ? json(nullptr) : data.deep_scaler.to_json()},
            {"price", data.price_scaler.to_json()}};
}

// ---------------------------------------------------------------- commands

int cmd_synth(const Globals& g, const json& resolved, const SynthConfig& sc, std::ostream& out)
{
    const fs::path dir = require_out(g, "synth");
    SynthConfig c = sc;
    c.seed = g.seed;
    const SynthDataset data = synth_generate(c);
    write_synth(data, dir);
    write_json(dir / "config.json", resolved);
    out << "wrote " << data.records.size() << " synthetic records to " << dir.string() << "\n";
    return 0;
}

struct IngestFlags {
    std::string data;
    std::size_t image_side = 128;
    bool no_images = false;
    bool no_deep = false;
};

int cmd_ingest(const Globals& g, const json& resolved, const IngestFlags& f, std::ostream& out)
{
    if (f.data.empty()) throw UsageError("--data DIR is required");
    const bool have_deep = fs::exists(fs::path(f.data) / "deep_features.csv");
    const RawDataset raw = load_dataset(f.data, !f.no_images, !f.no_deep && have_deep, f.image_side);
    double lo = raw.records.front().price, hi = lo;
    for (const auto& r : raw.records) {
        lo = std::min(lo, r.price);
        hi = std::max(hi, r.price);
    }
    const json summary = {{"records", raw.records.size()},
                          {"validation_errors", 0},
                          {"schema_hash", raw.schema.hash()},
                          {"text_columns", raw.schema.encoded_columns()},
                          {"deep_features", !raw.deep.empty()},
                          {"images", !raw.images.empty()},
                          {"price_min", lo},
                          {"price_max", hi}};
    if (!g.out.empty()) {
        const fs::path dir = require_out(g, "ingest");
        write_json(dir / "ingest.json", summary);
        write_json(dir / "config.json", resolved);
    }
    out << raw.records.size() << " records, 0 validation errors, schema " << raw.schema.hash() << "\n";
    return 0;
}

struct TrainFlags {
    std::string model;
    std::string data;
    double train_fraction = 0.75;
    MvtsFlags mvts;
    BaselineFlags base;
};

BpConfig bp_config(const TrainFlags& f, std::uint64_t seed)
{
    BpConfig c;
    c.seed = seed;
    if (!f.base.hidden.empty()) {
        if (f.base.hidden.size() != 1) throw UsageError("bp takes a single --hidden width");
        c.hidden = f.base.hidden[0];
    }
    if (f.mvts.epochs != 0) c.epochs = f.mvts.epochs;
    if (f.mvts.lr != 0.0) c.learning_rate = f.mvts.lr;
    return c;
}

AnnConfig ann_config(const TrainFlags& f, std::uint64_t seed)
{
    AnnConfig c;
    c.seed = seed;
    if (!f.base.hidden.empty()) c.hidden = f.base.hidden;
    if (f.mvts.epochs != 0) c.epochs = f.mvts.epochs;
    if (f.mvts.lr != 0.0) c.learning_rate = f.mvts.lr;
    if (f.mvts.batch_size != 0) c.batch_size = f.mvts.batch_size;
    return c;
}

SvrOptions svr_options(const TrainFlags& f, std::uint64_t seed)
{
    SvrOptions o;
    o.epsilon = f.base.epsilon;
    o.C = f.base.C;
    if (f.base.max_iter != 0) o.max_iter = f.base.max_iter;
    o.seed = seed;
    return o;
}

void write_scores(const fs::path& dir, const std::string& model, const Prepared& p, const std::vector<double>& preds,
                  std::uint64_t seed, const std::string& id, std::ostream& out)
{
    const std::vector<std::string> columns{model};
    const std::vector<ModelPredictions> mp{{model, preds}};
    const auto y = test_prices(p);
    const MetricsReport report =
        make_report(columns, mp, y, p.data.price_scaler, !p.data.price_scaler.identity(), seed, id);
    write_text(dir / "metrics.csv", report.to_csv_by_model());
    write_text(dir / "metrics.md", report.to_markdown_by_model());
    write_json(dir / "metrics.json", report.to_json());
    const ModelScores& s = report.get(model);
    out << model << " held-out MAPE: " << percent(s.mape) << ", MSE (" << report.mse_unit << "): " << s.mse
        << ", MAE: " << s.mae << "\n";
}

int cmd_train(const Globals& g, const json& resolved, const TrainFlags& f, std::ostream& out)
{
    const fs::path dir = require_out(g, "train");
    const std::string id = dataset_id(f.data);
    if (f.model == "mvts") {
        const MvtsConfig cfg = f.mvts.config(g.seed);
        Prepared p = prepare(f.data, cfg.branches.shallow, cfg.branches.deep, cfg.image_side, g.seed,
                             f.train_fraction, cfg.normalize_targets);
        const std::size_t deep_width = p.data.deep.empty() ? 1000 : p.data.deep.dim(1);
        MvtsNetwork net(cfg, p.data.text.dim(1), deep_width);
        const TrainHistory h = train_mvts(net, p.data, p.split.train, cfg);
        save_mvts(net, cfg, p.data, dir / "model.ckpt");
        write_json(dir / "history.json", h.to_json());
        write_json(dir / "timing.json", {{"seconds", h.seconds}});
        write_json(dir / "config.json", resolved);
        if (!h.validation_mape.empty())
            out << "validation MAPE (best epoch " << h.best_epoch << " of " << h.epochs_run
                << "): " << percent(h.validation_mape[h.best_epoch - 1]) << "\n";
        write_scores(dir, "MVTs", p, predict_mvts(net, p.data, p.split.test), g.seed, id, out);
        return 0;
    }

    Prepared p = prepare(f.data, false, false, 128, g.seed, f.train_fraction, true);
    const Tensor X = tabular_features(p.data);
    const Tensor X_train = X.gather_rows(p.split.train), X_test = X.gather_rows(p.split.test);
    std::vector<double> y;
    for (std::size_t r : p.split.train) y.push_back(p.data.target[r]);
    json sidecar = {{"model", f.model},
                    {"input_width", X.dim(1)},
                    {"schema_hash", p.data.schema.hash()},
                    {"scalers", scalers_json(p.data)}};
    std::vector<double> preds;
    const auto start = std::chrono::steady_clock::now();
    json history;
    if (f.model == "svr") {
        const SvrOptions o = svr_options(f, g.seed);
        const SvrModel m = fit_svr(X_train, y, o);
        preds = p.data.price_scaler.inverse(predict_svr(m, X_test));
        sidecar["svr"] = m.to_json();
        history = {{"objective_trace", m.objective_trace}, {"trace_interval", o.trace_interval}};
        write_json(dir / "model.json", sidecar);
    } else {
        BaselineModel m;
        if (f.model == "bp") {
            const BpConfig c = bp_config(f, g.seed);
            for (double& v : y) v = std::clamp(v, 1e-3, 1.0 - 1e-3);
            m = fit_bp(X_train, y, c);
            sidecar["config"] = c.to_json();
        } else {
            const AnnConfig c = ann_config(f, g.seed);
            m = fit_ann(X_train, y, c);
            sidecar["config"] = c.to_json();
        }
        preds = predict_baseline(m, X_test, p.data.price_scaler);
        const auto layers = m.network.layers();
        write_checkpoint(dir / "model.ckpt", layers);
        write_json(dir / "model.ckpt.json", sidecar);
        history = {{"loss", m.loss_history}};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(dir / "history.json", history);
    write_json(dir / "timing.json", {{"seconds", seconds}});
    write_json(dir / "config.json", resolved);
    const std::string name = f.model == "svr" ? "SVR" : (f.model == "bp" ? "BP" : "ANN");
    write_scores(dir, name, p, preds, g.seed, id, out);
    return 0;
}

struct FitFlags {
    std::string model;
    std::string series;
    std::size_t steps = 3;
    std::size_t p = 1, d = 1, q = 0;
    std::size_t aic_sweep = 0;
    std::string response = "discrete";
};

int cmd_fit(const Globals& g, const json& resolved, const FitFlags& f, std::ostream& out)
{
    const fs::path dir = require_out(g, "fit");
    if (f.series.empty()) throw UsageError("--series CSV is required");
    const std::vector<double> series = read_series(f.series);
    std::vector<double> ahead, fitted;
    json diag;
    if (f.model == "gm11") {
        const GreyModel m =
            fit_gm11(series, f.response == "continuous" ? GreyResponse::continuous : GreyResponse::discrete);
        ahead = predict_gm11(m, f.steps);
        fitted = m.fitted;
        const GreyCheck check = check_gm11(m, series);
        diag = {{"model", m.to_json()}, {"check", check.to_json()}};
        out << "GM(1,1) a = " << m.a << ", u = " << m.u << ", check: " << check.verdict() << "\n";
    } else {
        std::size_t p = f.p, q = f.q;
        if (f.aic_sweep > 0) {
            json sweep = json::array();
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t pp = 0; pp <= f.aic_sweep; ++pp)
                for (std::size_t qq = 0; qq <= f.aic_sweep; ++qq) {
                    try {
                        const double aic = fit_arima(series, pp, f.d, qq).aic();
                        sweep.push_back({{"p", pp}, {"q", qq}, {"aic", aic}});
                        if (aic < best) {
                            best = aic;
                            p = pp;
                            q = qq;
                        }
                    } catch (const TimeSeriesError& e) {
                        sweep.push_back({{"p", pp}, {"q", qq}, {"error", e.what()}});
                    }
                }
            if (!std::isfinite(best)) throw TimeSeriesError("no order in the AIC sweep could be fitted");
            diag["aic_sweep"] = sweep;
        }
        const ArimaModel m = fit_arima(series, p, f.d, q);
        ahead = forecast(m, series, f.steps);
        const auto shocks = arma_shocks(m, difference(series, static_cast<int>(f.d)));
        fitted.assign(series.begin(), series.end());
        for (std::size_t t = f.d; t < series.size(); ++t) fitted[t] = series[t] - shocks[t - f.d];
        diag["model"] = m.to_json();
        diag["stationarity"] = stationarity_report(difference(series, static_cast<int>(f.d))).to_json();
        out << "ARIMA(" << p << "," << f.d << "," << q << ") sigma2 = " << m.sigma2 << ", AIC = " << m.aic()
            << "\n";
    }
    // In-sample rows carry the one-step fit and its residual; forecast rows leave the residual empty.
    // ARIMA has no one-step fit for the first d points, so those rows echo the data.
    std::string csv = "step,forecast,residual\n";
    for (std::size_t t = 0; t < series.size(); ++t)
        csv += std::to_string(t + 1) + "," + format_double(fitted[t]) + "," +
               format_double(series[t] - fitted[t]) + "\n";
    for (std::size_t s = 0; s < ahead.size(); ++s) {
        csv += std::to_string(series.size() + s + 1) + "," + format_double(ahead[s]) + ",\n";
        out << "  t+" << s + 1 << ": " << format_double(ahead[s]) << "\n";
    }
    write_text(dir / "forecast.csv", csv);
    write_json(dir / "diagnostics.json", diag);
    write_json(dir / "config.json", resolved);
    return 0;
}

struct EvaluateFlags {
    std::string model_dir;
    std::string data;
};

int cmd_evaluate(const Globals& g, const json& resolved, const EvaluateFlags& f, std::ostream& out)
{
    const fs::path dir = require_out(g, "evaluate");
    if (f.model_dir.empty()) throw UsageError("--model-dir DIR is required");
    const fs::path md(f.model_dir);
    json trained;
    try {
        trained = json::parse(read_text(md / "config.json"));
    } catch (const json::exception& e) {
        throw DataError((md / "config.json").string() + ": " + e.what());
    }
    const std::string model = trained.at("model").get<std::string>();
    const std::string data_dir = f.data.empty() ? trained.at("data").get<std::string>() : f.data;
    const auto seed = trained.at("seed").get<std::uint64_t>();
    const double fraction = trained.at("train-fraction").get<double>();
    const std::string id = dataset_id(data_dir);

    auto check_schema = [](const json& side, const EncodedDataset& data) {
        if (side.at("schema_hash").get<std::string>() != data.schema.hash())
            throw DataError("dataset schema does not match the one the model was trained on");
    };
    if (model == "mvts") {
        LoadedMvts loaded = load_mvts(md / "model.ckpt");
        const MvtsConfig& cfg = loaded.config;
        Prepared p = prepare(data_dir, cfg.branches.shallow, cfg.branches.deep, cfg.image_side, seed, fraction,
                             cfg.normalize_targets);
        check_schema(loaded.sidecar, p.data);
        write_json(dir / "config.json", resolved);
        write_scores(dir, "MVTs", p, predict_mvts(loaded.network, p.data, p.split.test), seed, id, out);
        return 0;
    }
    Prepared p = prepare(data_dir, false, false, 128, seed, fraction, true);
    const Tensor X = tabular_features(p.data).gather_rows(p.split.test);
    std::vector<double> preds;
    if (model == "svr") {
        const json side = json::parse(read_text(md / "model.json"));
        check_schema(side, p.data);
        preds = p.data.price_scaler.inverse(predict_svr(SvrModel::from_json(side.at("svr")), X));
    } else {
        const json side = json::parse(read_text(md / "model.ckpt.json"));
        check_schema(side, p.data);
        const auto width = side.at("input_width").get<std::size_t>();
        const json& c = side.at("config");
        BaselineModel m;
        m.input_width = width;
        if (model == "bp") {
            BpConfig bc;
            bc.hidden = c.at("hidden").get<std::size_t>();
            m.network = build_bp(width, bc);
        } else {
            AnnConfig ac;
            ac.hidden = c.at("hidden").get<std::vector<std::size_t>>();
            m.network = build_ann(width, ac);
        }
        const auto layers = m.network.layers();
        read_checkpoint(md / "model.ckpt", layers);
        preds = predict_baseline(m, X, p.data.price_scaler);
    }
    write_json(dir / "config.json", resolved);
    write_scores(dir, model == "svr" ? "SVR" : (model == "bp" ? "BP" : "ANN"), p, preds, seed, id, out);
    return 0;
}

struct CompareFlags {
    std::string data;
    double train_fraction = 0.75;
    std::size_t threads = 0;
    std::string period_attribute = "出售时间";
    MvtsFlags mvts;
};

std::size_t worker_count(std::size_t requested)
{
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_compare(const Globals& g, const json& resolved, const CompareFlags& f, std::ostream& out)
{
    const fs::path dir = require_out(g, "compare");
    CompareConfig c;
    c.mvts = f.mvts.config(g.seed);
    c.mvts.branches = {};
    c.bp.seed = c.ann.seed = c.svr.seed = g.seed;
    c.threads = worker_count(f.threads);
    c.period_attribute = f.period_attribute;
    Prepared p = prepare(f.data, true, true, c.mvts.image_side, g.seed, f.train_fraction, c.mvts.normalize_targets);
    const CompareResult r = compare_models(p.data, p.records, p.split, c, dataset_id(f.data));
    write_text(dir / "report.csv", r.report.to_csv());
    write_text(dir / "report.md", r.report.to_markdown());
    write_text(dir / "report_by_model.csv", r.report.to_csv_by_model());
    write_json(dir / "report.json", r.report.to_json());
    write_json(dir / "details.json", r.details);
    write_json(dir / "config.json", resolved);
    out << r.report.to_markdown();
    return 0;
}

struct AblateFlags {
    std::string data;
    double train_fraction = 0.75;
    std::size_t threads = 0;
    MvtsFlags mvts;
};

int cmd_ablate(const Globals& g, const json& resolved, const AblateFlags& f, std::ostream& out)
{
    const fs::path dir = require_out(g, "ablate");
    MvtsConfig base = f.mvts.config(g.seed);
    base.branches = {};
    Prepared p = prepare(f.data, true, true, base.image_side, g.seed, f.train_fraction, base.normalize_targets);

    // The combined-loss run over all branches doubles as the full-MVTs branch column.
    std::vector<VariantSpec> specs = loss_variants();
    for (const auto& v : branch_variants())
        if (v.branches.count() < 3) specs.push_back(v);
    const auto results = run_variants(p.data, nullptr, p.split, base, specs, worker_count(f.threads));

    std::map<std::string, const VariantResult*> by_name;
    for (const auto& r : results) by_name[r.spec.name] = &r;
    const auto y = test_prices(p);
    const bool normalized = !p.data.price_scaler.identity();
    const std::string id = dataset_id(f.data);

    std::vector<std::string> loss_cols{"L_M", "L_A", "combined"};
    std::vector<ModelPredictions> loss_preds;
    for (const auto& n : loss_cols) loss_preds.push_back({n, by_name.at(n)->predictions});
    const MetricsReport losses = make_report(loss_cols, loss_preds, y, p.data.price_scaler, normalized, g.seed, id);

    std::vector<std::string> branch_cols{"deep-only", "text-only", "shallow-only", "MVTs"};
    std::vector<ModelPredictions> branch_preds;
    for (const auto& n : branch_cols)
        branch_preds.push_back({n, by_name.at(n == "MVTs" ? std::string("combined") : n)->predictions});
    const MetricsReport branches =
        make_report(branch_cols, branch_preds, y, p.data.price_scaler, normalized, g.seed, id);

    json histories;
    for (const auto& r : results) histories[r.spec.name] = r.history.to_json();
    write_text(dir / "ablation_loss.csv", losses.to_csv_by_model());
    write_text(dir / "ablation_loss.md", losses.to_markdown_by_model());
    write_text(dir / "ablation_branches.csv", branches.to_csv());
    write_text(dir / "ablation_branches.md", branches.to_markdown());
    write_json(dir / "ablation.json", {{"loss_modes", losses.to_json()}, {"branches", branches.to_json()}});
    write_json(dir / "history.json", histories);
    write_json(dir / "config.json", resolved);
    out << "loss modes\n" << losses.to_markdown_by_model() << "\nbranches\n" << branches.to_markdown();
    return 0;
}

struct ImportanceFlags {
    std::string data;
    std::vector<std::string> attributes;
};

int cmd_importance(const Globals& g, const json& resolved, const ImportanceFlags& f, std::ostream& out)
{
    const fs::path dir = require_out(g, "importance");
    if (f.data.empty()) throw UsageError("--data DIR is required");
    const AttributeSchema schema = AttributeSchema::load(fs::path(f.data) / "schema.json");
    const auto records = load_records(fs::path(f.data) / "records.csv", schema);
    std::vector<std::string> names = f.attributes;
    if (names.empty())
        for (const auto& a : schema.attributes())
            if (a.is_numeric()) names.push_back(a.name);
    for (const auto& n : names) {
        const auto k = schema.find(n);
        if (!k) throw UsageError("unknown attribute '" + n + "'");
        if (!schema.at(*k).is_numeric()) throw UsageError("attribute '" + n + "' is not numeric");
    }
    if (names.empty()) throw DataError("the schema has no numeric attributes");
    Tensor X({records.size(), names.size()});
    for (std::size_t i = 0; i < records.size(); ++i)
        for (std::size_t j = 0; j < names.size(); ++j) X.at(i, j) = records[i].number(names[j]);
    const auto rates = factor_contribution(X);

    std::string csv = "attribute,contribution\n";
    json j = json::array();
    for (std::size_t k = 0; k < names.size(); ++k) {
        csv += names[k] + "," + format_double(rates[k]) + "\n";
        j.push_back({{"attribute", names[k]}, {"contribution", rates[k]}});
        out << names[k] << ": " << percent(100.0 * rates[k]) << "\n";
    }
    write_text(dir / "importance.csv", csv);
    write_json(dir / "importance.json", j);
    write_text(dir / "importance.svg", bar_chart_svg(names, rates, "Factor contribution rates"));
    write_json(dir / "config.json", resolved);
    return 0;
}

// ---------------------------------------------------------------- config files

std::string token_of(const json& v)
{
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

bool given(const std::vector<std::string>& args, std::size_t from, const std::string& name)
{
    const std::string flag = "--" + name;
    for (std::size_t i = from; i < args.size(); ++i)
        if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
    return false;
}

std::string config_path(const std::vector<std::string>& args)
{
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return {};
}

// Splices config-file values in front of the command line, so flags given explicitly win.
std::vector<std::string> apply_config(const std::vector<std::string>& args, const std::string& command,
                                      std::size_t command_pos, const Registry& globals, const Registry& local)
{
    const std::string path = config_path(args);
    if (path.empty()) return args;
    json cfg;
    try {
        cfg = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
    if (!cfg.is_object()) throw UsageError("config " + path + " must be a JSON object");

    std::vector<std::string> global_tokens, local_tokens;
    for (const auto& [key, value] : cfg.items()) {
        if (key == "command") {
            if (value != command) throw UsageError("config " + path + " is for command " + value.dump());
            continue;
        }
        const bool is_global = globals.has(key);
        const Registry& reg = is_global ? globals : local;
        if (!reg.has(key)) throw UsageError("config " + path + ": unknown key '" + key + "' for " + command);
        if (given(args, 0, key)) continue;
        auto& tokens = is_global ? global_tokens : local_tokens;
        if (reg.flags.count(key)) {
            if (!value.is_boolean()) throw UsageError("config key '" + key + "' must be true or false");
            if (value.get<bool>()) tokens.push_back("--" + key);
            continue;
        }
        if (value.is_null() || value.is_object()) throw UsageError("config key '" + key + "' has an unusable value");
        if (value.is_array()) {
            if (value.empty()) continue;
            tokens.push_back("--" + key);
            for (const auto& v : value) tokens.push_back(token_of(v));
        } else {
            tokens.push_back("--" + key);
            tokens.push_back(token_of(value));
        }
    }
    std::vector<std::string> merged(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(command_pos));
    merged.insert(merged.end(), global_tokens.begin(), global_tokens.end());
    merged.push_back(args[command_pos]);
    merged.insert(merged.end(), local_tokens.begin(), local_tokens.end());
    merged.insert(merged.end(), args.begin() + static_cast<std::ptrdiff_t>(command_pos) + 1, args.end());
    return merged;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Multimodal house-price toolkit", "mvts"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    Registry greg;
    app.add_option("--config", g.config, "JSON file of option values; flags override it");
    greg.option(&app, "seed", g.seed, "seed for splits, initialisation and data generation");
    greg.option(&app, "out", g.out, "output directory");

    std::map<std::string, Registry> regs;

    SynthConfig synth;
    auto* s_synth = app.add_subcommand("synth", "generate a synthetic dataset with known ground truth");
    regs["synth"].option(s_synth, "n", synth.n, "number of records");
    regs["synth"].option(s_synth, "noise", synth.noise, "noise std as a fraction of the price scale");
    regs["synth"].option(s_synth, "image-weight", synth.image_weight, "price-scale units per unit brightness");
    regs["synth"].option(s_synth, "price-scale", synth.price_scale, "currency units per model unit");
    regs["synth"].option(s_synth, "view-side", synth.view_side, "pixels per stored view");

    IngestFlags ingest;
    auto* s_ingest = app.add_subcommand("ingest", "load and validate a dataset directory");
    regs["ingest"].option(s_ingest, "data", ingest.data, "dataset directory");
    regs["ingest"].option(s_ingest, "image-side", ingest.image_side, "side of the tiled image grid");
    regs["ingest"].flag(s_ingest, "no-images", ingest.no_images, "skip image decoding");
    regs["ingest"].flag(s_ingest, "no-deep", ingest.no_deep, "skip deep features");

    TrainFlags train;
    auto* s_train = app.add_subcommand("train", "train one model on the 75% split");
    regs["train"].option(s_train, "model", train.model, "mvts, bp, ann or svr")
        ->required()
        ->check(CLI::IsMember({"mvts", "bp", "ann", "svr"}));
    regs["train"].option(s_train, "data", train.data, "dataset directory");
    regs["train"].option(s_train, "train-fraction", train.train_fraction, "share of rows used for training");
    train.mvts.add(s_train, regs["train"]);
    train.base.add(s_train, regs["train"]);

    FitFlags fit;
    auto* s_fit = app.add_subcommand("fit", "fit GM(1,1) or ARIMA to a one-column series");
    regs["fit"].option(s_fit, "model", fit.model, "gm11 or arima")->required()->check(CLI::IsMember({"gm11", "arima"}));
    regs["fit"].option(s_fit, "series", fit.series, "CSV with one value per line (optional header)");
    regs["fit"].option(s_fit, "steps", fit.steps, "forecast horizon");
    regs["fit"].option(s_fit, "p", fit.p, "AR order");
    regs["fit"].option(s_fit, "d", fit.d, "differencing order");
    regs["fit"].option(s_fit, "q", fit.q, "MA order");
    regs["fit"].option(s_fit, "aic-sweep", fit.aic_sweep, "try p, q in 0..N and keep the lowest AIC");
    regs["fit"].option(s_fit, "response", fit.response, "GM(1,1) response form")
        ->check(CLI::IsMember({"discrete", "continuous"}));

    EvaluateFlags evaluate;
    auto* s_eval = app.add_subcommand("evaluate", "score a trained model on its held-out split");
    regs["evaluate"].option(s_eval, "model-dir", evaluate.model_dir, "output directory of a train run");
    regs["evaluate"].option(s_eval, "data", evaluate.data, "dataset directory (default: the one trained on)");

    CompareFlags compare;
    auto* s_compare = app.add_subcommand("compare", "train and score all nine comparison models");
    regs["compare"].option(s_compare, "data", compare.data, "dataset directory");
    regs["compare"].option(s_compare, "train-fraction", compare.train_fraction, "share of rows used for training");
    regs["compare"].option(s_compare, "threads", compare.threads, "worker threads (0: one per core)");
    regs["compare"].option(s_compare, "period-attribute", compare.period_attribute,
                           "numeric attribute holding the sale period");
    compare.mvts.add(s_compare, regs["compare"]);

    AblateFlags ablate;
    auto* s_ablate = app.add_subcommand("ablate", "loss-mode and branch ablations of MVTs");
    regs["ablate"].option(s_ablate, "data", ablate.data, "dataset directory");
    regs["ablate"].option(s_ablate, "train-fraction", ablate.train_fraction, "share of rows used for training");
    regs["ablate"].option(s_ablate, "threads", ablate.threads, "worker threads (0: one per core)");
    ablate.mvts.add(s_ablate, regs["ablate"]);

    ImportanceFlags importance;
    auto* s_imp = app.add_subcommand("importance", "factor contribution rates of numeric attributes");
    regs["importance"].option(s_imp, "data", importance.data, "dataset directory");
    regs["importance"].option(s_imp, "attributes", importance.attributes, "attributes to analyse (default: all numeric)");

    try {
        std::vector<std::string> argv = args;
        const auto pos = std::find_if(argv.begin(), argv.end(), [&](const std::string& a) { return regs.count(a); });
        if (pos != argv.end()) {
            const auto at = static_cast<std::size_t>(pos - argv.begin());
            argv = apply_config(argv, *pos, at, greg, regs.at(*pos));
        }
        std::reverse(argv.begin(), argv.end());
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    json resolved = greg.resolved();
    resolved.erase("out");
    resolved.update(regs.at(command).resolved());
    resolved["command"] = command;

    try {
        if (command == "synth") return cmd_synth(g, resolved, synth, out);
        if (command == "ingest") return cmd_ingest(g, resolved, ingest, out);
        if (command == "train") return cmd_train(g, resolved, train, out);
        if (command == "fit") return cmd_fit(g, resolved, fit, out);
        if (command == "evaluate") return cmd_evaluate(g, resolved, evaluate, out);
        if (command == "compare") return cmd_compare(g, resolved, compare, out);
        if (command == "ablate") return cmd_ablate(g, resolved, ablate, out);
        if (command == "importance") return cmd_importance(g, resolved, importance, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        // Bad model settings (unknown branch, invalid alpha) come from the user's flags.
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace mvts::cli
