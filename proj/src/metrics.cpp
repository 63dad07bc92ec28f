#include "mvts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <Eigen/Dense>

#include "mvts/text_io.hpp"

namespace mvts {

namespace {

void check_pair(std::span<const double> y, std::span<const double> y_pred)
{
    if (y.empty()) throw MetricError("metric of empty input");
    if (y.size() != y_pred.size())
        throw MetricError("length mismatch: " + std::to_string(y.size()) + " targets vs " +
                          std::to_string(y_pred.size()) + " predictions");
}

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string general(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> y_pred)
{
    check_pair(y, y_pred);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_pred[i]);
    return s / static_cast<double>(y.size());
}

double mse(std::span<const double> y, std::span<const double> y_pred)
{
    check_pair(y, y_pred);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_pred[i]) * (y[i] - y_pred[i]);
    return s / static_cast<double>(y.size());
}

double mape(std::span<const double> y, std::span<const double> y_pred)
{
    check_pair(y, y_pred);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) throw MetricError("MAPE undefined: target " + std::to_string(i) + " is zero");
        s += std::abs((y_pred[i] - y[i]) / y[i]);
    }
    return 100.0 * s / static_cast<double>(y.size());
}

Correlation pearson_r(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw MetricError("pearson_r length mismatch");
    if (x.size() < 3) throw MetricError("pearson_r needs at least 3 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw MetricError("pearson_r of a constant input");
    const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    return {r, r * r};
}

std::vector<double> factor_contribution(const Tensor& X)
{
    if (X.rank() != 2) throw MetricError("factor_contribution expects an n x m matrix");
    const std::size_t n = X.dim(0), m = X.dim(1);
    if (n < 2) throw MetricError("factor_contribution needs at least 2 rows");

    Eigen::MatrixXd Z(n, m);
    for (std::size_t j = 0; j < m; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += X.at(i, j);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (X.at(i, j) - mean) * (X.at(i, j) - mean);
        if (!(ss > 0.0)) throw MetricError("column " + std::to_string(j) + " is constant");
        const double sd = std::sqrt(ss);
        for (std::size_t i = 0; i < n; ++i) Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (X.at(i, j) - mean) / sd;
    }
    const Eigen::MatrixXd R = Z.transpose() * Z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
    if (eig.info() != Eigen::Success) throw MetricError("eigendecomposition failed");
    const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd& V = eig.eigenvectors();

    std::vector<double> rate(m, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < lambda.size(); ++k) {
            const double loading = std::sqrt(lambda(k)) * V(static_cast<Eigen::Index>(j), k);
            s += lambda(k) * loading * loading;
        }
        rate[j] = s;
        total += s;
    }
    for (double& r : rate) r /= total;
    return rate;
}

const std::vector<std::string>& comparison_models()
{
    static const std::vector<std::string> models = {"deep-only", "text-only", "shallow-only", "MVTs", "SVR",
                                                    "BP",        "GM",        "ANN",          "ARIMA"};
    return models;
}

ModelScores score_predictions(const std::string& model, const std::string& split, std::span<const double> y,
                              std::span<const double> y_pred, const PriceScaler& price_scaler, bool normalized)
{
    ModelScores s;
    s.model = model;
    s.split = split;
    s.mae = mae(y, y_pred);
    s.mape = mape(y, y_pred);
    if (normalized)
        s.mse = mse(price_scaler.apply(y), price_scaler.apply(y_pred));
    else
        s.mse = mse(y, y_pred);
    return s;
}

const ModelScores& MetricsReport::get(const std::string& model, const std::string& split) const
{
    for (const auto& s : scores)
        if (s.model == model && s.split == split) return s;
    throw MetricError("report has no scores for model '" + model + "' on split '" + split + "'");
}

std::string MetricsReport::to_csv(const std::string& split) const
{
    std::string out = "metric";
    for (const auto& m : models) out += "," + csv_field(m);
    out += "\nMAPE(%)";
    for (const auto& m : models) out += "," + format_double(get(m, split).mape);
    out += "\nMSE(" + mse_unit + ")";
    for (const auto& m : models) out += "," + format_double(get(m, split).mse);
    return out + "\n";
}

std::string MetricsReport::to_markdown(const std::string& split) const
{
    std::string out = "| metric |";
    for (const auto& m : models) out += " " + m + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < models.size(); ++i) out += "---:|";
    out += "\n| MAPE (%) |";
    for (const auto& m : models) out += " " + fixed(get(m, split).mape, 2) + " |";
    out += "\n| MSE (" + mse_unit + ") |";
    for (const auto& m : models) out += " " + general(get(m, split).mse) + " |";
    return out + "\n";
}

std::string MetricsReport::to_csv_by_model(const std::string& split) const
{
    std::string out = "model,MAPE(%),MSE(" + mse_unit + "),MAE(" + mae_unit + ")\n";
    for (const auto& m : models) {
        const auto& s = get(m, split);
        out += csv_field(m) + "," + format_double(s.mape) + "," + format_double(s.mse) + "," + format_double(s.mae) +
               "\n";
    }
    return out;
}

std::string MetricsReport::to_markdown_by_model(const std::string& split) const
{
    std::string out = "| model | MAPE (%) | MSE (" + mse_unit + ") | MAE (" + mae_unit + ") |\n|---|---:|---:|---:|\n";
    for (const auto& m : models) {
        const auto& s = get(m, split);
        out += "| " + m + " | " + fixed(s.mape, 2) + " | " + general(s.mse) + " | " + general(s.mae) + " |\n";
    }
    return out;
}

nlohmann::json MetricsReport::to_json() const
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : scores)
        rows.push_back({{"model", s.model}, {"split", s.split}, {"mae", s.mae}, {"mse", s.mse}, {"mape", s.mape}});
    return {{"models", models},         {"scores", rows},     {"seed", seed},
            {"dataset_id", dataset_id}, {"normalized", normalized}, {"mae_unit", mae_unit},
            {"mse_unit", mse_unit},     {"mape_unit", "percent"}};
}

MetricsReport make_report(std::span<const std::string> columns, std::span<const ModelPredictions> predictions,
                          std::span<const double> y_true, const PriceScaler& price_scaler, bool normalized,
                          std::uint64_t seed, const std::string& dataset_id, const std::string& split)
{
    MetricsReport report;
    report.seed = seed;
    report.dataset_id = dataset_id;
    report.normalized = normalized;
    report.mse_unit = normalized ? "normalized" : "currency^2";
    for (const auto& column : columns) {
        const auto it = std::find_if(predictions.begin(), predictions.end(),
                                     [&](const ModelPredictions& p) { return p.model == column; });
        if (it == predictions.end()) throw MetricError("missing model '" + column + "'");
        report.models.push_back(column);
        report.scores.push_back(score_predictions(column, split, y_true, it->predictions, price_scaler, normalized));
    }
    return report;
}

MetricsReport report_table(std::span<const ModelPredictions> predictions, std::span<const double> y_true,
                           const PriceScaler& price_scaler, bool normalized, std::uint64_t seed,
                           const std::string& dataset_id)
{
    return make_report(comparison_models(), predictions, y_true, price_scaler, normalized, seed, dataset_id);
}

std::string bar_chart_svg(std::span<const std::string> labels, std::span<const double> values,
                          const std::string& title)
{
    if (labels.size() != values.size()) throw MetricError("bar chart labels and values differ in length");
    const int bar_h = 24, gap = 8, left = 180, width = 640, top = 40;
    const int height = top + static_cast<int>(labels.size()) * (bar_h + gap) + 20;
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    const double span_px = width - left - 80;

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                      "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"13\">\n";
    out += "<text x=\"" + std::to_string(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           xml_escape(title) + "</text>\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = top + static_cast<int>(i) * (bar_h + gap);
        const double w = std::max(0.0, values[i]) / vmax * span_px;
        out += "<text x=\"" + std::to_string(left - 8) + "\" y=\"" + std::to_string(y + bar_h - 7) +
               "\" text-anchor=\"end\">" + xml_escape(labels[i]) + "</text>\n";
        out += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(y) + "\" width=\"" + fixed(w, 2) +
               "\" height=\"" + std::to_string(bar_h) + "\" fill=\"#4a78b5\"/>\n";
        out += "<text x=\"" + fixed(left + w + 6, 2) + "\" y=\"" + std::to_string(y + bar_h - 7) + "\">" +
               fixed(values[i], 4) + "</text>\n";
    }
    return out + "</svg>\n";
}

}  // namespace mvts
