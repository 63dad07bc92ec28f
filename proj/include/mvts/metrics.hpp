#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvts/dataset.hpp"
#include "mvts/tensor.hpp"

namespace mvts {

class MetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

double mae(std::span<const double> y, std::span<const double> y_pred);
double mse(std::span<const double> y, std::span<const double> y_pred);
/// Percent.
double mape(std::span<const double> y, std::span<const double> y_pred);

struct Correlation {
    double r = 0.0;
    double r2 = 0.0;
};

Correlation pearson_r(std::span<const double> x, std::span<const double> y);

/// Contribution rate of each column of an n x m matrix, from the eigenvalue-weighted
/// squared factor loadings of its correlation matrix. Nonnegative, sums to 1.
std::vector<double> factor_contribution(const Tensor& X);

/// Column order of the comparison table.
const std::vector<std::string>& comparison_models();

struct ModelScores {
    std::string model;
    std::string split;
    double mae = 0.0;   // currency units
    double mse = 0.0;   // see MetricsReport::mse_unit
    double mape = 0.0;  // percent
};

/// Scores predictions in original units; with `normalized` the MSE is taken on
/// price_scaler-transformed values instead.
ModelScores score_predictions(const std::string& model, const std::string& split, std::span<const double> y,
                              std::span<const double> y_pred, const PriceScaler& price_scaler, bool normalized);

struct MetricsReport {
    std::vector<std::string> models;  // column order
    std::vector<ModelScores> scores;
    std::uint64_t seed = 0;
    std::string dataset_id;
    bool normalized = false;
    std::string mae_unit = "currency";
    std::string mse_unit = "currency^2";

    const ModelScores& get(const std::string& model, const std::string& split = "test") const;

    /// One row per metric (MAPE, MSE), one column per model, on `split`.
    std::string to_csv(const std::string& split = "test") const;
    std::string to_markdown(const std::string& split = "test") const;
    /// One row per model with columns MAPE, MSE, MAE.
    std::string to_csv_by_model(const std::string& split = "test") const;
    std::string to_markdown_by_model(const std::string& split = "test") const;
    nlohmann::json to_json() const;
};

struct ModelPredictions {
    std::string model;
    std::vector<double> predictions;  // original units, aligned with the truth vector
};

/// Assembles a report whose columns are `columns`; every column needs predictions.
MetricsReport make_report(std::span<const std::string> columns, std::span<const ModelPredictions> predictions,
                          std::span<const double> y_true, const PriceScaler& price_scaler, bool normalized,
                          std::uint64_t seed, const std::string& dataset_id, const std::string& split = "test");

/// The nine-column comparison table.
MetricsReport report_table(std::span<const ModelPredictions> predictions, std::span<const double> y_true,
                           const PriceScaler& price_scaler, bool normalized, std::uint64_t seed,
                           const std::string& dataset_id);

/// Horizontal bar chart as a standalone SVG document.
std::string bar_chart_svg(std::span<const std::string> labels, std::span<const double> values,
                          const std::string& title);

}  // namespace mvts
