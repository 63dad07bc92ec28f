#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvts/dataset.hpp"
#include "mvts/grey.hpp"
#include "mvts/metrics.hpp"
#include "mvts/mlp.hpp"
#include "mvts/mvts.hpp"
#include "mvts/svr.hpp"
#include "mvts/timeseries.hpp"

namespace mvts {

class CompareError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mean training price per whole period between `first` and `last`; periods
/// without training rows are linearly interpolated (held flat at the ends).
struct PeriodSeries {
    long first = 0;
    std::vector<double> values;
    std::vector<std::size_t> counts;  // training rows per period

    std::size_t index_of(long period) const;
};

long period_of(const HouseRecord& record, const std::string& attribute);

PeriodSeries period_mean_series(std::span<const HouseRecord> records, std::span<const std::size_t> train_rows,
                                const std::string& attribute);

enum class SeriesModel { gm11, arima };

struct SeriesFit {
    SeriesModel model = SeriesModel::gm11;
    PeriodSeries series;
    std::size_t fit_length = 0;
    /// In-sample values for the first fit_length periods, forecasts after.
    std::vector<double> path;
    nlohmann::json diagnostics;
};

/// Fits on the first ceil(fit_fraction * M) periods and forecasts the remainder.
SeriesFit fit_series_model(SeriesModel model, const PeriodSeries& series, double fit_fraction,
                           std::size_t p = 1, std::size_t d = 1, std::size_t q = 0);

/// The path value of each record's period.
std::vector<double> series_predictions(const SeriesFit& fit, std::span<const HouseRecord> records,
                                       std::span<const std::size_t> rows, const std::string& attribute);

struct CompareConfig {
    MvtsConfig mvts;
    BpConfig bp;
    AnnConfig ann;
    SvrOptions svr;
    std::string period_attribute = "出售时间";
    double series_fit_fraction = 0.75;
    std::size_t arima_p = 1, arima_d = 1, arima_q = 0;
    std::size_t threads = 1;

    CompareConfig();
    nlohmann::json to_json() const;
};

/// Predictions of the tabular baselines on `split.test`, in original units.
std::vector<double> svr_baseline(const EncodedDataset& data, const Split& split, const SvrOptions& options);
std::vector<double> bp_baseline(const EncodedDataset& data, const Split& split, const BpConfig& config);
std::vector<double> ann_baseline(const EncodedDataset& data, const Split& split, const AnnConfig& config);

struct CompareResult {
    MetricsReport report;
    std::vector<ModelPredictions> predictions;  // test rows
    std::vector<double> y_test;
    nlohmann::json details;  // histories and series diagnostics
};

/// All nine columns on one split and seed. `records` must be the rows of `data`.
CompareResult compare_models(const EncodedDataset& data, std::span<const HouseRecord> records, const Split& split,
                             const CompareConfig& config, const std::string& dataset_id);

}  // namespace mvts
