#include "mvts/compare.hpp"

#include <algorithm>
#include <cmath>

namespace mvts {

long period_of(const HouseRecord& record, const std::string& attribute)
{
    const auto it = record.values.find(attribute);
    if (it == record.values.end() || !std::holds_alternative<double>(it->second))
        throw CompareError("record " + record.id + " has no numeric period attribute '" + attribute + "'");
    return std::lround(std::get<double>(it->second));
}

std::size_t PeriodSeries::index_of(long period) const
{
    const long last = first + static_cast<long>(values.size()) - 1;
    return static_cast<std::size_t>(std::clamp(period, first, last) - first);
}

PeriodSeries period_mean_series(std::span<const HouseRecord> records, std::span<const std::size_t> train_rows,
                                const std::string& attribute)
{
    if (records.empty()) throw CompareError("no records");
    if (train_rows.empty()) throw CompareError("no training rows for the period series");
    long lo = period_of(records[0], attribute), hi = lo;
    for (const auto& r : records) {
        const long p = period_of(r, attribute);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    PeriodSeries s;
    s.first = lo;
    const auto m = static_cast<std::size_t>(hi - lo + 1);
    s.values.assign(m, 0.0);
    s.counts.assign(m, 0);
    for (std::size_t row : train_rows) {
        const std::size_t k = static_cast<std::size_t>(period_of(records[row], attribute) - lo);
        s.values[k] += records[row].price;
        ++s.counts[k];
    }
    std::vector<std::size_t> known;
    for (std::size_t k = 0; k < m; ++k)
        if (s.counts[k] > 0) {
            s.values[k] /= static_cast<double>(s.counts[k]);
            known.push_back(k);
        }
    for (std::size_t k = 0; k < m; ++k) {
        if (s.counts[k] > 0) continue;
        const auto next = std::upper_bound(known.begin(), known.end(), k);
        if (next == known.begin()) {
            s.values[k] = s.values[known.front()];
        } else if (next == known.end()) {
            s.values[k] = s.values[known.back()];
        } else {
            const std::size_t a = *(next - 1), b = *next;
            const double t = static_cast<double>(k - a) / static_cast<double>(b - a);
            s.values[k] = s.values[a] + t * (s.values[b] - s.values[a]);
        }
    }
    return s;
}

SeriesFit fit_series_model(SeriesModel model, const PeriodSeries& series, double fit_fraction, std::size_t p,
                           std::size_t d, std::size_t q)
{
    if (!(fit_fraction > 0.0 && fit_fraction <= 1.0)) throw CompareError("series fit fraction must lie in (0, 1]");
    const std::size_t m = series.values.size();
    const auto n_fit = std::min<std::size_t>(
        m, static_cast<std::size_t>(std::ceil(fit_fraction * static_cast<double>(m) - 1e-9)));
    const std::span<const double> head(series.values.data(), n_fit);

    SeriesFit out;
    out.model = model;
    out.series = series;
    out.fit_length = n_fit;
    if (model == SeriesModel::gm11) {
        const GreyModel gm = fit_gm11(head);
        out.path = gm.fitted;
        const auto ahead = predict_gm11(gm, m - n_fit);
        out.path.insert(out.path.end(), ahead.begin(), ahead.end());
        out.diagnostics = {{"model", gm.to_json()}, {"check", check_gm11(gm, head).to_json()}};
    } else {
        const ArimaModel am = fit_arima(head, p, d, q);
        const auto w = difference(head, static_cast<int>(d));
        const auto shocks = arma_shocks(am, w);
        // One-step prediction error in levels equals the shock of the differenced series.
        out.path.assign(head.begin(), head.end());
        for (std::size_t t = d; t < n_fit; ++t) out.path[t] = head[t] - shocks[t - d];
        const auto ahead = forecast(am, head, m - n_fit);
        out.path.insert(out.path.end(), ahead.begin(), ahead.end());
        out.diagnostics = {{"model", am.to_json()}, {"stationarity", stationarity_report(w).to_json()}};
    }
    return out;
}

std::vector<double> series_predictions(const SeriesFit& fit, std::span<const HouseRecord> records,
                                       std::span<const std::size_t> rows, const std::string& attribute)
{
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(fit.path[fit.series.index_of(period_of(records[r], attribute))]);
    return out;
}

CompareConfig::CompareConfig()
{
    // Subgradient SVR on ~1000 features; a few thousand steps settle the ranking.
    svr.max_iter = 3000;
    bp.epochs = 1000;
}

nlohmann::json CompareConfig::to_json() const
{
    return {{"mvts", mvts.to_json()},
            {"bp", bp.to_json()},
            {"ann", ann.to_json()},
            {"svr",
             {{"epsilon", svr.epsilon},
              {"C", svr.C},
              {"max_iter", svr.max_iter},
              {"batch_size", svr.batch_size},
              {"seed", svr.seed}}},
            {"period_attribute", period_attribute},
            {"series_fit_fraction", series_fit_fraction},
            {"arima_order", {arima_p, arima_d, arima_q}},
            {"threads", threads}};
}

namespace {

std::vector<double> train_targets(const EncodedDataset& data, const Split& split)
{
    std::vector<double> y;
    for (std::size_t r : split.train) y.push_back(data.target[r]);
    return y;
}

}  // namespace

std::vector<double> svr_baseline(const EncodedDataset& data, const Split& split, const SvrOptions& options)
{
    const Tensor X = tabular_features(data);
    const SvrModel model = fit_svr(X.gather_rows(split.train), train_targets(data, split), options);
    const auto out = predict_svr(model, X.gather_rows(split.test));
    return data.price_scaler.inverse(out);
}

std::vector<double> bp_baseline(const EncodedDataset& data, const Split& split, const BpConfig& config)
{
    if (data.price_scaler.identity())
        throw CompareError("the BP baseline needs normalized targets for its sigmoid output");
    const Tensor X = tabular_features(data);
    auto y = train_targets(data, split);
    for (double& v : y) v = std::clamp(v, 1e-3, 1.0 - 1e-3);
    BaselineModel model = fit_bp(X.gather_rows(split.train), y, config);
    return predict_baseline(model, X.gather_rows(split.test), data.price_scaler);
}

std::vector<double> ann_baseline(const EncodedDataset& data, const Split& split, const AnnConfig& config)
{
    const Tensor X = tabular_features(data);
    BaselineModel model = fit_ann(X.gather_rows(split.train), train_targets(data, split), config);
    return predict_baseline(model, X.gather_rows(split.test), data.price_scaler);
}

CompareResult compare_models(const EncodedDataset& data, std::span<const HouseRecord> records, const Split& split,
                             const CompareConfig& config, const std::string& dataset_id)
{
    if (records.size() != data.rows()) throw CompareError("records and encoded rows differ in number");
    CompareResult result;
    for (std::size_t r : split.test) result.y_test.push_back(data.price[r]);

    const auto variants = branch_variants();
    const auto trained = run_variants(data, nullptr, split, config.mvts, variants, config.threads);
    for (const auto& v : trained) {
        result.predictions.push_back({v.spec.name, v.predictions});
        result.details["histories"][v.spec.name] = v.history.to_json();
    }

    result.predictions.push_back({"SVR", svr_baseline(data, split, config.svr)});
    result.predictions.push_back({"BP", bp_baseline(data, split, config.bp)});
    result.predictions.push_back({"ANN", ann_baseline(data, split, config.ann)});

    const PeriodSeries series = period_mean_series(records, split.train, config.period_attribute);
    const SeriesFit gm = fit_series_model(SeriesModel::gm11, series, config.series_fit_fraction);
    const SeriesFit arima = fit_series_model(SeriesModel::arima, series, config.series_fit_fraction, config.arima_p,
                                             config.arima_d, config.arima_q);
    result.predictions.push_back({"GM", series_predictions(gm, records, split.test, config.period_attribute)});
    result.predictions.push_back({"ARIMA", series_predictions(arima, records, split.test, config.period_attribute)});
    result.details["GM"] = gm.diagnostics;
    result.details["ARIMA"] = arima.diagnostics;
    result.details["series"] = {{"first_period", series.first},
                                {"values", series.values},
                                {"counts", series.counts},
                                {"fit_length", gm.fit_length}};

    result.report = report_table(result.predictions, result.y_test, data.price_scaler,
                                 !data.price_scaler.identity(), config.mvts.seed, dataset_id);
    return result;
}

}  // namespace mvts
