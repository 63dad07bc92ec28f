#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mvts/tensor.hpp"

namespace mvts {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

/// A data row failed validation. `row` is 1-based, counting data rows only.
class RowError : public DataError {
public:
    RowError(std::size_t row, const std::string& what);
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class ScalerError : public DataError {
public:
    using DataError::DataError;
};

enum class AttributeKind { numeric, categorical, macro_numeric };

std::string to_string(AttributeKind kind);

struct Attribute {
    std::string name;
    AttributeKind kind = AttributeKind::numeric;
    std::vector<std::string> levels;  // categorical only

    bool is_numeric() const { return kind != AttributeKind::categorical; }
    bool operator==(const Attribute&) const = default;
};

class AttributeSchema {
public:
    AttributeSchema() = default;
    explicit AttributeSchema(std::vector<Attribute> attributes);

    const std::vector<Attribute>& attributes() const { return attributes_; }
    std::size_t size() const { return attributes_.size(); }
    const Attribute& at(std::size_t i) const { return attributes_.at(i); }
    std::optional<std::size_t> find(const std::string& name) const;

    /// Width of the one-hot encoded text block.
    std::size_t encoded_width() const;
    std::vector<std::string> encoded_columns() const;

    nlohmann::json to_json() const;
    static AttributeSchema from_json(const nlohmann::json& j);
    static AttributeSchema load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// FNV-1a over the canonical JSON dump, as 16 hex digits.
    std::string hash() const;

    bool operator==(const AttributeSchema&) const = default;

private:
    std::vector<Attribute> attributes_;
};

using AttributeValue = std::variant<double, std::string>;

struct HouseRecord {
    std::string id;
    std::map<std::string, AttributeValue> values;
    double price = 0.0;
    std::vector<std::string> image_refs;  // 4 views, in order
    std::optional<std::vector<double>> deep_feature;

    double number(const std::string& name) const;
    const std::string& level(const std::string& name) const;

    bool operator==(const HouseRecord&) const = default;
};

/// Checks one record against the schema; throws RowError(row, ...).
void validate_record(const HouseRecord& record, const AttributeSchema& schema, std::size_t row);

std::vector<HouseRecord> load_records(const std::filesystem::path& csv_path, const AttributeSchema& schema);
void write_records(const std::filesystem::path& csv_path, std::span<const HouseRecord> records,
                   const AttributeSchema& schema);

/// Text block: numeric attributes as one column each, categorical as one-hot.
Tensor one_hot_encode(std::span<const HouseRecord> records, const AttributeSchema& schema);
std::vector<double> one_hot_encode(const HouseRecord& record, const AttributeSchema& schema);
std::map<std::string, AttributeValue> one_hot_decode(std::span<const double> row, const AttributeSchema& schema);

/// Per-column min-max scaler. Columns not listed at fit time pass through.
class MinMaxScaler {
public:
    MinMaxScaler() = default;

    /// Fits on `rows` of X (all rows when empty). `names` labels columns in errors.
    static MinMaxScaler fit(const Tensor& X, std::span<const std::size_t> columns,
                            std::span<const std::size_t> rows = {},
                            std::span<const std::string> names = {});

    void apply(Tensor& X) const;
    void inverse(Tensor& X) const;
    double apply(std::size_t column, double value) const;
    double inverse(std::size_t column, double value) const;

    std::size_t width() const { return lo_.size(); }
    bool scaled(std::size_t column) const { return scaled_.at(column) != 0; }

    nlohmann::json to_json() const;
    static MinMaxScaler from_json(const nlohmann::json& j);

private:
    void check_width(const Tensor& X) const;

    std::vector<double> lo_, hi_;
    std::vector<char> scaled_;
};

/// Affine price transform; the identity when constructed without a range.
class PriceScaler {
public:
    PriceScaler() = default;
    PriceScaler(double lo, double hi);

    static PriceScaler fit(std::span<const double> prices, std::span<const std::size_t> rows = {});

    double apply(double price) const { return (price - lo_) / (hi_ - lo_); }
    double inverse(double value) const { return lo_ + (hi_ - lo_) * value; }
    /// d inverse / d value
    double scale() const { return hi_ - lo_; }
    bool identity() const { return lo_ == 0.0 && hi_ == 1.0; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

    std::vector<double> apply(std::span<const double> prices) const;
    std::vector<double> inverse(std::span<const double> values) const;

    nlohmann::json to_json() const;
    static PriceScaler from_json(const nlohmann::json& j);

private:
    double lo_ = 0.0, hi_ = 1.0;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

/// Seeded shuffle; |train| = round(frac * n). Index lists are sorted.
Split split(std::size_t n, double frac = 0.75, std::uint64_t seed = 0);

/// Averages the 4 per-view vectors of each record; rows follow `records`.
Tensor load_deep_features(const std::filesystem::path& csv_path, std::span<const HouseRecord> records,
                          std::size_t dim = 1000);

/// Writes `id,view,f0..` rows; `views` is n x 4 x dim.
void write_deep_features(const std::filesystem::path& csv_path, std::span<const HouseRecord> records,
                         const Tensor& views);

/// Everything loaded for one dataset, before encoding.
struct RawDataset {
    AttributeSchema schema;
    std::vector<HouseRecord> records;
    Tensor images;  // n x 3 x side x side, or empty
    Tensor deep;    // n x 1000, or empty
};

/// Loads records.csv, schema.json, and optionally deep_features.csv and images.
RawDataset load_dataset(const std::filesystem::path& dir, bool with_images, bool with_deep,
                        std::size_t image_side = 128);

struct EncodedDataset {
    AttributeSchema schema;
    std::vector<std::string> ids;
    Tensor text;                 // n x d_text, scaled
    Tensor deep;                 // n x 1000, scaled, or empty
    Tensor images;               // n x 3 x S x S in [0,1], or empty
    std::vector<double> price;   // original units
    std::vector<double> target;  // price_scaler.apply(price)
    MinMaxScaler text_scaler;
    MinMaxScaler deep_scaler;
    PriceScaler price_scaler;
    std::vector<std::size_t> fit_rows;  // rows the scalers were fitted on

    std::size_t rows() const { return price.size(); }
};

/// Encodes and scales; every scaler is fitted on `train_rows` only.
/// With `normalize_prices` false the price scaler is the identity.
EncodedDataset encode_dataset(RawDataset raw, std::span<const std::size_t> train_rows,
                              bool normalize_prices = true);

/// Scales a new set of records with the scalers of an existing encoding.
Tensor encode_text(std::span<const HouseRecord> records, const EncodedDataset& reference);

}  // namespace mvts
