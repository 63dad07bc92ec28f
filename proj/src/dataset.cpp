#include "mvts/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mvts/image.hpp"
#include "mvts/text_io.hpp"

namespace mvts {

namespace {

constexpr const char* image_columns[4] = {"img_1", "img_2", "img_3", "img_4"};

AttributeKind parse_kind(const std::string& s)
{
    if (s == "numeric") return AttributeKind::numeric;
    if (s == "categorical") return AttributeKind::categorical;
    if (s == "macro-numeric") return AttributeKind::macro_numeric;
    throw SchemaError("unknown attribute kind '" + s + "' (expected numeric, categorical or macro-numeric)");
}

std::string join(const std::vector<std::string>& items, const char* sep)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i != 0) out += sep;
        out += items[i];
    }
    return out;
}

// Comma split without quote handling, for the wide numeric deep-feature file.
void split_plain(std::string_view line, std::vector<std::string_view>& out)
{
    out.clear();
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

RowError::RowError(std::size_t row, const std::string& what)
    : DataError("row " + std::to_string(row) + ": " + what), row_(row)
{
}

std::string to_string(AttributeKind kind)
{
    switch (kind) {
    case AttributeKind::numeric: return "numeric";
    case AttributeKind::categorical: return "categorical";
    case AttributeKind::macro_numeric: return "macro-numeric";
    }
    return "?";
}

// ---------------------------------------------------------------- schema

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes))
{
    if (attributes_.empty()) throw SchemaError("schema has no attributes");
    std::set<std::string> names;
    for (const Attribute& a : attributes_) {
        if (a.name.empty()) throw SchemaError("attribute with empty name");
        if (a.name == "id" || a.name == "price" ||
            std::find(std::begin(image_columns), std::end(image_columns), a.name) != std::end(image_columns))
            throw SchemaError("attribute name '" + a.name + "' collides with a reserved column");
        if (!names.insert(a.name).second) throw SchemaError("duplicate attribute name '" + a.name + "'");
        if (a.kind == AttributeKind::categorical) {
            if (a.levels.empty()) throw SchemaError("categorical attribute '" + a.name + "' has no levels");
            std::set<std::string> seen;
            for (const auto& l : a.levels)
                if (!seen.insert(l).second)
                    throw SchemaError("attribute '" + a.name + "' repeats level '" + l + "'");
        } else if (!a.levels.empty()) {
            throw SchemaError("numeric attribute '" + a.name + "' must not declare levels");
        }
    }
}

std::optional<std::size_t> AttributeSchema::find(const std::string& name) const
{
    for (std::size_t i = 0; i < attributes_.size(); ++i)
        if (attributes_[i].name == name) return i;
    return std::nullopt;
}

std::size_t AttributeSchema::encoded_width() const
{
    std::size_t w = 0;
    for (const auto& a : attributes_) w += a.is_numeric() ? 1 : a.levels.size();
    return w;
}

std::vector<std::string> AttributeSchema::encoded_columns() const
{
    std::vector<std::string> out;
    for (const auto& a : attributes_) {
        if (a.is_numeric())
            out.push_back(a.name);
        else
            for (const auto& l : a.levels) out.push_back(a.name + "=" + l);
    }
    return out;
}

nlohmann::json AttributeSchema::to_json() const
{
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& a : attributes_) {
        nlohmann::json j = {{"name", a.name}, {"kind", to_string(a.kind)}};
        if (a.kind == AttributeKind::categorical) j["levels"] = a.levels;
        attrs.push_back(std::move(j));
    }
    return {{"attributes", attrs}};
}

AttributeSchema AttributeSchema::from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("attributes") || !j["attributes"].is_array())
        throw SchemaError("schema JSON must be an object with an 'attributes' array");
    for (const auto& [key, _] : j.items())
        if (key != "attributes") throw SchemaError("unknown schema key '" + key + "'");
    std::vector<Attribute> attrs;
    for (const auto& item : j["attributes"]) {
        if (!item.is_object()) throw SchemaError("schema attribute entries must be objects");
        for (const auto& [key, _] : item.items())
            if (key != "name" && key != "kind" && key != "levels")
                throw SchemaError("unknown attribute key '" + key + "'");
        if (!item.contains("name") || !item["name"].is_string()) throw SchemaError("attribute without a name");
        if (!item.contains("kind") || !item["kind"].is_string())
            throw SchemaError("attribute '" + item["name"].get<std::string>() + "' has no kind");
        Attribute a;
        a.name = item["name"].get<std::string>();
        a.kind = parse_kind(item["kind"].get<std::string>());
        if (item.contains("levels")) {
            if (!item["levels"].is_array()) throw SchemaError("levels of '" + a.name + "' must be an array");
            for (const auto& l : item["levels"]) {
                if (!l.is_string()) throw SchemaError("levels of '" + a.name + "' must be strings");
                a.levels.push_back(l.get<std::string>());
            }
        }
        attrs.push_back(std::move(a));
    }
    return AttributeSchema(std::move(attrs));
}

AttributeSchema AttributeSchema::load(const std::filesystem::path& path)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": invalid JSON: " + e.what());
    }
    return from_json(j);
}

void AttributeSchema::save(const std::filesystem::path& path) const
{
    write_text(path, to_json().dump(2) + "\n");
}

std::string AttributeSchema::hash() const
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : to_json().dump()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------- records

double HouseRecord::number(const std::string& name) const
{
    const auto it = values.find(name);
    if (it == values.end()) throw DataError("record " + id + " has no attribute '" + name + "'");
    if (const double* v = std::get_if<double>(&it->second)) return *v;
    throw DataError("attribute '" + name + "' of record " + id + " is not numeric");
}

const std::string& HouseRecord::level(const std::string& name) const
{
    const auto it = values.find(name);
    if (it == values.end()) throw DataError("record " + id + " has no attribute '" + name + "'");
    if (const std::string* v = std::get_if<std::string>(&it->second)) return *v;
    throw DataError("attribute '" + name + "' of record " + id + " is not categorical");
}

void validate_record(const HouseRecord& record, const AttributeSchema& schema, std::size_t row)
{
    if (record.id.empty()) throw RowError(row, "empty id");
    if (!(record.price > 0.0)) throw RowError(row, "price must be positive");
    if (record.image_refs.size() != 4)
        throw RowError(row, "expected 4 image references, got " + std::to_string(record.image_refs.size()));
    if (record.deep_feature && record.deep_feature->size() != 1000)
        throw RowError(row, "deep feature has length " + std::to_string(record.deep_feature->size()) +
                                ", expected 1000");
    for (const auto& a : schema.attributes()) {
        const auto it = record.values.find(a.name);
        if (it == record.values.end()) throw RowError(row, "missing attribute '" + a.name + "'");
        if (a.is_numeric()) {
            if (!std::holds_alternative<double>(it->second))
                throw RowError(row, "attribute '" + a.name + "' must be numeric");
        } else {
            const std::string* level = std::get_if<std::string>(&it->second);
            if (level == nullptr) throw RowError(row, "attribute '" + a.name + "' must be a level label");
            if (std::find(a.levels.begin(), a.levels.end(), *level) == a.levels.end())
                throw RowError(row, "attribute '" + a.name + "': unknown level '" + *level + "' (levels: " +
                                        join(a.levels, ", ") + ")");
        }
    }
    if (record.values.size() != schema.size()) throw RowError(row, "record carries attributes not in the schema");
}

std::vector<HouseRecord> load_records(const std::filesystem::path& csv_path, const AttributeSchema& schema)
{
    std::istringstream in(read_text(csv_path));
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(csv_path.string() + ": empty file");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (!index.emplace(header[i], i).second) throw SchemaError("duplicate column '" + header[i] + "'");

    std::vector<std::string> expected = {"id", "price"};
    for (const auto& a : schema.attributes()) expected.push_back(a.name);
    for (const char* c : image_columns) expected.emplace_back(c);
    for (const auto& name : expected)
        if (!index.count(name)) throw SchemaError(csv_path.string() + ": missing column '" + name + "'");
    for (const auto& name : header)
        if (std::find(expected.begin(), expected.end(), name) == expected.end())
            throw SchemaError(csv_path.string() + ": unexpected column '" + name + "'");

    std::vector<HouseRecord> records;
    std::set<std::string> ids;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw RowError(row, "expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(fields.size()));
        HouseRecord r;
        r.id = fields[index.at("id")];
        if (!ids.insert(r.id).second) throw RowError(row, "duplicate id '" + r.id + "'");
        const auto price = parse_double(fields[index.at("price")]);
        if (!price) throw RowError(row, "cannot parse price '" + fields[index.at("price")] + "'");
        r.price = *price;
        for (const auto& a : schema.attributes()) {
            const std::string& text = fields[index.at(a.name)];
            if (a.is_numeric()) {
                const auto v = parse_double(text);
                if (!v) throw RowError(row, "attribute '" + a.name + "': cannot parse '" + text + "' as a number");
                r.values.emplace(a.name, *v);
            } else {
                r.values.emplace(a.name, text);
            }
        }
        for (const char* c : image_columns) {
            const std::string& ref = fields[index.at(c)];
            if (ref.empty()) throw RowError(row, std::string("missing image reference ") + c);
            r.image_refs.push_back(ref);
        }
        validate_record(r, schema, row);
        records.push_back(std::move(r));
    }
    return records;
}

void write_records(const std::filesystem::path& csv_path, std::span<const HouseRecord> records,
                   const AttributeSchema& schema)
{
    std::string out = "id,price";
    for (const auto& a : schema.attributes()) out += "," + csv_field(a.name);
    for (const char* c : image_columns) out += std::string(",") + c;
    out += "\n";
    std::size_t row = 0;
    for (const auto& r : records) {
        validate_record(r, schema, ++row);
        out += csv_field(r.id) + "," + format_double(r.price);
        for (const auto& a : schema.attributes()) {
            out += ",";
            out += a.is_numeric() ? format_double(r.number(a.name)) : csv_field(r.level(a.name));
        }
        for (const auto& ref : r.image_refs) out += "," + csv_field(ref);
        out += "\n";
    }
    write_text(csv_path, out);
}

// ---------------------------------------------------------------- one-hot

std::vector<double> one_hot_encode(const HouseRecord& record, const AttributeSchema& schema)
{
    std::vector<double> out;
    out.reserve(schema.encoded_width());
    for (const auto& a : schema.attributes()) {
        if (a.is_numeric()) {
            out.push_back(record.number(a.name));
            continue;
        }
        const std::string& level = record.level(a.name);
        const auto it = std::find(a.levels.begin(), a.levels.end(), level);
        if (it == a.levels.end())
            throw DataError("record " + record.id + ": attribute '" + a.name + "' has unseen level '" + level + "'");
        for (auto l = a.levels.begin(); l != a.levels.end(); ++l) out.push_back(l == it ? 1.0 : 0.0);
    }
    return out;
}

Tensor one_hot_encode(std::span<const HouseRecord> records, const AttributeSchema& schema)
{
    if (records.empty()) throw DataError("no records to encode");
    const std::size_t d = schema.encoded_width();
    Tensor out({records.size(), d});
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto row = one_hot_encode(records[i], schema);
        std::copy(row.begin(), row.end(), out.row(i).begin());
    }
    return out;
}

std::map<std::string, AttributeValue> one_hot_decode(std::span<const double> row, const AttributeSchema& schema)
{
    if (row.size() != schema.encoded_width())
        throw DataError("encoded row has width " + std::to_string(row.size()) + ", schema expects " +
                        std::to_string(schema.encoded_width()));
    std::map<std::string, AttributeValue> out;
    std::size_t c = 0;
    for (const auto& a : schema.attributes()) {
        if (a.is_numeric()) {
            out.emplace(a.name, row[c++]);
            continue;
        }
        std::optional<std::size_t> hot;
        for (std::size_t k = 0; k < a.levels.size(); ++k) {
            const double v = row[c + k];
            if (v == 1.0 && !hot)
                hot = k;
            else if (v != 0.0)
                throw DataError("one-hot block of '" + a.name + "' is not a valid indicator");
        }
        if (!hot) throw DataError("one-hot block of '" + a.name + "' has no set entry");
        out.emplace(a.name, a.levels[*hot]);
        c += a.levels.size();
    }
    return out;
}

// ---------------------------------------------------------------- scalers

MinMaxScaler MinMaxScaler::fit(const Tensor& X, std::span<const std::size_t> columns,
                               std::span<const std::size_t> rows, std::span<const std::string> names)
{
    if (X.rank() != 2) throw ScalerError("min-max scaler expects a matrix");
    const std::size_t n = X.dim(0), d = X.dim(1);
    std::vector<std::size_t> all_rows;
    if (rows.empty()) {
        all_rows.resize(n);
        std::iota(all_rows.begin(), all_rows.end(), 0);
        rows = all_rows;
    }
    MinMaxScaler s;
    s.lo_.assign(d, 0.0);
    s.hi_.assign(d, 1.0);
    s.scaled_.assign(d, 0);
    for (std::size_t c : columns) {
        if (c >= d) throw ScalerError("column index " + std::to_string(c) + " out of range");
        double lo = X.at(rows[0], c), hi = lo;
        for (std::size_t r : rows) {
            if (r >= n) throw ScalerError("row index " + std::to_string(r) + " out of range");
            lo = std::min(lo, X.at(r, c));
            hi = std::max(hi, X.at(r, c));
        }
        if (!(hi > lo)) {
            const std::string name = c < names.size() ? names[c] : "#" + std::to_string(c);
            throw ScalerError("column '" + name + "' is constant on the fitting rows");
        }
        s.lo_[c] = lo;
        s.hi_[c] = hi;
        s.scaled_[c] = 1;
    }
    return s;
}

void MinMaxScaler::check_width(const Tensor& X) const
{
    if (X.rank() != 2 || X.dim(1) != lo_.size())
        throw ScalerError("scaler fitted on " + std::to_string(lo_.size()) + " columns, got " +
                          shape_string(X.shape()));
}

double MinMaxScaler::apply(std::size_t c, double v) const
{
    return scaled_.at(c) ? (v - lo_[c]) / (hi_[c] - lo_[c]) : v;
}

double MinMaxScaler::inverse(std::size_t c, double v) const
{
    return scaled_.at(c) ? lo_[c] + (hi_[c] - lo_[c]) * v : v;
}

void MinMaxScaler::apply(Tensor& X) const
{
    check_width(X);
    const std::size_t d = lo_.size();
    for (std::size_t i = 0; i < X.size(); ++i) X[i] = apply(i % d, X[i]);
}

void MinMaxScaler::inverse(Tensor& X) const
{
    check_width(X);
    const std::size_t d = lo_.size();
    for (std::size_t i = 0; i < X.size(); ++i) X[i] = inverse(i % d, X[i]);
}

nlohmann::json MinMaxScaler::to_json() const
{
    std::vector<int> scaled(scaled_.begin(), scaled_.end());
    return {{"lo", lo_}, {"hi", hi_}, {"scaled", scaled}};
}

MinMaxScaler MinMaxScaler::from_json(const nlohmann::json& j)
{
    MinMaxScaler s;
    s.lo_ = j.at("lo").get<std::vector<double>>();
    s.hi_ = j.at("hi").get<std::vector<double>>();
    for (int v : j.at("scaled").get<std::vector<int>>()) s.scaled_.push_back(v != 0);
    if (s.lo_.size() != s.hi_.size() || s.lo_.size() != s.scaled_.size())
        throw ScalerError("inconsistent min-max scaler JSON");
    return s;
}

PriceScaler::PriceScaler(double lo, double hi) : lo_(lo), hi_(hi)
{
    if (!(hi > lo)) throw ScalerError("price range is empty");
}

PriceScaler PriceScaler::fit(std::span<const double> prices, std::span<const std::size_t> rows)
{
    if (prices.empty()) throw ScalerError("no prices to fit");
    double lo = prices[rows.empty() ? 0 : rows[0]], hi = lo;
    auto visit = [&](double p) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    };
    if (rows.empty())
        for (double p : prices) visit(p);
    else
        for (std::size_t r : rows) visit(prices[r]);
    if (!(hi > lo)) throw ScalerError("column 'price' is constant on the fitting rows");
    return PriceScaler(lo, hi);
}

std::vector<double> PriceScaler::apply(std::span<const double> prices) const
{
    std::vector<double> out(prices.size());
    std::transform(prices.begin(), prices.end(), out.begin(), [this](double p) { return apply(p); });
    return out;
}

std::vector<double> PriceScaler::inverse(std::span<const double> values) const
{
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [this](double v) { return inverse(v); });
    return out;
}

nlohmann::json PriceScaler::to_json() const
{
    return {{"lo", lo_}, {"hi", hi_}};
}

PriceScaler PriceScaler::from_json(const nlohmann::json& j)
{
    return PriceScaler(j.at("lo").get<double>(), j.at("hi").get<double>());
}

// ---------------------------------------------------------------- split

Split split(std::size_t n, double frac, std::uint64_t seed)
{
    if (n < 4) throw DataError("split needs at least 4 rows, got " + std::to_string(n));
    if (!(frac > 0.0 && frac < 1.0)) throw DataError("split fraction must lie in (0, 1)");
    const auto n_train = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
    if (n_train == 0 || n_train == n) throw DataError("split fraction leaves one side empty");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    Split s;
    s.seed = seed;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// ---------------------------------------------------------------- deep features

Tensor load_deep_features(const std::filesystem::path& csv_path, std::span<const HouseRecord> records,
                          std::size_t dim)
{
    if (records.empty()) throw DataError("no records to align deep features with");
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < records.size(); ++i) row_of.emplace(records[i].id, i);

    std::istringstream in(read_text(csv_path));
    std::string line;
    if (!std::getline(in, line)) throw DataError(csv_path.string() + ": empty file");
    std::vector<std::string_view> f;
    split_plain(line, f);
    if (f.size() < 2 || f[0] != "id" || f[1] != "view")
        throw DataError(csv_path.string() + ": header must start with id,view");
    if (f.size() - 2 != dim)
        throw DataError(csv_path.string() + ": header declares " + std::to_string(f.size() - 2) +
                        " feature columns, expected " + std::to_string(dim));
    for (std::size_t k = 0; k < dim; ++k)
        if (f[k + 2] != "f" + std::to_string(k))
            throw DataError(csv_path.string() + ": feature column " + std::to_string(k) + " must be named f" +
                            std::to_string(k));

    Tensor out({records.size(), dim});
    std::unordered_map<std::string, unsigned> views_seen;  // bitmask of views 1..4
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        split_plain(line, f);
        if (f.size() != dim + 2)
            throw RowError(row, "deep feature vector has length " + std::to_string(f.size() < 2 ? 0 : f.size() - 2) +
                                    ", expected " + std::to_string(dim));
        const std::string id(f[0]);
        const auto view = parse_double(f[1]);
        if (!view || (*view != 1 && *view != 2 && *view != 3 && *view != 4))
            throw RowError(row, "view must be 1, 2, 3 or 4");
        unsigned& mask = views_seen[id];
        const unsigned bit = 1u << static_cast<unsigned>(*view - 1);
        if (mask & bit) throw RowError(row, "id '" + id + "' repeats view " + std::string(f[1]));
        mask |= bit;
        const auto it = row_of.find(id);
        for (std::size_t k = 0; k < dim; ++k) {
            const auto v = parse_double(f[k + 2]);
            if (!v) throw RowError(row, "feature f" + std::to_string(k) + " is not a number");
            if (it != row_of.end()) out.at(it->second, k) += 0.25 * *v;
        }
    }
    for (const auto& [id, mask] : views_seen)
        if (mask != 0xF) {
            const int count = __builtin_popcount(mask);
            throw DataError("id '" + id + "' has " + std::to_string(count) + " view rows, expected 4");
        }
    for (const auto& r : records)
        if (!views_seen.count(r.id)) throw DataError("no deep features for record '" + r.id + "'");
    return out;
}

void write_deep_features(const std::filesystem::path& csv_path, std::span<const HouseRecord> records,
                         const Tensor& views)
{
    if (views.rank() != 3 || views.dim(0) != records.size() || views.dim(1) != 4)
        throw DataError("deep feature views must be n x 4 x dim");
    const std::size_t dim = views.dim(2);
    std::string out = "id,view";
    for (std::size_t k = 0; k < dim; ++k) out += ",f" + std::to_string(k);
    out += "\n";
    for (std::size_t i = 0; i < records.size(); ++i)
        for (std::size_t v = 0; v < 4; ++v) {
            out += csv_field(records[i].id) + "," + std::to_string(v + 1);
            const double* x = views.data() + (i * 4 + v) * dim;
            for (std::size_t k = 0; k < dim; ++k) {
                out += ',';
                out += format_double(x[k]);
            }
            out += "\n";
        }
    write_text(csv_path, out);
}

// ---------------------------------------------------------------- assembly

RawDataset load_dataset(const std::filesystem::path& dir, bool with_images, bool with_deep, std::size_t image_side)
{
    RawDataset raw;
    raw.schema = AttributeSchema::load(dir / "schema.json");
    raw.records = load_records(dir / "records.csv", raw.schema);
    if (raw.records.empty()) throw DataError((dir / "records.csv").string() + ": no data rows");
    if (with_deep) raw.deep = load_deep_features(dir / "deep_features.csv", raw.records);
    if (with_images) {
        const std::size_t plane = 3 * image_side * image_side;
        raw.images = Tensor({raw.records.size(), 3, image_side, image_side});
        for (std::size_t i = 0; i < raw.records.size(); ++i) {
            const Tensor img = load_images(raw.records[i], dir, image_side);
            std::copy(img.values().begin(), img.values().end(), raw.images.data() + i * plane);
        }
    }
    return raw;
}

EncodedDataset encode_dataset(RawDataset raw, std::span<const std::size_t> train_rows, bool normalize_prices)
{
    const std::size_t n = raw.records.size();
    if (n == 0) throw DataError("dataset has no records");
    if (train_rows.empty()) throw DataError("no training rows to fit scalers on");
    for (std::size_t r : train_rows)
        if (r >= n) throw DataError("training row " + std::to_string(r) + " out of range");

    EncodedDataset ds;
    ds.schema = raw.schema;
    ds.fit_rows.assign(train_rows.begin(), train_rows.end());
    for (std::size_t i = 0; i < n; ++i) {
        validate_record(raw.records[i], raw.schema, i + 1);
        ds.ids.push_back(raw.records[i].id);
        ds.price.push_back(raw.records[i].price);
    }

    ds.text = one_hot_encode(raw.records, raw.schema);
    std::vector<std::size_t> numeric_cols;
    std::size_t c = 0;
    for (const auto& a : raw.schema.attributes()) {
        if (a.is_numeric()) numeric_cols.push_back(c);
        c += a.is_numeric() ? 1 : a.levels.size();
    }
    const auto names = raw.schema.encoded_columns();
    ds.text_scaler = MinMaxScaler::fit(ds.text, numeric_cols, train_rows, names);
    ds.text_scaler.apply(ds.text);

    if (raw.deep.empty() && raw.records.front().deep_feature) {
        raw.deep = Tensor({n, 1000});
        for (std::size_t i = 0; i < n; ++i) {
            if (!raw.records[i].deep_feature) throw DataError("record " + raw.records[i].id + " lacks a deep feature");
            std::copy(raw.records[i].deep_feature->begin(), raw.records[i].deep_feature->end(), raw.deep.row(i).begin());
        }
    }
    if (!raw.deep.empty()) {
        if (raw.deep.rank() != 2 || raw.deep.dim(0) != n) throw DataError("deep feature rows do not match records");
        std::vector<std::size_t> cols(raw.deep.dim(1));
        std::iota(cols.begin(), cols.end(), 0);
        std::vector<std::string> deep_names;
        for (std::size_t k = 0; k < cols.size(); ++k) deep_names.push_back("f" + std::to_string(k));
        ds.deep_scaler = MinMaxScaler::fit(raw.deep, cols, train_rows, deep_names);
        ds.deep = std::move(raw.deep);
        ds.deep_scaler.apply(ds.deep);
    }
    if (!raw.images.empty()) {
        if (raw.images.rank() != 4 || raw.images.dim(0) != n) throw DataError("image rows do not match records");
        ds.images = std::move(raw.images);
    }

    ds.price_scaler = normalize_prices ? PriceScaler::fit(ds.price, train_rows) : PriceScaler();
    ds.target = ds.price_scaler.apply(ds.price);
    return ds;
}

Tensor encode_text(std::span<const HouseRecord> records, const EncodedDataset& reference)
{
    std::size_t row = 0;
    for (const auto& r : records) validate_record(r, reference.schema, ++row);
    Tensor X = one_hot_encode(records, reference.schema);
    reference.text_scaler.apply(X);
    return X;
}

}  // namespace mvts
