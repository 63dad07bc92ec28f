#include "mvts/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "mvts/text_io.hpp"

namespace mvts {

namespace {

const char* const attr_area = "建筑面积";
const char* const attr_rooms = "室";
const char* const attr_year = "建造年份";
const char* const attr_layout = "户型结构";
const char* const attr_lift = "是否有电梯";
const char* const attr_decor = "装修情况";
const char* const attr_cpi = "CPI";

double quantize(double v, double step)
{
    return std::round(v / step) * step;
}

double cpi_of_month(double month)
{
    return quantize(100.0 + 0.12 * month + 0.5 * std::sin(month / 3.0), 0.01);
}

std::string record_id(std::size_t i)
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "h%04zu", i + 1);
    return buf;
}

}  // namespace

nlohmann::json GroundTruth::to_json() const
{
    return {{"intercept", intercept}, {"numeric", numeric},         {"levels", levels},
            {"image_weight", image_weight}, {"noise", noise}, {"price_scale", price_scale}};
}

AttributeSchema synth_schema()
{
    return AttributeSchema({
        {attr_area, AttributeKind::numeric, {}},
        {attr_rooms, AttributeKind::numeric, {}},
        {attr_year, AttributeKind::numeric, {}},
        {synth_period_attribute, AttributeKind::numeric, {}},
        {attr_layout, AttributeKind::categorical, {"平层", "复式", "错层"}},
        {attr_lift, AttributeKind::categorical, {"无", "有"}},
        {attr_decor, AttributeKind::categorical, {"简装", "精装", "其他"}},
        {attr_cpi, AttributeKind::macro_numeric, {}},
    });
}

SynthDataset synth_generate(const SynthConfig& config)
{
    if (config.n < 20) throw DataError("synthetic dataset needs n >= 20, got " + std::to_string(config.n));
    if (config.noise < 0.0) throw DataError("noise fraction must be nonnegative");
    if (config.view_side < 1) throw DataError("view side must be positive");
    if (config.deep_dim < 1) throw DataError("deep feature width must be positive");

    SynthDataset out;
    out.config = config;
    out.schema = synth_schema();

    GroundTruth& t = out.truth;
    t.numeric = {{attr_area, 0.006}, {attr_rooms, 0.04}, {attr_year, 0.006},
                 {synth_period_attribute, 0.008}, {attr_cpi, 0.02}};
    t.intercept = 0.2 - 0.006 * 1985.0 - 0.02 * 100.0;
    t.levels = {{attr_layout, {{"平层", 0.0}, {"复式", 0.12}, {"错层", 0.05}}},
                {attr_lift, {{"无", 0.0}, {"有", 0.08}}},
                {attr_decor, {{"简装", 0.0}, {"精装", 0.15}, {"其他", 0.04}}}};
    t.image_weight = config.image_weight;
    t.noise = config.noise;
    t.price_scale = config.price_scale;

    std::mt19937_64 rng(config.seed);
    std::mt19937_64 basis_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    const std::size_t dim = config.deep_dim;
    std::vector<double> basis_a(dim), basis_c(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        basis_a[k] = gauss(basis_rng);
        basis_c[k] = gauss(basis_rng);
    }

    out.deep_views = Tensor({config.n, 4, dim});
    const auto& layouts = out.schema.at(4).levels;
    const auto& lifts = out.schema.at(5).levels;
    const auto& decors = out.schema.at(6).levels;

    for (std::size_t i = 0; i < config.n; ++i) {
        HouseRecord r;
        r.id = record_id(i);
        const double area = quantize(40.0 + 140.0 * unit(rng), 0.01);
        const double rooms = uniform_int(1, 5);
        const double year = uniform_int(1985, 2020);
        const double month = uniform_int(0, 35);
        const std::string& layout = layouts[static_cast<std::size_t>(uniform_int(0, 2))];
        const std::string& lift = lifts[static_cast<std::size_t>(uniform_int(0, 1))];
        const std::string& decor = decors[static_cast<std::size_t>(uniform_int(0, 2))];
        const double cpi = cpi_of_month(month);
        r.values = {{attr_area, area},       {attr_rooms, rooms},   {attr_year, year},
                    {synth_period_attribute, month}, {attr_layout, layout}, {attr_lift, lift},
                    {attr_decor, decor},     {attr_cpi, cpi}};

        // Four solid-colour views scattered around a per-house brightness.
        const double base = 0.1 + 0.8 * unit(rng);
        std::array<Image, 4> views;
        double brightness = 0.0;
        for (std::size_t v = 0; v < 4; ++v) {
            const double gray = std::clamp(base + 0.04 * gauss(rng), 0.03, 0.97);
            std::uint8_t px[3];
            double view_mean = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double value = std::clamp(gray + 0.12 * (unit(rng) - 0.5), 0.0, 1.0);
                px[c] = static_cast<std::uint8_t>(std::lround(255.0 * value));
                view_mean += px[c] / 255.0 / 3.0;
            }
            views[v] = Image(config.view_side, config.view_side, px[0], px[1], px[2]);
            brightness += view_mean / 4.0;

            const double style = gauss(rng);
            double* deep = out.deep_views.data() + (i * 4 + v) * dim;
            for (std::size_t k = 0; k < dim; ++k)
                deep[k] = quantize(4.0 * (view_mean - 0.5) * basis_a[k] + 0.5 * style * basis_c[k] +
                                       0.05 * gauss(rng),
                                   1e-4);
            r.image_refs.push_back("images/" + r.id + "_" + std::to_string(v + 1) + ".ppm");
        }

        double unit_price = t.intercept + t.image_weight * brightness;
        for (const auto& [name, coef] : t.numeric) unit_price += coef * r.number(name);
        for (const auto& [name, offsets] : t.levels) unit_price += offsets.at(r.level(name));
        const double clean = config.price_scale * unit_price;
        const double noisy = clean + config.noise * config.price_scale * gauss(rng);
        // Prices are whole currency units; the floor keeps them strictly positive.
        r.price = std::max(std::round(noisy), 0.05 * config.price_scale);

        out.records.push_back(std::move(r));
        out.views.push_back(std::move(views));
        out.brightness.push_back(brightness);
        out.clean_price.push_back(clean);
    }
    return out;
}

void write_synth(const SynthDataset& data, const std::filesystem::path& out_dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (ec) throw DataError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
    data.schema.save(out_dir / "schema.json");
    write_records(out_dir / "records.csv", data.records, data.schema);
    for (std::size_t i = 0; i < data.records.size(); ++i)
        for (std::size_t v = 0; v < 4; ++v) write_ppm(out_dir / data.records[i].image_refs[v], data.views[i][v]);
    write_deep_features(out_dir / "deep_features.csv", data.records, data.deep_views);

    nlohmann::json j = data.truth.to_json();
    j["n"] = data.config.n;
    j["seed"] = data.config.seed;
    j["view_side"] = data.config.view_side;
    j["deep_dim"] = data.config.deep_dim;
    write_text(out_dir / "ground_truth.json", j.dump(2) + "\n");
}

RawDataset to_raw_dataset(const SynthDataset& data, std::size_t image_side, bool with_images, bool with_deep)
{
    RawDataset raw;
    raw.schema = data.schema;
    raw.records = data.records;
    const std::size_t n = data.records.size();
    if (with_deep) {
        const std::size_t dim = data.deep_views.dim(2);
        raw.deep = Tensor({n, dim});
        // Same summation order as load_deep_features, so both paths agree bitwise.
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t v = 0; v < 4; ++v)
                for (std::size_t k = 0; k < dim; ++k)
                    raw.deep.at(i, k) += 0.25 * data.deep_views[(i * 4 + v) * dim + k];
    }
    if (with_images) {
        const std::size_t plane = 3 * image_side * image_side;
        raw.images = Tensor({n, 3, image_side, image_side});
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor img = tile_views(data.views[i], image_side);
            std::copy(img.values().begin(), img.values().end(), raw.images.data() + i * plane);
        }
    }
    return raw;
}

}  // namespace mvts
