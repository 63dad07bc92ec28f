#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvts/dataset.hpp"
#include "mvts/image.hpp"

namespace mvts {

struct SynthConfig {
    std::size_t n = 500;
    std::uint64_t seed = 1;
    double noise = 0.05;          // noise std as a fraction of price_scale
    double image_weight = 0.8;    // price_scale units per unit of mean brightness
    double price_scale = 1e6;
    std::size_t view_side = 64;   // pixels per stored view
    std::size_t deep_dim = 1000;
};

/// The generating model: price / price_scale =
///   intercept + sum coef * numeric + level offsets + image_weight * brightness + noise.
struct GroundTruth {
    double intercept = 0.0;
    std::map<std::string, double> numeric;
    std::map<std::string, std::map<std::string, double>> levels;
    double image_weight = 0.0;
    double noise = 0.0;
    double price_scale = 1.0;

    nlohmann::json to_json() const;
};

struct SynthDataset {
    SynthConfig config;
    AttributeSchema schema;
    std::vector<HouseRecord> records;
    std::vector<std::array<Image, 4>> views;
    Tensor deep_views;                 // n x 4 x deep_dim
    std::vector<double> brightness;    // realized mean brightness in [0,1]
    std::vector<double> clean_price;   // price before noise
    GroundTruth truth;
};

/// Throws DataError for n < 20.
SynthDataset synth_generate(const SynthConfig& config);

/// The synthetic schema: 4 numeric, 3 categorical, 1 macro-numeric attribute.
AttributeSchema synth_schema();

/// Name of the month attribute used as the time axis.
inline constexpr const char* synth_period_attribute = "出售时间";

/// Writes records.csv, schema.json, images/, deep_features.csv and ground_truth.json.
void write_synth(const SynthDataset& data, const std::filesystem::path& out_dir);

/// In-memory equivalent of write_synth followed by load_dataset.
RawDataset to_raw_dataset(const SynthDataset& data, std::size_t image_side = 128, bool with_images = true,
                          bool with_deep = true);

}  // namespace mvts
