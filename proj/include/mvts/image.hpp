#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvts/dataset.hpp"
#include "mvts/tensor.hpp"

namespace mvts {

class ImageError : public DataError {
public:
    using DataError::DataError;
};

/// 8-bit RGB, interleaved, row-major.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }

    bool operator==(const Image&) const = default;
};

/// Binary PPM (P6) with maxval 255.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

/// Bilinear resize (half-pixel centres) to a 3 x h x w planar array in [0,1].
std::vector<double> resize_bilinear(const Image& image, std::size_t width, std::size_t height);

/// Tiles 4 views row-major into a 2x2 grid: tensor 3 x side x side in [0,1].
Tensor tile_views(std::span<const Image> views, std::size_t side = 128);

/// Reads the record's 4 views (relative refs resolve against `base_dir`).
Tensor load_images(const HouseRecord& record, const std::filesystem::path& base_dir, std::size_t side = 128);

}  // namespace mvts
