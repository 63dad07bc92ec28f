#include "mvts/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace mvts {

Image::Image(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h), rgb(w * h * 3)
{
    for (std::size_t i = 0; i < w * h; ++i) {
        rgb[3 * i] = r;
        rgb[3 * i + 1] = g;
        rgb[3 * i + 2] = b;
    }
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::vector<char>& bytes, std::size_t& pos)
{
    while (pos < bytes.size()) {
        const unsigned char c = static_cast<unsigned char>(bytes[pos]);
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(c)) {
            ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) tok += bytes[pos++];
    return tok;
}

std::size_t header_number(const std::vector<char>& bytes, std::size_t& pos, const std::string& path)
{
    const std::string tok = next_token(bytes, pos);
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
        tok.size() > 9)
        throw ImageError(path + ": malformed PPM header");
    return std::stoul(tok);
}

}  // namespace

Image read_ppm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError(path.string() + ": cannot open image");
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    if (next_token(bytes, pos) != "P6") throw ImageError(path.string() + ": not a binary PPM (P6)");
    Image img;
    img.width = header_number(bytes, pos, path.string());
    img.height = header_number(bytes, pos, path.string());
    const std::size_t maxval = header_number(bytes, pos, path.string());
    if (img.width == 0 || img.height == 0) throw ImageError(path.string() + ": zero image size");
    if (maxval != 255) throw ImageError(path.string() + ": maxval must be 255");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw ImageError(path.string() + ": malformed PPM header");
    ++pos;
    const std::size_t need = img.width * img.height * 3;
    if (bytes.size() - pos < need) throw ImageError(path.string() + ": truncated pixel data");
    img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image)
{
    if (image.rgb.size() != image.width * image.height * 3) throw ImageError("image buffer size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageError(path.string() + ": cannot write image");
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
    if (!out) throw ImageError(path.string() + ": write failed");
}

std::vector<double> resize_bilinear(const Image& image, std::size_t width, std::size_t height)
{
    if (image.width == 0 || image.height == 0 || width == 0 || height == 0)
        throw ImageError("resize needs nonempty source and target");
    struct Tap {
        std::size_t i0, i1;
        double f;
    };
    auto taps = [](std::size_t out, std::size_t in) {
        std::vector<Tap> t(out);
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (std::size_t o = 0; o < out; ++o) {
            const double src = std::clamp((static_cast<double>(o) + 0.5) * scale - 0.5, 0.0,
                                          static_cast<double>(in - 1));
            const auto i0 = static_cast<std::size_t>(std::floor(src));
            t[o] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
        }
        return t;
    };
    const auto tx = taps(width, image.width);
    const auto ty = taps(height, image.height);
    std::vector<double> out(3 * width * height);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                const Tap& a = tx[x];
                const Tap& b = ty[y];
                const double top = (1.0 - a.f) * image.at(a.i0, b.i0, c) + a.f * image.at(a.i1, b.i0, c);
                const double bottom = (1.0 - a.f) * image.at(a.i0, b.i1, c) + a.f * image.at(a.i1, b.i1, c);
                out[(c * height + y) * width + x] = ((1.0 - b.f) * top + b.f * bottom) / 255.0;
            }
    return out;
}

Tensor tile_views(std::span<const Image> views, std::size_t side)
{
    if (views.size() != 4) throw ImageError("expected 4 views, got " + std::to_string(views.size()));
    if (side < 2 || side % 2 != 0) throw ImageError("image side must be even and at least 2");
    const std::size_t half = side / 2;
    Tensor out({3, side, side});
    for (std::size_t v = 0; v < 4; ++v) {
        const auto tile = resize_bilinear(views[v], half, half);
        const std::size_t oy = (v / 2) * half, ox = (v % 2) * half;
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < half; ++y)
                std::copy_n(tile.data() + (c * half + y) * half, half,
                            out.data() + (c * side + oy + y) * side + ox);
    }
    return out;
}

Tensor load_images(const HouseRecord& record, const std::filesystem::path& base_dir, std::size_t side)
{
    if (record.image_refs.size() != 4)
        throw ImageError("record " + record.id + ": expected 4 image references, got " +
                         std::to_string(record.image_refs.size()));
    std::vector<Image> views;
    for (std::size_t v = 0; v < 4; ++v) {
        std::filesystem::path p = record.image_refs[v];
        if (p.is_relative()) p = base_dir / p;
        try {
            views.push_back(read_ppm(p));
        } catch (const ImageError& e) {
            throw ImageError("record " + record.id + ": view img_" + std::to_string(v + 1) + ": " + e.what());
        }
    }
    return tile_views(views, side);
}

}  // namespace mvts
