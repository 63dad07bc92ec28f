#include "mvts/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mvts {

namespace {

constexpr std::array<char, 5> magic{'M', 'V', 'T', 'S', '1'};

void put_u64(std::ostream& out, std::uint64_t v)
{
    std::array<char, 8> bytes{};
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in)
{
    std::array<unsigned char, 8> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw CheckpointError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
}

void put_f64(std::ostream& out, double d)
{
    put_u64(out, std::bit_cast<std::uint64_t>(d));
}

double get_f64(std::istream& in)
{
    return std::bit_cast<double>(get_u64(in));
}

std::vector<Tensor*> tensors_of(Layer& layer)
{
    std::vector<Tensor*> out;
    for (Parameter* p : layer.parameters()) out.push_back(&p->value);
    for (Tensor* t : layer.buffers()) out.push_back(t);
    return out;
}

}  // namespace

void write_checkpoint(std::ostream& out, std::span<Layer* const> layers)
{
    out.write(magic.data(), magic.size());
    put_u64(out, layers.size());
    for (Layer* layer : layers) {
        put_u64(out, static_cast<std::uint64_t>(layer->kind()));
        const auto tensors = tensors_of(*layer);
        put_u64(out, tensors.size());
        for (const Tensor* t : tensors) {
            put_u64(out, t->rank());
            for (std::size_t d : t->shape()) put_u64(out, d);
            for (double v : t->values()) put_f64(out, v);
        }
    }
    if (!out) throw CheckpointError("failed writing checkpoint");
}

void write_checkpoint(const std::filesystem::path& path, std::span<Layer* const> layers)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
    write_checkpoint(out, layers);
}

void read_checkpoint(std::istream& in, std::span<Layer* const> layers)
{
    std::array<char, 5> head{};
    in.read(head.data(), head.size());
    if (!in || head != magic) throw CheckpointError("not an MVTS1 checkpoint");
    const std::uint64_t count = get_u64(in);
    if (count != layers.size())
        throw CheckpointError("checkpoint holds " + std::to_string(count) + " layers, model has " +
                              std::to_string(layers.size()));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::uint64_t tag = get_u64(in);
        if (tag != static_cast<std::uint64_t>(layers[i]->kind()))
            throw CheckpointError("layer " + std::to_string(i) + ": checkpoint tag " + std::to_string(tag) +
                                  " does not match " + to_string(layers[i]->kind()));
        const auto tensors = tensors_of(*layers[i]);
        if (get_u64(in) != tensors.size())
            throw CheckpointError("layer " + std::to_string(i) + ": tensor count mismatch");
        for (Tensor* t : tensors) {
            const std::uint64_t rank = get_u64(in);
            Shape shape(rank);
            for (auto& d : shape) d = get_u64(in);
            if (shape != t->shape())
                throw CheckpointError("layer " + std::to_string(i) + ": shape " + shape_string(shape) +
                                      " does not match " + shape_string(t->shape()));
            for (double& v : t->values()) v = get_f64(in);
        }
    }
}

void read_checkpoint(const std::filesystem::path& path, std::span<Layer* const> layers)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    read_checkpoint(in, layers);
}

}  // namespace mvts
