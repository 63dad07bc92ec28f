#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>

#include "mvts/layers.hpp"

namespace mvts {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary layout, all integers u64 little-endian, all values f64 little-endian:
//   "MVTS1" | layer_count | per layer: kind tag | tensor_count |
//       per tensor: rank | dims... | values...
// Tensors of a layer are its parameters followed by its buffers.
void write_checkpoint(std::ostream& out, std::span<Layer* const> layers);
void write_checkpoint(const std::filesystem::path& path, std::span<Layer* const> layers);

/// Loads values into an already-built layer list; kinds and shapes must match.
void read_checkpoint(std::istream& in, std::span<Layer* const> layers);
void read_checkpoint(const std::filesystem::path& path, std::span<Layer* const> layers);

}  // namespace mvts
