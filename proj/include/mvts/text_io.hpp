#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mvts {

/// Splits one CSV line; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string csv_field(std::string_view field);

/// Whole-string parse; nullopt on trailing garbage or non-finite values.
std::optional<double> parse_double(std::string_view text);

/// Shortest representation that round-trips exactly.
std::string format_double(double value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Reads a one-column CSV of values; a non-numeric first line is a header.
std::vector<double> read_series(const std::filesystem::path& path);

}  // namespace mvts
