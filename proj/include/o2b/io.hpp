#pragma once

// Small file-format helpers shared by the loaders and writers.

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace o2b::io {

std::string read_text(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

// Writes via a temporary sibling and rename, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view text);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_f32_le(std::span<const float> values);
std::vector<float> decode_f32_le(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_f64_le(std::span<const double> values);
std::vector<double> decode_f64_le(std::span<const std::uint8_t> bytes);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

// Minimal RFC 4180 CSV: quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_field(std::string_view value);
std::string csv_row(std::initializer_list<std::string_view> fields);
std::string csv_row(const std::vector<std::string>& fields);

/// Data lines of a CSV text: skips blank lines and '#' provenance comments.
std::vector<std::string> csv_data_lines(std::string_view text);

double parse_double(std::string_view text, std::string_view context);
std::size_t parse_size(std::string_view text, std::string_view context);

}  // namespace o2b::io
