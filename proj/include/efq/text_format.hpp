#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace efq {

/// Shortest decimal string that parses back to the same binary64 value.
/// Non-finite values print as inf, -inf and nan.
std::string format_double(double value);

/// Inverse of format_double. Throws ParameterError on malformed text.
double parse_double(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Sixteen lowercase hex digits.
std::string hex64(std::uint64_t value);

/// Table of numbers preceded by a "# config_hash=..." line and a header row.
struct CsvTable {
  std::string config_hash;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(std::string_view text);

/// Writes the file, creating parent directories as needed.
void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace efq
