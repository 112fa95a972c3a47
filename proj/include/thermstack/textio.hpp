#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the CSV readers and writers.
namespace thermstack::textio {

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

/// Strict parse of a full field; throws ParseError on trailing garbage.
double parse_double(std::string_view field, const std::string& source, int line);
long long parse_int(std::string_view field, const std::string& source, int line);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Whole file contents; throws IoError when unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary file and renames, so readers never see half a file.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// 64-bit FNV-1a digest, hex encoded. Used for provenance, not security.
std::string fnv1a_hex(std::string_view data);

} // namespace thermstack::textio
