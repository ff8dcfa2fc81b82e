#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kaid::io {

std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Writes atomically (temp file + rename) so a crashed stage never leaves a
// half-written artifact behind.
void write_file(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view line, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::string hash_file(const std::filesystem::path& path);

// Shortest round-trippable decimal rendering.
std::string format_double(double value);
// Fixed number of decimals, used for diff-able reports.
std::string format_fixed(double value, int decimals);

}  // namespace kaid::io
