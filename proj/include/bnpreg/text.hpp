#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bnpreg {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double x);
// Strict parse of a whole field (surrounding blanks allowed). Returns false on
// anything that is not a plain decimal/scientific real.
bool parse_double(std::string_view text, double& out);

std::vector<std::string> split_fields(std::string_view line, char delim = ',');
std::string_view trim(std::string_view s);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
void append_file(const std::filesystem::path& path, std::string_view content);

}  // namespace bnpreg
