#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace refmap::text {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

double parse_double(std::string_view token, std::size_t line_no);
long long parse_int(std::string_view token, std::size_t line_no);

std::vector<std::string_view> split_ws(std::string_view line);
/// Lines without trailing '\r'; a final empty line is dropped.
std::vector<std::string_view> split_lines(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace refmap::text
