#ifndef DRS_FORMAT_HPP
#define DRS_FORMAT_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace drs {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

std::string read_text(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text(const std::filesystem::path& path, std::string_view text);

std::vector<std::string> split(std::string_view line, char sep);

}  // namespace drs

#endif  // DRS_FORMAT_HPP
