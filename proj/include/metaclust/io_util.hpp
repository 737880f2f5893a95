#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace metaclust {

inline constexpr std::string_view kToolName = "metaclust";
inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a whole field; returns false on any trailing garbage or
/// non-finite result.
bool parse_double(std::string_view text, double& out);

std::vector<std::string> split(std::string_view line, char sep);

/// "# metaclust 0.1.0 master_seed=<seed>", the first line of every CSV the
/// tool writes.
std::string provenance_line(std::uint64_t master_seed);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace metaclust
