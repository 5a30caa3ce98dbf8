#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace modfollow {

/// Writes via a sibling temp file and rename, so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal for finite values, "NA" otherwise.
std::string format_double(double v);

std::string csv_escape(std::string_view field);

}  // namespace modfollow
