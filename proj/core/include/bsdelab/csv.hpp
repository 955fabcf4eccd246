#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace bsdelab {

/// Shortest round-trip decimal representation; identical bits give identical text.
std::string format_double(double value);

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace bsdelab
