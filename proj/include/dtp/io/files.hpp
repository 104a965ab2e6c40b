#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dtp::io {

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Worker count for parallel loops: DTP_THREADS if set (>= 1), else hardware concurrency.
unsigned worker_count();

}  // namespace dtp::io
