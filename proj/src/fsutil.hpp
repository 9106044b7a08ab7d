#pragma once

#include <filesystem>
#include <string>

namespace ixrisk {

// All pipeline outputs go through atomic_write: temp file + rename, so an
// interrupted run never leaves a partial output behind.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

void ensure_dir(const std::filesystem::path& dir);

} // namespace ixrisk
