#pragma once

#include <filesystem>
#include <string_view>

namespace memguard {

// Writes `contents` to `path` via a temporary file in the same directory
// followed by a rename, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace memguard
