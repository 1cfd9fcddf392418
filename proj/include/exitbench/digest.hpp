#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace exitbench {

// SHA-256 of the given bytes, as lowercase hex.
std::string sha256_hex(std::string_view data);

// SHA-256 of a file's contents, as lowercase hex. Throws InputError if the
// file cannot be read.
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace exitbench
