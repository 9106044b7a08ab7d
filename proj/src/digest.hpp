#pragma once

#include <cstdint>
#include <string>

namespace ixrisk {

std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);

} // namespace ixrisk
