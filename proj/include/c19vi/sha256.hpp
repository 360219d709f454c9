#pragma once

#include <string>

namespace c19vi {

// Hex SHA-256 digest; used to fingerprint pipeline inputs and outputs in the
// run manifest.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

} // namespace c19vi
