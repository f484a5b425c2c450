#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace fer {

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

bool is_sha256_hex(const std::string& s);

// Current UTC time as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string utc_timestamp();

}  // namespace fer
