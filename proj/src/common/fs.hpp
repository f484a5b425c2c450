#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fer {

// Throws ErrorCode::io naming the path.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Writes to "<path>.tmp.<pid>", fsyncs, then renames over path. A crash leaves
// either the old file or the complete new one.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);

}  // namespace fer
