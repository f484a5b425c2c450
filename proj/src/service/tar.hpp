#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fer {

struct TarEntry {
  std::string name;
  std::vector<std::uint8_t> data;
};

// POSIX ustar, regular files only, mtime 0 so output depends on content only.
// Names longer than 100 bytes are split into prefix/name at a '/'.
std::vector<std::uint8_t> write_tar(const std::vector<TarEntry>& entries);

// Regular file entries of a ustar archive; throws format on a bad header.
std::vector<TarEntry> read_tar(std::span<const std::uint8_t> archive);

}  // namespace fer
