#include "service/tar.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "common/error.hpp"

namespace fer {

namespace {

constexpr std::size_t kBlock = 512;

void put_octal(std::uint8_t* field, std::size_t width, std::uint64_t value) {
  // width - 1 digits plus NUL.
  std::snprintf(reinterpret_cast<char*>(field), width, "%0*llo", static_cast<int>(width - 1),
                static_cast<unsigned long long>(value));
}

std::uint64_t get_octal(const std::uint8_t* field, std::size_t width) {
  std::uint64_t v = 0;
  std::size_t i = 0;
  while (i < width && field[i] == ' ') ++i;
  for (; i < width && field[i] >= '0' && field[i] <= '7'; ++i) v = v * 8 + (field[i] - '0');
  return v;
}

unsigned header_checksum(const std::uint8_t* h) {
  unsigned sum = 0;
  for (std::size_t i = 0; i < kBlock; ++i) sum += (i >= 148 && i < 156) ? ' ' : h[i];
  return sum;
}

}  // namespace

std::vector<std::uint8_t> write_tar(const std::vector<TarEntry>& entries) {
  std::vector<std::uint8_t> out;
  for (const auto& e : entries) {
    std::uint8_t h[kBlock] = {};
    std::string name = e.name, prefix;
    if (name.size() > 100) {
      const auto cut = name.rfind('/', 155);
      if (cut == std::string::npos || name.size() - cut - 1 > 100)
        fail(ErrorCode::invalid_argument, "tar: path too long: " + e.name);
      prefix = name.substr(0, cut);
      name = name.substr(cut + 1);
    }
    std::memcpy(h, name.data(), name.size());
    put_octal(h + 100, 8, 0644);
    put_octal(h + 108, 8, 0);
    put_octal(h + 116, 8, 0);
    put_octal(h + 124, 12, e.data.size());
    put_octal(h + 136, 12, 0);
    h[156] = '0';
    std::memcpy(h + 257, "ustar", 6);
    std::memcpy(h + 263, "00", 2);
    std::memcpy(h + 345, prefix.data(), prefix.size());
    std::snprintf(reinterpret_cast<char*>(h + 148), 8, "%06o", header_checksum(h));
    h[155] = ' ';
    out.insert(out.end(), h, h + kBlock);
    out.insert(out.end(), e.data.begin(), e.data.end());
    out.resize(out.size() + (kBlock - e.data.size() % kBlock) % kBlock, 0);
  }
  out.resize(out.size() + 2 * kBlock, 0);
  return out;
}

std::vector<TarEntry> read_tar(std::span<const std::uint8_t> a) {
  std::vector<TarEntry> out;
  std::size_t pos = 0;
  while (pos + kBlock <= a.size()) {
    const std::uint8_t* h = a.data() + pos;
    if (std::all_of(h, h + kBlock, [](std::uint8_t b) { return b == 0; })) return out;
    if (get_octal(h + 148, 8) != header_checksum(h))
      fail(ErrorCode::format, "tar: bad header checksum at offset " + std::to_string(pos));
    const std::uint64_t size = get_octal(h + 124, 12);
    pos += kBlock;
    if (pos + size > a.size()) fail(ErrorCode::truncated, "tar: entry overruns archive");
    const char type = static_cast<char>(h[156]);
    if (type == '0' || type == '\0') {
      std::string name(reinterpret_cast<const char*>(h), strnlen(reinterpret_cast<const char*>(h), 100));
      const std::string prefix(reinterpret_cast<const char*>(h + 345),
                               strnlen(reinterpret_cast<const char*>(h + 345), 155));
      if (!prefix.empty()) name = prefix + "/" + name;
      out.push_back({name, {a.begin() + pos, a.begin() + pos + size}});
    }
    pos += (size + kBlock - 1) / kBlock * kBlock;
  }
  fail(ErrorCode::truncated, "tar: missing end-of-archive marker");
}

}  // namespace fer
