#pragma once

// FERW weight container, little-endian throughout:
//
//   "FERW" | u32 version (1) | u32 manifest length | manifest (UTF-8 JSON)
//   | per tensor, in manifest order:
//       u16 name length | name | u8 dtype (1 = f32) | u8 rank
//       | rank x u32 extents | raw f32 values
//   | u32 CRC-32 of every preceding byte
//
// The manifest lists the layers with their hyperparameters and tensor shapes
// together with the label table, so any model built from the supported layer
// kinds can be loaded without out-of-band information.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "model/model.hpp"

namespace fer {

inline constexpr std::uint32_t kFerwVersion = 1;
inline constexpr std::uint8_t kFerwDtypeF32 = 1;

std::string ferw_manifest(const Model& model);
std::vector<std::uint8_t> encode_ferw(const Model& model);

// Errors: bad_magic, unsupported_version, truncated, checksum_mismatch,
// format (manifest), shape_mismatch (naming the tensor).
Model decode_ferw(std::span<const std::uint8_t> bytes);

// Writes atomically (temporary file then rename).
void save_weights(const Model& model, const std::filesystem::path& path);
Model load_weights(const std::filesystem::path& path);

struct TensorRecord {
  std::string name;
  Tensor value;
};

// Frames an arbitrary manifest and record list into a container with a valid
// checksum, without checking that they agree. Used by encode_ferw and by
// tooling that needs to produce deliberately inconsistent files.
std::vector<std::uint8_t> write_ferw_container(std::string_view manifest,
                                               std::span<const TensorRecord> records);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace fer
