#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tensor/tensor.hpp"

namespace fer {

inline constexpr std::size_t kInputSide = 224;

// Row-major 8-bit RGB.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0);

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
  bool empty() const { return width == 0 || height == 0; }
  bool operator==(const RgbImage&) const = default;
};

// Top-left offset and extent in source pixels. Offsets may be negative and the
// box may overhang the image; it is clamped before use.
struct CropBox {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t w = 0;
  std::int64_t h = 0;
  bool operator==(const CropBox&) const = default;
};

enum class ImageFormat { png, jpeg, unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes);

// JPEG or PNG to RGB. Alpha is composited over white, grayscale replicated.
// Throws ErrorCode::decode for anything else.
RgbImage decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_jpeg(const RgbImage& image, int quality = 95);

// Intersection of the box with the image bounds; throws invalid_argument when
// the box has a non-positive extent or misses the image entirely.
CropBox clamp_box(const CropBox& box, std::size_t width, std::size_t height);

RgbImage crop(const RgbImage& image, const CropBox& box);

// Bilinear resampling with half-pixel centres and edge clamping.
RgbImage resize_bilinear(const RgbImage& image, std::size_t width,
                         std::size_t height);

RgbImage crop_and_resize(const RgbImage& image,
                         const std::optional<CropBox>& box = std::nullopt);

// 224 x 224 image -> 224 x 224 x 3 tensor with values byte / 255.
Tensor to_input_tensor(const RgbImage& image);

// decode -> crop_and_resize -> to_input_tensor.
Tensor preprocess(std::span<const std::uint8_t> bytes,
                  const std::optional<CropBox>& box = std::nullopt);

}  // namespace fer
