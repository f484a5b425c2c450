#include "preprocess/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

#include "common/error.hpp"

namespace fer {

namespace {

// Decompression bomb guard.
constexpr std::size_t kMaxSide = 16384;
constexpr std::size_t kMaxPixels = std::size_t{64} << 20;

void check_geometry(std::size_t w, std::size_t h, const char* what) {
  if (w == 0 || h == 0 || w > kMaxSide || h > kMaxSide || w * h > kMaxPixels)
    fail(ErrorCode::decode, std::string(what) + ": unsupported image size " +
                                std::to_string(w) + "x" + std::to_string(h));
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    fail(ErrorCode::decode, std::string("png: ") + img.message);
  if (img.width == 0 || img.height == 0 || img.width > kMaxSide ||
      img.height > kMaxSide ||
      std::size_t{img.width} * img.height > kMaxPixels) {
    const std::size_t w = img.width, h = img.height;
    png_image_free(&img);
    check_geometry(w, h, "png");
  }
  img.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgba.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::decode, "png: " + msg);
  }
  RgbImage out(img.width, img.height);
  const std::size_t n = out.width * out.height;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned a = rgba[4 * i + 3];
    for (std::size_t c = 0; c < 3; ++c) {
      const unsigned v = rgba[4 * i + c];
      out.pixels[3 * i + c] =
          static_cast<std::uint8_t>((v * a + 255u * (255u - a) + 127u) / 255u);
    }
  }
  return out;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  err.mgr.emit_message = jpeg_silent;
  err.message[0] = '\0';
  // Only trivially destructible locals live across setjmp.
  RgbImage* volatile out = nullptr;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    delete out;
    fail(ErrorCode::decode, std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    std::strcpy(err.message, "CMYK images are not supported");
    std::longjmp(err.jump, 1);
  }
  if (cinfo.image_width == 0 || cinfo.image_height == 0 ||
      cinfo.image_width > kMaxSide || cinfo.image_height > kMaxSide ||
      std::size_t{cinfo.image_width} * cinfo.image_height > kMaxPixels) {
    std::snprintf(err.message, sizeof err.message, "unsupported image size %ux%u",
                  cinfo.image_width, cinfo.image_height);
    std::longjmp(err.jump, 1);
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out = new RgbImage(cinfo.output_width, cinfo.output_height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out->pixels.data() + std::size_t{cinfo.output_scanline} * out->width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  RgbImage result = std::move(*out);
  delete out;
  return result;
}

}  // namespace

RgbImage::RgbImage(std::size_t w, std::size_t h, std::uint8_t fill)
    : width(w), height(h), pixels(w * h * 3, fill) {}

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) {
  static constexpr std::array<std::uint8_t, 8> png_sig{0x89, 'P', 'N', 'G',
                                                       0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(png_sig.begin(), png_sig.end(), bytes.begin()))
    return ImageFormat::png;
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return ImageFormat::jpeg;
  return ImageFormat::unknown;
}

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  switch (sniff_format(bytes)) {
    case ImageFormat::png:
      return decode_png(bytes);
    case ImageFormat::jpeg:
      return decode_jpeg(bytes);
    case ImageFormat::unknown:
      break;
  }
  fail(ErrorCode::decode, "image is neither JPEG nor PNG (" +
                              std::to_string(bytes.size()) + " bytes)");
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  if (image.empty()) fail(ErrorCode::invalid_argument, "encode_png: empty image");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(img, size, 0, image.pixels.data(), 0, nullptr))
    fail(ErrorCode::internal, std::string("encode_png: ") + img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0,
                                 nullptr))
    fail(ErrorCode::internal, std::string("encode_png: ") + img.message);
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const RgbImage& image, int quality) {
  if (image.empty()) fail(ErrorCode::invalid_argument, "encode_jpeg: empty image");
  jpeg_compress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    fail(ErrorCode::internal, std::string("encode_jpeg: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width);
  cinfo.image_height = static_cast<JDIMENSION>(image.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<std::uint8_t*>(image.pixels.data()) +
                   std::size_t{cinfo.next_scanline} * image.width * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  std::free(buffer);
  return out;
}

CropBox clamp_box(const CropBox& box, std::size_t width, std::size_t height) {
  if (box.w <= 0 || box.h <= 0)
    fail(ErrorCode::invalid_argument,
         "crop box extent must be positive, got " + std::to_string(box.w) + "x" +
             std::to_string(box.h));
  const auto W = static_cast<std::int64_t>(width);
  const auto H = static_cast<std::int64_t>(height);
  const std::int64_t x0 = std::clamp<std::int64_t>(box.x, 0, W);
  const std::int64_t y0 = std::clamp<std::int64_t>(box.y, 0, H);
  const std::int64_t x1 = std::clamp<std::int64_t>(box.x + box.w, 0, W);
  const std::int64_t y1 = std::clamp<std::int64_t>(box.y + box.h, 0, H);
  if (x1 <= x0 || y1 <= y0)
    fail(ErrorCode::invalid_argument,
         "crop box (" + std::to_string(box.x) + "," + std::to_string(box.y) + "," +
             std::to_string(box.w) + "," + std::to_string(box.h) +
             ") lies outside the " + std::to_string(width) + "x" +
             std::to_string(height) + " image");
  return {x0, y0, x1 - x0, y1 - y0};
}

RgbImage crop(const RgbImage& image, const CropBox& box) {
  if (image.empty()) fail(ErrorCode::invalid_argument, "crop: empty image");
  const CropBox b = clamp_box(box, image.width, image.height);
  RgbImage out(static_cast<std::size_t>(b.w), static_cast<std::size_t>(b.h));
  const std::size_t row_bytes = out.width * 3;
  for (std::size_t y = 0; y < out.height; ++y)
    std::memcpy(out.pixels.data() + y * row_bytes,
                image.pixels.data() +
                    ((static_cast<std::size_t>(b.y) + y) * image.width +
                     static_cast<std::size_t>(b.x)) * 3,
                row_bytes);
  return out;
}

RgbImage resize_bilinear(const RgbImage& image, std::size_t width,
                         std::size_t height) {
  if (image.empty() || width == 0 || height == 0)
    fail(ErrorCode::invalid_argument, "resize: empty geometry");
  if (image.width == width && image.height == height) return image;

  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  auto taps = [](std::size_t src, std::size_t dst) {
    std::vector<Tap> t(dst);
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t d = 0; d < dst; ++d) {
      double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      t[d] = {i0, std::min(i0 + 1, src - 1), s - static_cast<double>(i0)};
    }
    return t;
  };
  const auto tx = taps(image.width, width);
  const auto ty = taps(image.height, height);

  RgbImage out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const Tap& vy = ty[y];
    for (std::size_t x = 0; x < width; ++x) {
      const Tap& vx = tx[x];
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = image.at(vx.i0, vy.i0, c) * (1 - vx.f) +
                           image.at(vx.i1, vy.i0, c) * vx.f;
        const double bottom = image.at(vx.i0, vy.i1, c) * (1 - vx.f) +
                              image.at(vx.i1, vy.i1, c) * vx.f;
        const double v = top * (1 - vy.f) + bottom * vy.f;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

RgbImage crop_and_resize(const RgbImage& image, const std::optional<CropBox>& box) {
  if (image.empty()) fail(ErrorCode::invalid_argument, "crop_and_resize: empty image");
  if (!box) return resize_bilinear(image, kInputSide, kInputSide);
  return resize_bilinear(crop(image, *box), kInputSide, kInputSide);
}

Tensor to_input_tensor(const RgbImage& image) {
  if (image.width != kInputSide || image.height != kInputSide)
    fail(ErrorCode::shape_mismatch,
         "to_input_tensor: expected a 224x224 image, got " +
             std::to_string(image.width) + "x" + std::to_string(image.height));
  static const auto table = [] {
    std::array<float, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = static_cast<float>(i / 255.0);
    return t;
  }();
  Tensor out(Shape{kInputSide, kInputSide, 3});
  auto dst = out.data();
  for (std::size_t i = 0; i < image.pixels.size(); ++i) dst[i] = table[image.pixels[i]];
  return out;
}

Tensor preprocess(std::span<const std::uint8_t> bytes, const std::optional<CropBox>& box) {
  return to_input_tensor(crop_and_resize(decode_image(bytes), box));
}

}  // namespace fer
