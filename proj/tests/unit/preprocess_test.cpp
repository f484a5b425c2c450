#include <gtest/gtest.h>
#include <png.h>

#include <cmath>
#include <random>
#include <string>

#include "common/error.hpp"
#include "preprocess/image.hpp"

namespace fer {
namespace {

// Independent bilinear reference: per output pixel, map the centre back into
// source coordinates and blend the four neighbours with product weights.
// Returns the unrounded values.
std::vector<double> reference_resize(const RgbImage& src, std::size_t ow, std::size_t oh) {
  std::vector<double> out(ow * oh * 3);
  const double sx = double(src.width) / ow, sy = double(src.height) / oh;
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5, fy = (oy + 0.5) * sy - 0.5;
      if (fx < 0) fx = 0;
      if (fy < 0) fy = 0;
      if (fx > src.width - 1.0) fx = src.width - 1.0;
      if (fy > src.height - 1.0) fy = src.height - 1.0;
      const long x0 = long(fx), y0 = long(fy);
      const long x1 = x0 + 1 < long(src.width) ? x0 + 1 : x0;
      const long y1 = y0 + 1 < long(src.height) ? y0 + 1 : y0;
      const double ax = fx - x0, ay = fy - y0;
      for (int c = 0; c < 3; ++c)
        out[(oy * ow + ox) * 3 + c] =
            src.at(x0, y0, c) * (1 - ax) * (1 - ay) + src.at(x1, y0, c) * ax * (1 - ay) +
            src.at(x0, y1, c) * (1 - ax) * ay + src.at(x1, y1, c) * ax * ay;
    }
  return out;
}

// Every byte must be the nearest integer to the reference value. Values
// within 1e-9 of a half-way point may round either way.
::testing::AssertionResult matches_reference(const RgbImage& got,
                                             const std::vector<double>& ref) {
  if (got.pixels.size() != ref.size())
    return ::testing::AssertionFailure() << "size " << got.pixels.size() << " vs " << ref.size();
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double v = ref[i];
    const double lo = std::floor(v), frac = v - lo;
    const int b = got.pixels[i];
    bool ok;
    if (std::abs(frac - 0.5) < 1e-9)
      ok = b == int(lo) || b == int(lo) + 1;
    else
      ok = b == int(std::floor(v + 0.5));
    if (!ok)
      return ::testing::AssertionFailure()
             << "byte " << i << " is " << b << ", reference " << v;
  }
  return ::testing::AssertionSuccess();
}

RgbImage gradient_image(std::size_t w, std::size_t h) {
  RgbImage img(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>((x * 255) / (w - 1));
      img.at(x, y, 1) = static_cast<std::uint8_t>((y * 255) / (h - 1));
      img.at(x, y, 2) = static_cast<std::uint8_t>((x * 7 + y * 13) % 256);
    }
  return img;
}

int max_channel_diff(const RgbImage& a, const RgbImage& b) {
  int m = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    m = std::max(m, std::abs(int(a.pixels[i]) - int(b.pixels[i])));
  return m;
}

TEST(DecodeTest, PngRoundTripIsExact) {
  RgbImage img(2, 2);
  const std::uint8_t px[] = {255, 0, 0, 0, 255, 0, 0, 0, 255, 12, 34, 56};
  std::copy(std::begin(px), std::end(px), img.pixels.begin());
  const auto bytes = encode_png(img);
  EXPECT_EQ(sniff_format(bytes), ImageFormat::png);
  EXPECT_EQ(decode_image(bytes), img);

  std::mt19937_64 rng(3);
  RgbImage noise(37, 23);
  for (auto& v : noise.pixels) v = static_cast<std::uint8_t>(rng());
  EXPECT_EQ(decode_image(encode_png(noise)), noise);
}

TEST(DecodeTest, UniformJpegWithinTolerance) {
  const RgbImage img(64, 48, 0);
  RgbImage colored = img;
  for (std::size_t i = 0; i < colored.pixels.size(); i += 3) {
    colored.pixels[i] = 200;
    colored.pixels[i + 1] = 120;
    colored.pixels[i + 2] = 40;
  }
  const auto bytes = encode_jpeg(colored);
  EXPECT_EQ(sniff_format(bytes), ImageFormat::jpeg);
  const RgbImage back = decode_image(bytes);
  ASSERT_EQ(back.width, 64u);
  ASSERT_EQ(back.height, 48u);
  EXPECT_LE(max_channel_diff(back, colored), 3);
}

TEST(DecodeTest, AlphaCompositedOverWhite) {
  // Hand-built RGBA PNG through libpng's writer: half-transparent black and a
  // fully transparent red pixel.
  std::vector<std::uint8_t> rgba = {0, 0, 0, 128, 255, 0, 0, 0};
  png_image pimg{};
  pimg.version = PNG_IMAGE_VERSION;
  pimg.width = 2;
  pimg.height = 1;
  pimg.format = PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  ASSERT_TRUE(png_image_write_get_memory_size(pimg, size, 0, rgba.data(), 0, nullptr));
  std::vector<std::uint8_t> bytes(size);
  ASSERT_TRUE(png_image_write_to_memory(&pimg, bytes.data(), &size, 0, rgba.data(), 0, nullptr));
  bytes.resize(size);
  const RgbImage out = decode_image(bytes);
  // 255 * (255 - 128) / 255 = 127
  EXPECT_EQ(out.at(0, 0, 0), 127);
  EXPECT_EQ(out.at(0, 0, 2), 127);
  EXPECT_EQ(out.at(1, 0, 0), 255);
  EXPECT_EQ(out.at(1, 0, 1), 255);
}

TEST(DecodeTest, GrayscaleReplicated) {
  std::vector<std::uint8_t> gray = {0, 100, 200};
  png_image pimg{};
  pimg.version = PNG_IMAGE_VERSION;
  pimg.width = 3;
  pimg.height = 1;
  pimg.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  ASSERT_TRUE(png_image_write_get_memory_size(pimg, size, 0, gray.data(), 0, nullptr));
  std::vector<std::uint8_t> bytes(size);
  ASSERT_TRUE(png_image_write_to_memory(&pimg, bytes.data(), &size, 0, gray.data(), 0, nullptr));
  bytes.resize(size);
  const RgbImage out = decode_image(bytes);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(x, 0, c), gray[x]);
}

TEST(DecodeTest, GarbageIsDecodeError) {
  const std::string text = "this is not an image at all";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  try {
    decode_image(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::decode);
  }
  EXPECT_THROW(decode_image({}), Error);

  // Valid signatures followed by junk.
  auto png = encode_png(gradient_image(16, 16));
  png.resize(png.size() / 2);
  EXPECT_THROW(decode_image(png), Error);
  auto jpg = encode_jpeg(gradient_image(16, 16));
  jpg.resize(40);
  try {
    decode_image(jpg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::decode);
  }
}

TEST(DecodeTest, RandomMutationsNeverCrash) {
  const auto png = encode_png(gradient_image(20, 20));
  const auto jpg = encode_jpeg(gradient_image(20, 20));
  std::mt19937_64 rng(77);
  for (const auto* src : {&png, &jpg})
    for (int trial = 0; trial < 200; ++trial) {
      auto bytes = *src;
      std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
      for (int k = 0; k < 4; ++k) bytes[pos(rng)] = static_cast<std::uint8_t>(rng());
      try {
        const RgbImage img = decode_image(bytes);
        EXPECT_EQ(img.pixels.size(), img.width * img.height * 3);
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::decode);
      }
    }
}

TEST(ResizeTest, IdentityAtTargetSize) {
  const RgbImage img = gradient_image(224, 224);
  EXPECT_EQ(crop_and_resize(img), img);
}

TEST(ResizeTest, UniformImageStaysUniform) {
  RgbImage img(448, 448);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = 10;
    img.pixels[i + 1] = 200;
    img.pixels[i + 2] = 77;
  }
  const RgbImage out = crop_and_resize(img, CropBox{0, 0, 448, 448});
  ASSERT_EQ(out.width, 224u);
  ASSERT_EQ(out.height, 224u);
  for (std::size_t i = 0; i < out.pixels.size(); i += 3) {
    ASSERT_EQ(out.pixels[i], 10);
    ASSERT_EQ(out.pixels[i + 1], 200);
    ASSERT_EQ(out.pixels[i + 2], 77);
  }
}

TEST(ResizeTest, CropMatchesTwoStepReference) {
  const RgbImage img = gradient_image(300, 260);
  RgbImage copied(100, 100);
  for (std::size_t y = 0; y < 100; ++y)
    for (std::size_t x = 0; x < 100; ++x)
      for (std::size_t c = 0; c < 3; ++c) copied.at(x, y, c) = img.at(x + 10, y + 10, c);
  EXPECT_TRUE(matches_reference(crop_and_resize(img, CropBox{10, 10, 100, 100}),
                                reference_resize(copied, 224, 224)));
}

TEST(ResizeTest, RandomGeometriesMatchReference) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> side(1, 500);
  for (int trial = 0; trial < 25; ++trial) {
    RgbImage img(side(rng), side(rng));
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng());
    const RgbImage out = crop_and_resize(img);
    ASSERT_EQ(out.width, 224u);
    ASSERT_EQ(out.height, 224u);
    EXPECT_TRUE(matches_reference(out, reference_resize(img, 224, 224)))
        << img.width << "x" << img.height;
  }
}

TEST(ResizeTest, BoxIsClamped) {
  const RgbImage img = gradient_image(120, 80);
  EXPECT_EQ(crop_and_resize(img, CropBox{-50, -50, 1000, 1000}), crop_and_resize(img));
  EXPECT_EQ(clamp_box({100, 70, 50, 50}, 120, 80), (CropBox{100, 70, 20, 10}));
  EXPECT_EQ(crop_and_resize(img, CropBox{100, 70, 50, 50}),
            crop_and_resize(crop(img, CropBox{100, 70, 20, 10})));
}

TEST(ResizeTest, BoxOutsideRejected) {
  const RgbImage img = gradient_image(120, 80);
  EXPECT_THROW(crop_and_resize(img, CropBox{120, 0, 10, 10}), Error);
  EXPECT_THROW(crop_and_resize(img, CropBox{-20, 0, 20, 10}), Error);
  EXPECT_THROW(crop_and_resize(img, CropBox{0, 0, 0, 10}), Error);
  EXPECT_THROW(crop_and_resize(RgbImage{}), Error);
}

TEST(InputTensorTest, Normalization) {
  EXPECT_EQ(to_input_tensor(RgbImage(224, 224, 0)), Tensor(Shape{224, 224, 3}, 0.f));
  EXPECT_EQ(to_input_tensor(RgbImage(224, 224, 255)), Tensor(Shape{224, 224, 3}, 1.f));
  RgbImage img(224, 224);
  img.at(5, 7, 0) = 128;
  img.at(5, 7, 1) = 64;
  img.at(5, 7, 2) = 255;
  const Tensor t = to_input_tensor(img);
  EXPECT_NEAR(t.at(7, 5, 0), 0.50196078431, 1e-7);
  EXPECT_NEAR(t.at(7, 5, 1), 0.25098039215, 1e-7);
  EXPECT_EQ(t.at(7, 5, 2), 1.0f);
}

TEST(InputTensorTest, MonotoneAndBounded) {
  float prev = -1;
  for (int b = 0; b < 256; ++b) {
    RgbImage img(224, 224, static_cast<std::uint8_t>(b));
    const float v = to_input_tensor(img)[0];
    EXPECT_GT(v, prev);
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
    prev = v;
  }
}

TEST(InputTensorTest, WrongGeometryRejected) {
  EXPECT_THROW(to_input_tensor(RgbImage(223, 224)), Error);
}

TEST(PipelineTest, Deterministic) {
  const auto bytes = encode_jpeg(gradient_image(333, 211));
  const CropBox box{20, 30, 150, 160};
  EXPECT_EQ(preprocess(bytes, box), preprocess(bytes, box));
}

}  // namespace
}  // namespace fer
