#pragma once

// Small hand-built models with known outputs, used as stand-ins for trained
// networks in evaluation, service and CLI tests.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "model/labels.hpp"
#include "model/model.hpp"

namespace fer::testing {

inline ModelSpec flat_dense_spec(std::vector<std::size_t> input = {224, 224, 3}) {
  ModelSpec spec;
  spec.input = std::move(input);
  spec.layers = {LayerSpec::simple(LayerKind::flatten, "flatten"),
                 LayerSpec::dense_layer("dense", kNumEmotions),
                 LayerSpec::simple(LayerKind::softmax, "softmax")};
  return spec;
}

// Ignores its input and always emits `probs`.
inline Model fixed_distribution_model(const std::array<double, kNumEmotions>& probs) {
  ModelSpec spec = flat_dense_spec();
  const std::size_t width = 224 * 224 * 3;
  Tensor bias(Shape{kNumEmotions});
  for (std::size_t j = 0; j < kNumEmotions; ++j)
    bias[j] = static_cast<float>(std::log(probs[j]));
  return Model(std::move(spec), {Tensor(Shape{width, kNumEmotions}), bias});
}

inline Model uniform_model() {
  std::array<double, kNumEmotions> p;
  p.fill(1.0 / kNumEmotions);
  return fixed_distribution_model(p);
}

// The Fig. 2 style distribution: happy 0.97, contempt just above surprise at
// about 0.01, everything else small.
inline std::array<double, kNumEmotions> happy_distribution() {
  return {0.0018, 0.97, 0.0018, 0.010, 0.0018, 0.0018, 0.0018, 0.011};
}

// Synthetic "face" for a class: a uniform image whose red channel encodes the
// label (32 * label), green and blue fixed.
inline constexpr std::uint8_t kClassRedStep = 32;
inline std::array<std::uint8_t, 3> class_color(EmotionLabel label) {
  return {static_cast<std::uint8_t>(kClassRedStep * label_index(label)), 128, 64};
}

// Reads the red level of a class_color image and emits (numerically) one-hot
// on the encoded class: logit_j = k * (j * c - j^2 / 2), maximised at j = c
// with a margin of k/2 to each neighbour.
inline Model color_oracle_model(double sharpness = 40.0) {
  ModelSpec spec = flat_dense_spec();
  const std::size_t pixels = 224 * 224;
  const double step = kClassRedStep / 255.0;
  Tensor weight(Shape{pixels * 3, kNumEmotions});
  Tensor bias(Shape{kNumEmotions});
  for (std::size_t j = 0; j < kNumEmotions; ++j) {
    const float w = static_cast<float>(sharpness * j / (pixels * step));
    for (std::size_t p = 0; p < pixels; ++p) weight.at(p * 3, j) = w;
    bias[j] = static_cast<float>(-sharpness * j * j / 2.0);
  }
  return Model(std::move(spec), {weight, bias});
}

}  // namespace fer::testing
