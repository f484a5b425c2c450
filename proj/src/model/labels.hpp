#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace fer {

// Index order is frozen: training targets, FERW label tables, service JSON and
// export directories all use it.
enum class EmotionLabel : int {
  neutral = 0,
  happy = 1,
  sad = 2,
  surprise = 3,
  fear = 4,
  disgust = 5,
  anger = 6,
  contempt = 7,
};

inline constexpr std::size_t kNumEmotions = 8;

inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "neutral", "happy", "sad", "surprise", "fear", "disgust", "anger", "contempt"};

constexpr std::string_view label_name(EmotionLabel label) {
  return kEmotionNames[static_cast<std::size_t>(label)];
}

constexpr int label_index(EmotionLabel label) { return static_cast<int>(label); }

constexpr std::optional<EmotionLabel> label_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumEmotions)) return std::nullopt;
  return static_cast<EmotionLabel>(index);
}

constexpr std::optional<EmotionLabel> parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumEmotions; ++i)
    if (kEmotionNames[i] == name) return static_cast<EmotionLabel>(i);
  return std::nullopt;
}

}  // namespace fer
