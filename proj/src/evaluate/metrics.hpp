#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "model/labels.hpp"
#include "model/model.hpp"
#include "model/network.hpp"

namespace fer {

using ConfusionMatrix = std::array<std::array<std::size_t, kNumEmotions>, kNumEmotions>;

struct SampleFailure {
  std::string sample;
  std::string message;
};

// Rows of the confusion matrix are true labels, columns top-1 predictions.
struct EvalMetrics {
  std::size_t evaluated = 0;
  std::size_t top1_hits = 0;
  std::size_t top3_hits = 0;
  double top1 = 0;
  double top3 = 0;
  std::array<std::size_t, kNumEmotions> class_counts{};
  // Empty for classes with no samples.
  std::array<std::optional<double>, kNumEmotions> per_class{};
  ConfusionMatrix confusion{};
  std::vector<SampleFailure> failures;
};

// Integer tallies; order of add() calls does not affect the result.
class MetricsAccumulator {
 public:
  // ranked: labels by descending confidence, at least one entry.
  void add(EmotionLabel truth, const std::vector<RankedLabel>& ranked);
  void add_failure(SampleFailure f) { failures_.push_back(std::move(f)); }
  EvalMetrics finish() const;

 private:
  std::size_t n_ = 0, top1_ = 0, top3_ = 0;
  ConfusionMatrix confusion_{};
  std::vector<SampleFailure> failures_;
};

struct EvalOptions {
  std::size_t batch_size = 32;
};

// Preprocessing failures (decode/io) are recorded and excluded from every
// denominator. Other errors propagate.
EvalMetrics evaluate(const Model& model, const SampleSource& data,
                     const EvalOptions& options = {});

}  // namespace fer
