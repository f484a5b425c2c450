#include "evaluate/metrics.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace fer {

void MetricsAccumulator::add(EmotionLabel truth, const std::vector<RankedLabel>& ranked) {
  if (ranked.empty()) fail(ErrorCode::invalid_argument, "metrics: empty ranking");
  const std::size_t depth = std::min<std::size_t>(ranked.size(), 3);
  ++n_;
  if (ranked[0].label == truth) ++top1_;
  for (std::size_t i = 0; i < depth; ++i)
    if (ranked[i].label == truth) {
      ++top3_;
      break;
    }
  ++confusion_[label_index(truth)][label_index(ranked[0].label)];
}

EvalMetrics MetricsAccumulator::finish() const {
  EvalMetrics m;
  m.evaluated = n_;
  m.top1_hits = top1_;
  m.top3_hits = top3_;
  m.confusion = confusion_;
  m.failures = failures_;
  if (n_ > 0) {
    m.top1 = static_cast<double>(top1_) / static_cast<double>(n_);
    m.top3 = static_cast<double>(top3_) / static_cast<double>(n_);
  }
  for (std::size_t c = 0; c < kNumEmotions; ++c) {
    std::size_t row = 0;
    for (std::size_t p = 0; p < kNumEmotions; ++p) row += confusion_[c][p];
    m.class_counts[c] = row;
    if (row > 0)
      m.per_class[c] = static_cast<double>(confusion_[c][c]) / static_cast<double>(row);
  }
  return m;
}

EvalMetrics evaluate(const Model& model, const SampleSource& data,
                     const EvalOptions& options) {
  if (data.size() == 0) fail(ErrorCode::invalid_argument, "evaluate: empty dataset");
  if (options.batch_size == 0)
    fail(ErrorCode::invalid_argument, "evaluate: batch size must be positive");
  MetricsAccumulator acc;
  std::vector<Tensor> batch;
  std::vector<EmotionLabel> truths;
  auto flush = [&] {
    if (batch.empty()) return;
    const auto results = predict_topk_batch(model, stack_samples(batch), kDefaultTopK);
    for (std::size_t i = 0; i < results.size(); ++i) acc.add(truths[i], results[i].top);
    batch.clear();
    truths.clear();
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      batch.push_back(data.load(i));
      truths.push_back(data.label(i));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::decode && e.code() != ErrorCode::io) throw;
      acc.add_failure({data.describe(i), e.what()});
      continue;
    }
    if (batch.size() == options.batch_size) flush();
  }
  flush();
  return acc.finish();
}

}  // namespace fer
