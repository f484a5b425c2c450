#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "model/labels.hpp"
#include "tensor/tensor.hpp"

namespace fer {

struct LabeledSample {
  std::filesystem::path path;
  EmotionLabel label;
};

// Directory-per-label corpus: <root>/<label>/**/*.{jpg,jpeg,png}.
struct LabeledDataset {
  std::filesystem::path root;
  std::vector<LabeledSample> samples;
  std::array<std::size_t, kNumEmotions> counts{};
  // One entry per skipped file: "<path>: <reason>".
  std::vector<std::string> warnings;

  std::size_t size() const { return samples.size(); }
};

// Files are ordered by label index, then by path within the label directory.
// Files whose header is neither JPEG nor PNG are skipped with a warning.
// Throws io when root is missing and invalid_argument when nothing loads.
LabeledDataset load_labeled_dataset(const std::filesystem::path& root);

// Random access to preprocessed samples for training and evaluation.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual EmotionLabel label(std::size_t i) const = 0;
  // Throws Error with code decode or io for a sample that cannot be read;
  // callers treat those as per-sample failures.
  virtual Tensor load(std::size_t i) const = 0;
  virtual std::string describe(std::size_t i) const = 0;
};

// Decodes and resizes image files on demand (no crop box).
class DatasetSource final : public SampleSource {
 public:
  explicit DatasetSource(LabeledDataset dataset) : data_(std::move(dataset)) {}
  std::size_t size() const override { return data_.size(); }
  EmotionLabel label(std::size_t i) const override { return data_.samples.at(i).label; }
  Tensor load(std::size_t i) const override;
  std::string describe(std::size_t i) const override;
  const LabeledDataset& dataset() const { return data_; }

 private:
  LabeledDataset data_;
};

// Pre-built tensors of any geometry.
class TensorSource final : public SampleSource {
 public:
  TensorSource() = default;
  TensorSource(std::vector<Tensor> samples, std::vector<EmotionLabel> labels);
  void add(Tensor sample, EmotionLabel label);
  std::size_t size() const override { return samples_.size(); }
  EmotionLabel label(std::size_t i) const override { return labels_.at(i); }
  Tensor load(std::size_t i) const override { return samples_.at(i); }
  std::string describe(std::size_t i) const override;

 private:
  std::vector<Tensor> samples_;
  std::vector<EmotionLabel> labels_;
};

// Stacks samples [indices] into one N x ... batch; all must share a shape.
Tensor stack_samples(const std::vector<Tensor>& samples);

}  // namespace fer
