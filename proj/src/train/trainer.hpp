#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "model/labels.hpp"
#include "model/model.hpp"
#include "train/adam.hpp"

namespace fer {

using ClassWeights = std::array<double, kNumEmotions>;

// w_c = N / (K * n_c) over the K classes present; absent classes get 0.
// Throws invalid_argument when every count is zero.
ClassWeights compute_class_weights(const std::array<std::size_t, kNumEmotions>& counts);

// Owns a model and its optimizer state; one step = train-mode forward,
// weighted cross-entropy, backward, Adam.
class Trainer {
 public:
  Trainer(Model model, const ClassWeights& weights, const AdamHyper& hyper = {});

  struct StepResult {
    double loss = 0;          // mean weighted loss over the batch
    std::size_t correct = 0;  // top-1 hits before the update
    std::size_t size = 0;
  };
  StepResult step(const Tensor& batch, std::span<const int> labels);

  const Model& model() const { return model_; }
  const AdamState& optimizer() const { return state_; }
  std::uint64_t steps() const { return state_.t; }

 private:
  Model model_;
  std::vector<float> weights_;
  AdamHyper hyper_;
  AdamState state_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double train_acc = 0;
  double eval_top1 = 0;
  double eval_top3 = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  // Index of the epoch with the highest eval top-1; the earliest wins ties.
  // Throws when no epoch has completed.
  std::size_t peak_index() const;
  // Header "epoch,train_loss,train_acc,eval_top1,eval_top3", one row per epoch.
  std::string to_csv() const;
};

struct TrainConfig {
  std::size_t epochs = 13;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool class_weighting = true;
  AdamHyper adam;
  // When set, the best checkpoint is written here whenever the peak improves.
  std::optional<std::filesystem::path> checkpoint_path;
  // Called after every epoch; return false to stop early.
  std::function<bool(const EpochRecord&)> on_epoch;
  // Polled between steps; when it becomes true training stops after the
  // current step and the finished epochs are kept.
  const std::atomic<bool>* stop = nullptr;

  void validate() const;
};

struct TrainResult {
  TrainHistory history;
  Model best;  // parameters at the peak epoch
  bool interrupted = false;
};

// Deterministic for a fixed seed: the epoch order is a Fisher-Yates shuffle
// driven by mt19937_64(seed).
TrainResult train(const Model& initial, const SampleSource& train_set,
                  const SampleSource& eval_set, const TrainConfig& config);

}  // namespace fer
