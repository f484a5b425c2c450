#include "train/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "common/error.hpp"
#include "evaluate/metrics.hpp"
#include "model/ferw.hpp"
#include "model/network.hpp"
#include "tensor/ops.hpp"

namespace fer {

ClassWeights compute_class_weights(const std::array<std::size_t, kNumEmotions>& counts) {
  std::size_t total = 0, present = 0;
  for (std::size_t n : counts) {
    total += n;
    present += n > 0;
  }
  if (total == 0) fail(ErrorCode::invalid_argument, "class weights: every class count is zero");
  ClassWeights w{};
  for (std::size_t c = 0; c < kNumEmotions; ++c)
    if (counts[c] > 0)
      w[c] = static_cast<double>(total) /
             (static_cast<double>(present) * static_cast<double>(counts[c]));
  return w;
}

Trainer::Trainer(Model model, const ClassWeights& weights, const AdamHyper& hyper)
    : model_(std::move(model)),
      weights_(weights.begin(), weights.end()),
      hyper_(hyper),
      state_(make_adam_state(model_)) {
  hyper_.validate();
}

Trainer::StepResult Trainer::step(const Tensor& batch, std::span<const int> labels) {
  // Work on a copy so a rejected step leaves the model untouched, running
  // statistics included.
  Model next = model_;
  TrainPass pass = forward_train(next, batch);
  const std::size_t n = pass.probs.dim(0);
  StepResult r;
  r.size = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = pass.probs.data().subspan(i * kNumEmotions, kNumEmotions);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    r.correct += static_cast<int>(best) == labels[i];
  }
  auto ce = weighted_cross_entropy<float>(pass.probs, labels, weights_);
  r.loss = ce.loss;
  const Tensor grad_logits = cross_entropy_backward(std::move(ce.tape));
  const auto grads = backward(next, std::move(pass), grad_logits);
  AdamState state = state_;
  adam_step(next, state, grads, hyper_);
  model_ = std::move(next);
  state_ = std::move(state);
  return r;
}

std::size_t TrainHistory::peak_index() const {
  if (epochs.empty()) fail(ErrorCode::invalid_argument, "training history is empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < epochs.size(); ++i)
    if (epochs[i].eval_top1 > epochs[best].eval_top1) best = i;
  return best;
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,train_acc,eval_top1,eval_top3\n";
  char buf[160];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss,
                  e.train_acc, e.eval_top1, e.eval_top3);
    out += buf;
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::invalid_argument, "epochs must be at least 1");
  if (batch_size < 1) fail(ErrorCode::invalid_argument, "batch size must be at least 1");
  adam.validate();
}

TrainResult train(const Model& initial, const SampleSource& train_set,
                  const SampleSource& eval_set, const TrainConfig& config) {
  config.validate();
  if (train_set.size() == 0) fail(ErrorCode::invalid_argument, "training set is empty");
  if (eval_set.size() == 0) fail(ErrorCode::invalid_argument, "evaluation set is empty");

  ClassWeights weights;
  weights.fill(1.0);
  if (config.class_weighting) {
    std::array<std::size_t, kNumEmotions> counts{};
    for (std::size_t i = 0; i < train_set.size(); ++i) ++counts[label_index(train_set.label(i))];
    weights = compute_class_weights(counts);
  }

  Trainer trainer(initial, weights, config.adam);
  TrainResult result;
  result.best = initial;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto stop_requested = [&] { return config.stop && config.stop->load(); };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng() % i]);

    double loss_sum = 0;
    std::size_t correct = 0, seen = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      if (stop_requested()) {
        result.interrupted = true;
        return result;
      }
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> samples;
      std::vector<int> labels;
      try {
        for (std::size_t k = start; k < end; ++k) {
          samples.push_back(train_set.load(order[k]));
          labels.push_back(label_index(train_set.label(order[k])));
        }
        const auto r = trainer.step(stack_samples(samples), labels);
        loss_sum += r.loss * static_cast<double>(r.size);
        correct += r.correct;
        seen += r.size;
      } catch (const Error& e) {
        throw Error(e.code(), "epoch " + std::to_string(epoch) + " batch " +
                                  std::to_string(batch_index) + ": " + e.what());
      }
    }

    const EvalMetrics m = evaluate(trainer.model(), eval_set);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(seen),
                    static_cast<double>(correct) / static_cast<double>(seen), m.top1, m.top3};
    result.history.epochs.push_back(rec);
    if (result.history.peak_index() == result.history.epochs.size() - 1) {
      result.best = trainer.model();
      if (config.checkpoint_path) save_weights(result.best, *config.checkpoint_path);
    }
    if (config.on_epoch && !config.on_epoch(rec)) break;
  }
  return result;
}

}  // namespace fer
