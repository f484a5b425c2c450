#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "model/labels.hpp"
#include "model/model.hpp"
#include "tensor/ops.hpp"

namespace fer {

// Infer-mode forward pass: batch N x input -> probabilities N x 8. Uses batch
// norm running statistics; the model is not modified.
Tensor forward(const Model& model, const Tensor& batch);

struct FlattenTape {
  Shape input_shape;
};

using LayerTape = std::variant<std::monostate, ConvTape<float>, ReluTape,
                               PoolTape, BatchNormTape<float>, FlattenTape,
                               DenseTape<float>>;

struct TrainPass {
  Tensor probs;
  std::vector<LayerTape> tapes;  // one per layer; the softmax slot is empty
};

// Train-mode forward pass. Batch norm layers normalise with batch statistics
// and update the model's running statistics.
TrainPass forward_train(Model& model, const Tensor& batch);

// Backpropagates the gradient with respect to the logits (the input of the
// final softmax). Returns one tensor per parameter slot; non-trainable slots
// (running statistics) get an empty tensor.
std::vector<Tensor> backward(const Model& model, TrainPass&& pass,
                             const Tensor& grad_logits);

struct RankedLabel {
  EmotionLabel label;
  float confidence;
};

struct ClassificationResult {
  std::vector<RankedLabel> top;
  std::array<float, kNumEmotions> distribution{};
};

inline constexpr std::size_t kDefaultTopK = 3;

// Ranks an 8-way distribution by descending confidence, ties by ascending
// label index, and keeps the first k.
ClassificationResult rank_distribution(std::span<const float> probs,
                                       std::size_t k = kDefaultTopK);

// image: a single H x W x C sample in the model's input geometry.
ClassificationResult predict_topk(const Model& model, const Tensor& image,
                                  std::size_t k = kDefaultTopK);
std::vector<ClassificationResult> predict_topk_batch(const Model& model,
                                                     const Tensor& batch,
                                                     std::size_t k = kDefaultTopK);

}  // namespace fer
