#include "model/network.hpp"

#include <algorithm>
#include <numeric>

namespace fer {

namespace {

void check_batch(const Model& model, const Tensor& batch) {
  const auto& input = model.spec().input;
  bool ok = batch.rank() == input.size() + 1;
  for (std::size_t i = 0; ok && i < input.size(); ++i)
    ok = batch.dim(i + 1) == input[i];
  if (!ok) {
    std::vector<std::size_t> expected{1};
    expected.insert(expected.end(), input.begin(), input.end());
    std::string want = Shape(expected).str();
    want.replace(1, 1, "N");
    fail(ErrorCode::shape_mismatch, "forward: expected input batch " + want +
                                        ", got " + batch.shape().str());
  }
}

ConvParams<float> conv_params(const Model& m, std::size_t slot) {
  return {m.tensor(slot), m.tensor(slot + 1)};
}

BatchNormParams<float> bn_params(const Model& m, const LayerSpec& l,
                                 std::size_t slot) {
  BatchNormParams<float> p;
  p.gamma = m.tensor(slot);
  p.beta = m.tensor(slot + 1);
  p.running_mean = m.tensor(slot + 2);
  p.running_var = m.tensor(slot + 3);
  p.momentum = l.momentum;
  p.epsilon = l.epsilon;
  return p;
}

Tensor flatten(Tensor x) {
  const std::size_t n = x.dim(0);
  const std::size_t width = x.size() / n;
  return std::move(x).reshaped(Shape{n, width});
}

}  // namespace

Tensor forward(const Model& model, const Tensor& batch) {
  check_batch(model, batch);
  const auto& layers = model.spec().layers;
  const auto& first = model.layout().first_slot;
  Tensor x = batch;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::conv2d:
        x = conv2d_forward(x, conv_params(model, first[i]));
        break;
      case LayerKind::relu:
        x = relu_forward(std::move(x));
        break;
      case LayerKind::maxpool2:
        x = maxpool2_forward(x);
        break;
      case LayerKind::batch_norm:
        x = batch_norm_infer(x, bn_params(model, l, first[i]));
        break;
      case LayerKind::flatten:
        x = flatten(std::move(x));
        break;
      case LayerKind::dense:
        x = dense_forward(x, model.tensor(first[i]), model.tensor(first[i] + 1));
        break;
      case LayerKind::softmax:
        x = softmax(x);
        break;
    }
  }
  return x;
}

TrainPass forward_train(Model& model, const Tensor& batch) {
  check_batch(model, batch);
  const auto& layers = model.spec().layers;
  const auto& first = model.layout().first_slot;
  TrainPass pass;
  pass.tapes.resize(layers.size());
  Tensor x = batch;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::conv2d: {
        auto r = conv2d(x, conv_params(model, first[i]));
        x = std::move(r.output);
        pass.tapes[i] = std::move(r.tape);
        break;
      }
      case LayerKind::relu: {
        auto r = relu(x);
        x = std::move(r.output);
        pass.tapes[i] = std::move(r.tape);
        break;
      }
      case LayerKind::maxpool2: {
        auto r = maxpool2(x);
        x = std::move(r.output);
        pass.tapes[i] = std::move(r.tape);
        break;
      }
      case LayerKind::batch_norm: {
        auto p = bn_params(model, l, first[i]);
        auto r = batch_norm(x, p, Mode::train);
        model.mutable_tensor(first[i] + 2) = std::move(p.running_mean);
        model.mutable_tensor(first[i] + 3) = std::move(p.running_var);
        x = std::move(r.output);
        pass.tapes[i] = std::move(r.tape);
        break;
      }
      case LayerKind::flatten:
        pass.tapes[i] = FlattenTape{x.shape()};
        x = flatten(std::move(x));
        break;
      case LayerKind::dense: {
        auto r = dense(x, model.tensor(first[i]), model.tensor(first[i] + 1));
        x = std::move(r.output);
        pass.tapes[i] = std::move(r.tape);
        break;
      }
      case LayerKind::softmax:
        x = softmax(x);
        break;
    }
  }
  pass.probs = std::move(x);
  return pass;
}

std::vector<Tensor> backward(const Model& model, TrainPass&& pass,
                             const Tensor& grad_logits) {
  const auto& layers = model.spec().layers;
  const auto& first = model.layout().first_slot;
  if (pass.tapes.size() != layers.size())
    fail(ErrorCode::invalid_argument, "backward: pass does not belong to model");
  std::vector<Tensor> grads(model.slots().size());
  Tensor g = grad_logits;
  // The softmax is composed into the loss gradient; start below it.
  for (std::size_t i = layers.size() - 1; i-- > 0;) {
    const LayerSpec& l = layers[i];
    // The first layer's input gradient is never used.
    const bool need_input = i > 0;
    LayerTape& tape = pass.tapes[i];
    switch (l.kind) {
      case LayerKind::conv2d: {
        auto r = conv2d_backward(std::move(std::get<ConvTape<float>>(tape)), g,
                                 need_input);
        grads[first[i]] = std::move(r.kernel);
        grads[first[i] + 1] = std::move(r.bias);
        g = std::move(r.input);
        break;
      }
      case LayerKind::relu:
        g = relu_backward(std::move(std::get<ReluTape>(tape)), g);
        break;
      case LayerKind::maxpool2:
        g = maxpool2_backward(std::move(std::get<PoolTape>(tape)), g);
        break;
      case LayerKind::batch_norm: {
        auto r = batch_norm_backward(
            std::move(std::get<BatchNormTape<float>>(tape)), g);
        grads[first[i]] = std::move(r.gamma);
        grads[first[i] + 1] = std::move(r.beta);
        g = std::move(r.input);
        break;
      }
      case LayerKind::flatten:
        g = std::move(g).reshaped(std::get<FlattenTape>(tape).input_shape);
        break;
      case LayerKind::dense: {
        auto r = dense_backward(std::move(std::get<DenseTape<float>>(tape)), g,
                                need_input);
        grads[first[i]] = std::move(r.weight);
        grads[first[i] + 1] = std::move(r.bias);
        g = std::move(r.input);
        break;
      }
      case LayerKind::softmax:
        break;
    }
    tape = std::monostate{};
  }
  return grads;
}

ClassificationResult rank_distribution(std::span<const float> probs,
                                       std::size_t k) {
  if (probs.size() != kNumEmotions)
    fail(ErrorCode::shape_mismatch,
         "rank_distribution: expected 8 probabilities, got " +
             std::to_string(probs.size()));
  if (k < 1 || k > kNumEmotions)
    fail(ErrorCode::invalid_argument,
         "top-k: k must be in [1, 8], got " + std::to_string(k));
  std::array<int, kNumEmotions> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  ClassificationResult r;
  std::copy(probs.begin(), probs.end(), r.distribution.begin());
  for (std::size_t i = 0; i < k; ++i)
    r.top.push_back({static_cast<EmotionLabel>(order[i]), probs[order[i]]});
  return r;
}

std::vector<ClassificationResult> predict_topk_batch(const Model& model,
                                                     const Tensor& batch,
                                                     std::size_t k) {
  if (k < 1 || k > kNumEmotions)
    fail(ErrorCode::invalid_argument,
         "top-k: k must be in [1, 8], got " + std::to_string(k));
  const Tensor probs = forward(model, batch);
  std::vector<ClassificationResult> out;
  out.reserve(probs.dim(0));
  for (std::size_t i = 0; i < probs.dim(0); ++i)
    out.push_back(rank_distribution(
        probs.data().subspan(i * kNumEmotions, kNumEmotions), k));
  return out;
}

ClassificationResult predict_topk(const Model& model, const Tensor& image,
                                  std::size_t k) {
  std::vector<std::size_t> batched{1};
  batched.insert(batched.end(), image.shape().extents().begin(),
                 image.shape().extents().end());
  if (batched.size() > Shape::kMaxRank)
    fail(ErrorCode::shape_mismatch,
         "predict_topk: expected a single sample, got " + image.shape().str());
  return predict_topk_batch(model, image.reshaped(Shape(batched)), k).front();
}

}  // namespace fer
