#pragma once

// The differentiable layer operations of the network. Each forward call
// returns its output together with a tape holding what the matching backward
// call needs. A tape can be consumed once: backward takes it by rvalue and
// rejects a tape that was already used.
//
// Layout conventions: images are N x H x W x C, convolution kernels are
// Kh x Kw x Cin x Cout, dense weights are Din x Dout.

#include <cstdint>
#include <span>
#include <vector>

#include "tensor/tensor.hpp"

namespace fer {

enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// conv2d: valid padding, stride 1, cross-correlation plus per-channel bias.

template <typename T>
struct ConvParams {
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

template <typename T>
struct ConvTape {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
  bool live = false;
};

template <typename T>
struct ConvResult {
  BasicTensor<T> output;
  ConvTape<T> tape;
};

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;  // empty when the input gradient was not requested
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const ConvParams<T>& params);
template <typename T>
ConvResult<T> conv2d(const BasicTensor<T>& input, const ConvParams<T>& params);
template <typename T>
ConvGrads<T> conv2d_backward(ConvTape<T>&& tape,
                             const BasicTensor<T>& grad_output,
                             bool want_input_grad = true);

// ---------------------------------------------------------------------------
// maxpool2: disjoint 2x2 windows, stride 2, trailing odd row/column dropped.

struct PoolTape {
  Shape input_shape;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
  bool live = false;
};

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  PoolTape tape;
};

template <typename T>
BasicTensor<T> maxpool2_forward(const BasicTensor<T>& input);
template <typename T>
PoolResult<T> maxpool2(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> maxpool2_backward(PoolTape&& tape,
                                 const BasicTensor<T>& grad_output);

// ---------------------------------------------------------------------------
// batch_norm over the last axis; statistics are taken over every other axis
// (N*H*W for images).

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEpsilon = 1e-5;

template <typename T>
struct BatchNormParams {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  double momentum = kBatchNormMomentum;
  double epsilon = kBatchNormEpsilon;

  static BatchNormParams identity(std::size_t channels);
};

template <typename T>
struct BatchNormTape {
  BasicTensor<T> normalized;  // x-hat
  std::vector<T> inv_std;
  BasicTensor<T> gamma;
  bool live = false;
};

template <typename T>
struct BatchNormResult {
  BasicTensor<T> output;
  BatchNormTape<T> tape;  // not live in infer mode
};

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

// Train mode normalizes with batch statistics and folds them into the running
// statistics; infer mode reads the running statistics and mutates nothing.
template <typename T>
BatchNormResult<T> batch_norm(const BasicTensor<T>& input,
                              BatchNormParams<T>& params, Mode mode);
template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& input,
                                const BatchNormParams<T>& params);
template <typename T>
BatchNormGrads<T> batch_norm_backward(BatchNormTape<T>&& tape,
                                      const BasicTensor<T>& grad_output);

// ---------------------------------------------------------------------------
// dense: input (N x Din) . weight (Din x Dout) + bias

template <typename T>
struct DenseTape {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  bool live = false;
};

template <typename T>
struct DenseResult {
  BasicTensor<T> output;
  DenseTape<T> tape;
};

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input,
                             const BasicTensor<T>& weight,
                             const BasicTensor<T>& bias);
template <typename T>
DenseResult<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                     const BasicTensor<T>& bias);
template <typename T>
DenseGrads<T> dense_backward(DenseTape<T>&& tape,
                             const BasicTensor<T>& grad_output,
                             bool want_input_grad = true);

// ---------------------------------------------------------------------------
// relu: the gradient at exactly zero is zero.

struct ReluTape {
  std::vector<std::uint8_t> active;
  Shape shape;
  bool live = false;
};

template <typename T>
struct ReluResult {
  BasicTensor<T> output;
  ReluTape tape;
};

template <typename T>
BasicTensor<T> relu_forward(BasicTensor<T> input);
template <typename T>
ReluResult<T> relu(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> relu_backward(ReluTape&& tape, const BasicTensor<T>& grad_output);

// ---------------------------------------------------------------------------
// softmax over the rows of an N x K tensor.

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

// ---------------------------------------------------------------------------
// Class-weighted cross-entropy on softmax probabilities. The backward pass is
// composed with softmax and yields the gradient with respect to the logits.

inline constexpr double kProbabilityFloor = 1e-12;

template <typename T>
struct CrossEntropyTape {
  BasicTensor<T> probs;
  std::vector<int> labels;
  std::vector<T> class_weights;
  bool live = false;
};

template <typename T>
struct CrossEntropyResult {
  T loss{};
  CrossEntropyTape<T> tape;
};

template <typename T>
CrossEntropyResult<T> weighted_cross_entropy(const BasicTensor<T>& probs,
                                             std::span<const int> labels,
                                             std::span<const T> class_weights);
template <typename T>
BasicTensor<T> cross_entropy_backward(CrossEntropyTape<T>&& tape);

}  // namespace fer
