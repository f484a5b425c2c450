#pragma once

#include <cstdint>
#include <vector>

#include "model/model.hpp"
#include "tensor/tensor.hpp"

namespace fer {

struct AdamHyper {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;  // throws invalid_argument
};

// First and second moments per parameter tensor. A slot with an empty moment
// tensor is frozen (e.g. batch norm running statistics).
template <typename T>
struct BasicAdamState {
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
  std::uint64_t t = 0;
};

using AdamState = BasicAdamState<float>;

// Zero moments shaped like the model's trainable slots.
AdamState make_adam_state(const Model& model);

// One Adam update of params[i] by grads[i]. Arithmetic runs in double.
// Shapes must agree; frozen slots need an empty gradient. A non-finite
// gradient rejects the whole step (ErrorCode::non_finite) before anything is
// modified.
template <typename T>
void adam_step(std::vector<BasicTensor<T>*> params, BasicAdamState<T>& state,
               const std::vector<BasicTensor<T>>& grads, const AdamHyper& hyper);

// Convenience for a whole model, with grads from backward().
void adam_step(Model& model, AdamState& state, const std::vector<Tensor>& grads,
               const AdamHyper& hyper);

}  // namespace fer
