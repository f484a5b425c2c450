#include "train/adam.hpp"

#include <cmath>
#include <string>

#include "common/error.hpp"

namespace fer {

void AdamHyper::validate() const {
  const bool ok = std::isfinite(alpha) && alpha >= 0 && beta1 >= 0 && beta1 < 1 &&
                  beta2 >= 0 && beta2 < 1 && std::isfinite(epsilon) && epsilon > 0;
  if (!ok) fail(ErrorCode::invalid_argument, "adam: invalid hyperparameters");
}

AdamState make_adam_state(const Model& model) {
  AdamState s;
  for (std::size_t i = 0; i < model.slots().size(); ++i) {
    if (model.slots()[i].trainable) {
      s.m.emplace_back(model.tensor(i).shape());
      s.v.emplace_back(model.tensor(i).shape());
    } else {
      s.m.emplace_back();
      s.v.emplace_back();
    }
  }
  return s;
}

template <typename T>
void adam_step(std::vector<BasicTensor<T>*> params, BasicAdamState<T>& state,
               const std::vector<BasicTensor<T>>& grads, const AdamHyper& hyper) {
  hyper.validate();
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n)
    fail(ErrorCode::shape_mismatch,
         "adam: " + std::to_string(n) + " parameters, " + std::to_string(grads.size()) +
             " gradients, " + std::to_string(state.m.size()) + " moment slots");
  for (std::size_t i = 0; i < n; ++i) {
    const bool frozen = state.m[i].empty();
    if (frozen) {
      if (!grads[i].empty())
        fail(ErrorCode::shape_mismatch,
             "adam: gradient given for frozen slot " + std::to_string(i));
      continue;
    }
    if (grads[i].shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape() ||
        state.v[i].shape() != params[i]->shape())
      fail(ErrorCode::shape_mismatch,
           "adam: slot " + std::to_string(i) + " parameter " + params[i]->shape().str() +
               " vs gradient " + grads[i].shape().str());
    for (T g : grads[i].data())
      if (!std::isfinite(g))
        fail(ErrorCode::non_finite,
             "adam: non-finite gradient in slot " + std::to_string(i) + "; step rejected");
  }

  const std::uint64_t t = state.t + 1;
  const double b1 = hyper.beta1, b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < n; ++i) {
    if (state.m[i].empty()) continue;
    auto theta = params[i]->data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = g[k];
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double mhat = mk / c1;
      const double vhat = vk / c2;
      theta[k] = static_cast<T>(theta[k] - hyper.alpha * mhat / (std::sqrt(vhat) + hyper.epsilon));
    }
  }
  state.t = t;
}

template void adam_step<float>(std::vector<BasicTensor<float>*>, BasicAdamState<float>&,
                               const std::vector<BasicTensor<float>>&, const AdamHyper&);
template void adam_step<double>(std::vector<BasicTensor<double>*>, BasicAdamState<double>&,
                                const std::vector<BasicTensor<double>>&, const AdamHyper&);

void adam_step(Model& model, AdamState& state, const std::vector<Tensor>& grads,
               const AdamHyper& hyper) {
  std::vector<Tensor*> params;
  params.reserve(model.slots().size());
  for (std::size_t i = 0; i < model.slots().size(); ++i)
    params.push_back(&model.mutable_tensor(i));
  adam_step(std::move(params), state, grads, hyper);
}

}  // namespace fer
