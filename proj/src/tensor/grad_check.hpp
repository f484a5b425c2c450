#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tensor/tensor.hpp"

namespace fer {

// A scalar function of named 64-bit tensors together with its analytic
// gradient. Layer ops are turned into one by projecting their output onto a
// fixed random tensor, loss = sum(r * op(x)).
struct GradCheckProblem {
  std::string op;
  std::vector<std::string> names;
  std::vector<Tensor64> inputs;
  std::function<double(const std::vector<Tensor64>&)> loss;
  std::function<std::vector<Tensor64>(const std::vector<Tensor64>&)> gradient;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::string op;
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;

  bool passed() const;
  double max_rel_error() const;
};

inline constexpr double kGradCheckStep = 1e-4;
// Denominator floor for the relative error so exact zeros (ReLU off-region,
// unused classes) do not divide by zero.
inline constexpr double kGradCheckFloor = 1e-8;
inline constexpr std::size_t kGradCheckMaxScalars = 10000;

// Central differences with the given step against the analytic gradient.
// Relative error per element is |a - n| / max(|a|, |n|, kGradCheckFloor).
GradCheckReport grad_check(const GradCheckProblem& problem, double tolerance,
                           double step = kGradCheckStep);

// Problem builders for each layer op, with inputs drawn from `seed`.
GradCheckProblem conv2d_check_problem(Shape input, std::size_t kernel,
                                      std::size_t filters, std::uint64_t seed);
GradCheckProblem dense_check_problem(std::size_t rows, std::size_t in,
                                     std::size_t out, std::uint64_t seed);
// Inputs are kept at least `margin` away from zero.
GradCheckProblem relu_check_problem(Shape shape, double margin,
                                    std::uint64_t seed);
// Inputs are distinct, spaced far enough apart that a finite-difference step
// cannot change any window's argmax.
GradCheckProblem maxpool2_check_problem(Shape shape, std::uint64_t seed);
GradCheckProblem batch_norm_check_problem(Shape shape, std::uint64_t seed);
GradCheckProblem softmax_cross_entropy_check_problem(std::size_t rows,
                                                     std::size_t classes,
                                                     std::uint64_t seed);

}  // namespace fer
