#include "tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tensor/ops.hpp"

namespace fer {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const GradCheckEntry& e) { return e.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradCheckReport grad_check(const GradCheckProblem& problem, double tolerance,
                           double step) {
  std::size_t scalars = 0;
  for (const auto& t : problem.inputs) scalars += t.size();
  if (scalars > kGradCheckMaxScalars)
    fail(ErrorCode::invalid_argument,
         "grad_check: " + std::to_string(scalars) +
             " scalars exceed the finite-difference budget of " +
             std::to_string(kGradCheckMaxScalars));

  GradCheckReport report;
  report.op = problem.op;
  report.tolerance = tolerance;
  const std::vector<Tensor64> analytic = problem.gradient(problem.inputs);

  std::vector<Tensor64> probe = problem.inputs;
  for (std::size_t t = 0; t < probe.size(); ++t) {
    GradCheckEntry entry;
    entry.name = t < problem.names.size() ? problem.names[t] : std::to_string(t);
    for (std::size_t i = 0; i < probe[t].size(); ++i) {
      const double saved = probe[t][i];
      probe[t][i] = saved + step;
      const double up = problem.loss(probe);
      probe[t][i] = saved - step;
      const double down = problem.loss(probe);
      probe[t][i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double exact = analytic[t][i];
      const double denom =
          std::max({std::abs(numeric), std::abs(exact), kGradCheckFloor});
      const double rel = std::abs(numeric - exact) / denom;
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
      }
    }
    entry.passed = entry.max_rel_error < tolerance;
    report.entries.push_back(entry);
  }
  return report;
}

namespace {

Tensor64 random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                       double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor64 t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

double project(const Tensor64& y, const Tensor64& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

}  // namespace

GradCheckProblem conv2d_check_problem(Shape input, std::size_t kernel,
                                      std::size_t filters, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t cin = input[3];
  GradCheckProblem p;
  p.op = "conv2d";
  p.names = {"input", "kernel", "bias"};
  p.inputs = {random_tensor(input, rng),
              random_tensor(Shape{kernel, kernel, cin, filters}, rng),
              random_tensor(Shape{filters}, rng)};
  const Tensor64 r = random_tensor(
      Shape{input[0], input[1] - kernel + 1, input[2] - kernel + 1, filters},
      rng);
  p.loss = [r](const std::vector<Tensor64>& x) {
    return project(conv2d_forward(x[0], ConvParams<double>{x[1], x[2]}), r);
  };
  p.gradient = [r](const std::vector<Tensor64>& x) {
    auto fwd = conv2d(x[0], ConvParams<double>{x[1], x[2]});
    auto g = conv2d_backward(std::move(fwd.tape), r);
    return std::vector<Tensor64>{g.input, g.kernel, g.bias};
  };
  return p;
}

GradCheckProblem dense_check_problem(std::size_t rows, std::size_t in,
                                     std::size_t out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckProblem p;
  p.op = "dense";
  p.names = {"input", "weight", "bias"};
  p.inputs = {random_tensor(Shape{rows, in}, rng),
              random_tensor(Shape{in, out}, rng),
              random_tensor(Shape{out}, rng)};
  const Tensor64 r = random_tensor(Shape{rows, out}, rng);
  p.loss = [r](const std::vector<Tensor64>& x) {
    return project(dense_forward(x[0], x[1], x[2]), r);
  };
  p.gradient = [r](const std::vector<Tensor64>& x) {
    auto fwd = dense(x[0], x[1], x[2]);
    auto g = dense_backward(std::move(fwd.tape), r);
    return std::vector<Tensor64>{g.input, g.weight, g.bias};
  };
  return p;
}

GradCheckProblem relu_check_problem(Shape shape, double margin,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckProblem p;
  p.op = "relu";
  p.names = {"input"};
  Tensor64 x = random_tensor(shape, rng, margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& v : x.data())
    if (sign(rng)) v = -v;
  p.inputs = {std::move(x)};
  const Tensor64 r = random_tensor(shape, rng);
  p.loss = [r](const std::vector<Tensor64>& x) {
    return project(relu_forward(x[0]), r);
  };
  p.gradient = [r](const std::vector<Tensor64>& x) {
    auto fwd = relu(x[0]);
    return std::vector<Tensor64>{relu_backward(std::move(fwd.tape), r)};
  };
  return p;
}

GradCheckProblem maxpool2_check_problem(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckProblem p;
  p.op = "maxpool2";
  p.names = {"input"};
  Tensor64 x(shape);
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1],
              order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
  // Neighbouring values differ by 0.01, far beyond the 1e-4 probe step.
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = 0.01 * static_cast<double>(order[i]) - 0.005 * x.size();
  p.inputs = {std::move(x)};
  const Tensor64 r = random_tensor(
      Shape{shape[0], shape[1] / 2, shape[2] / 2, shape[3]}, rng);
  p.loss = [r](const std::vector<Tensor64>& x) {
    return project(maxpool2_forward(x[0]), r);
  };
  p.gradient = [r](const std::vector<Tensor64>& x) {
    auto fwd = maxpool2(x[0]);
    return std::vector<Tensor64>{maxpool2_backward(std::move(fwd.tape), r)};
  };
  return p;
}

GradCheckProblem batch_norm_check_problem(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t c = shape[shape.rank() - 1];
  GradCheckProblem p;
  p.op = "batch_norm";
  p.names = {"input", "gamma", "beta"};
  p.inputs = {random_tensor(shape, rng, -2.0, 2.0),
              random_tensor(Shape{c}, rng, 0.5, 1.5),
              random_tensor(Shape{c}, rng)};
  const Tensor64 r = random_tensor(shape, rng);
  auto params = [c](const std::vector<Tensor64>& x) {
    auto bn = BatchNormParams<double>::identity(c);
    bn.gamma = x[1];
    bn.beta = x[2];
    return bn;
  };
  p.loss = [r, params](const std::vector<Tensor64>& x) {
    auto bn = params(x);
    return project(batch_norm(x[0], bn, Mode::train).output, r);
  };
  p.gradient = [r, params](const std::vector<Tensor64>& x) {
    auto bn = params(x);
    auto fwd = batch_norm(x[0], bn, Mode::train);
    auto g = batch_norm_backward(std::move(fwd.tape), r);
    return std::vector<Tensor64>{g.input, g.gamma, g.beta};
  };
  return p;
}

GradCheckProblem softmax_cross_entropy_check_problem(std::size_t rows,
                                                     std::size_t classes,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckProblem p;
  p.op = "softmax_cross_entropy";
  p.names = {"logits"};
  p.inputs = {random_tensor(Shape{rows, classes}, rng, -3.0, 3.0)};
  std::vector<int> labels(rows);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(classes) - 1);
  for (int& y : labels) y = pick(rng);
  std::vector<double> weights(classes);
  std::uniform_real_distribution<double> w(0.2, 3.0);
  for (double& v : weights) v = w(rng);
  p.loss = [labels, weights](const std::vector<Tensor64>& x) {
    return static_cast<double>(
        weighted_cross_entropy<double>(softmax(x[0]), labels, weights).loss);
  };
  p.gradient = [labels, weights](const std::vector<Tensor64>& x) {
    auto fwd = weighted_cross_entropy<double>(softmax(x[0]), labels, weights);
    return std::vector<Tensor64>{cross_entropy_backward(std::move(fwd.tape))};
  };
  return p;
}

}  // namespace fer
