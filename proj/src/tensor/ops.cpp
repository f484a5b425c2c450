#include "tensor/ops.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "tensor/gemm.hpp"

namespace fer {

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* op,
                  const char* what) {
  if (s.rank() != rank)
    fail(ErrorCode::shape_mismatch,
         std::string(op) + ": " + what + " must have rank " +
             std::to_string(rank) + ", got shape " + s.str());
}

void require_live(bool live, const char* op) {
  if (!live)
    fail(ErrorCode::invalid_argument,
         std::string(op) + ": gradient tape was already consumed or is empty");
}

template <typename T>
void require_grad_shape(const BasicTensor<T>& grad, const Shape& expected,
                        const char* op) {
  if (grad.shape() != expected)
    fail(ErrorCode::shape_mismatch,
         std::string(op) + ": output gradient shape " + grad.shape().str() +
             " does not match forward output " + expected.str());
}

struct ConvGeometry {
  std::size_t n, h, w, cin, k, cout, oh, ow;
  std::size_t patch() const { return k * k * cin; }
  std::size_t pixels() const { return oh * ow; }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input,
                           const ConvParams<T>& params) {
  require_rank(input.shape(), 4, "conv2d", "input");
  require_rank(params.kernel.shape(), 4, "conv2d", "kernel");
  require_rank(params.bias.shape(), 1, "conv2d", "bias");
  const auto& ks = params.kernel.shape();
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 ks[0],        ks[3],        0,            0};
  if (ks[0] != ks[1])
    fail(ErrorCode::shape_mismatch,
         "conv2d: kernel must be square, got Kh=" + std::to_string(ks[0]) +
             " Kw=" + std::to_string(ks[1]));
  if (ks[2] != g.cin)
    fail(ErrorCode::shape_mismatch,
         "conv2d: kernel Cin=" + std::to_string(ks[2]) +
             " does not match input channels " + std::to_string(g.cin));
  if (params.bias.dim(0) != g.cout)
    fail(ErrorCode::shape_mismatch,
         "conv2d: bias length " + std::to_string(params.bias.dim(0)) +
             " does not match Cout=" + std::to_string(g.cout));
  if (g.h < g.k)
    fail(ErrorCode::shape_mismatch,
         "conv2d: input height " + std::to_string(g.h) +
             " is smaller than kernel height " + std::to_string(g.k));
  if (g.w < g.k)
    fail(ErrorCode::shape_mismatch,
         "conv2d: input width " + std::to_string(g.w) +
             " is smaller than kernel width " + std::to_string(g.k));
  g.oh = g.h - g.k + 1;
  g.ow = g.w - g.k + 1;
  return g;
}

// One row per output pixel, holding the k x k x cin receptive field. In NHWC
// each kernel row of the field is contiguous in the input.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t run = g.k * g.cin;
  for (std::size_t y = 0; y < g.oh; ++y)
    for (std::size_t x = 0; x < g.ow; ++x) {
      T* dst = cols + (y * g.ow + x) * g.patch();
      for (std::size_t ky = 0; ky < g.k; ++ky)
        std::memcpy(dst + ky * run, image + ((y + ky) * g.w + x) * g.cin,
                    run * sizeof(T));
    }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
  const std::size_t run = g.k * g.cin;
  for (std::size_t y = 0; y < g.oh; ++y)
    for (std::size_t x = 0; x < g.ow; ++x) {
      const T* src = cols + (y * g.ow + x) * g.patch();
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        T* dst = image + ((y + ky) * g.w + x) * g.cin;
        const T* s = src + ky * run;
        for (std::size_t i = 0; i < run; ++i) dst[i] += s[i];
      }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const ConvParams<T>& params) {
  const ConvGeometry g = conv_geometry(input, params);
  BasicTensor<T> out(Shape{g.n, g.oh, g.ow, g.cout});
  std::vector<T> cols(g.pixels() * g.patch());
  const T* kernel = params.kernel.data().data();
  const T* bias = params.bias.data().data();
  for (std::size_t n = 0; n < g.n; ++n) {
    T* dst = out.data().data() + n * g.pixels() * g.cout;
    for (std::size_t p = 0; p < g.pixels(); ++p)
      std::memcpy(dst + p * g.cout, bias, g.cout * sizeof(T));
    im2col(input.data().data() + n * g.h * g.w * g.cin, g, cols.data());
    detail::gemm<T>(false, false, g.pixels(), g.cout, g.patch(), T{1},
                    cols.data(), g.patch(), kernel, g.cout, T{1}, dst, g.cout);
  }
  return out;
}

template <typename T>
ConvResult<T> conv2d(const BasicTensor<T>& input, const ConvParams<T>& params) {
  ConvResult<T> r{conv2d_forward(input, params), {}};
  r.tape = ConvTape<T>{input, params.kernel, true};
  return r;
}

template <typename T>
ConvGrads<T> conv2d_backward(ConvTape<T>&& tape,
                             const BasicTensor<T>& grad_output,
                             bool want_input_grad) {
  require_live(tape.live, "conv2d_backward");
  tape.live = false;
  const ConvParams<T> shapes{tape.kernel,
                             BasicTensor<T>(Shape{tape.kernel.dim(3)})};
  const ConvGeometry g = conv_geometry(tape.input, shapes);
  require_grad_shape(grad_output, Shape{g.n, g.oh, g.ow, g.cout},
                     "conv2d_backward");

  ConvGrads<T> grads;
  grads.kernel = BasicTensor<T>(tape.kernel.shape());
  grads.bias = BasicTensor<T>(Shape{g.cout});
  if (want_input_grad) grads.input = BasicTensor<T>(tape.input.shape());

  std::vector<T> cols(g.pixels() * g.patch());
  std::vector<T> dcols(want_input_grad ? cols.size() : 0);
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* dy = grad_output.data().data() + n * g.pixels() * g.cout;
    for (std::size_t p = 0; p < g.pixels(); ++p)
      for (std::size_t c = 0; c < g.cout; ++c)
        grads.bias[c] += dy[p * g.cout + c];
    im2col(tape.input.data().data() + n * g.h * g.w * g.cin, g, cols.data());
    // dK += cols^T . dY
    detail::gemm<T>(true, false, g.patch(), g.cout, g.pixels(), T{1},
                    cols.data(), g.patch(), dy, g.cout, T{1},
                    grads.kernel.data().data(), g.cout);
    if (want_input_grad) {
      // dcols = dY . K^T
      detail::gemm<T>(false, true, g.pixels(), g.patch(), g.cout, T{1}, dy,
                      g.cout, tape.kernel.data().data(), g.cout, T{0},
                      dcols.data(), g.patch());
      col2im_add(dcols.data(), g,
                 grads.input.data().data() + n * g.h * g.w * g.cin);
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// maxpool2

namespace {

template <typename T>
PoolResult<T> maxpool2_impl(const BasicTensor<T>& input, bool record) {
  require_rank(input.shape(), 4, "maxpool2", "input");
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2),
                    c = input.dim(3);
  if (h < 2 || w < 2)
    fail(ErrorCode::shape_mismatch,
         "maxpool2: input spatial extent must be >= 2, got " +
             input.shape().str());
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult<T> r{BasicTensor<T>(Shape{n, oh, ow, c}), {}};
  if (record) {
    r.tape.input_shape = input.shape();
    r.tape.argmax.resize(r.output.size());
    r.tape.live = true;
  }
  const T* x = input.data().data();
  T* y = r.output.data().data();
  std::size_t out = 0;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch, ++out) {
          // Window order is row-major; strict > keeps the first maximum.
          std::size_t best = ((b * h + 2 * oy) * w + 2 * ox) * c + ch;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t i =
                  ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
              if (x[i] > x[best]) best = i;
            }
          y[out] = x[best];
          if (record) r.tape.argmax[out] = static_cast<std::uint32_t>(best);
        }
  return r;
}

}  // namespace

template <typename T>
BasicTensor<T> maxpool2_forward(const BasicTensor<T>& input) {
  return maxpool2_impl(input, false).output;
}

template <typename T>
PoolResult<T> maxpool2(const BasicTensor<T>& input) {
  return maxpool2_impl(input, true);
}

template <typename T>
BasicTensor<T> maxpool2_backward(PoolTape&& tape,
                                 const BasicTensor<T>& grad_output) {
  require_live(tape.live, "maxpool2_backward");
  tape.live = false;
  const Shape& in = tape.input_shape;
  require_grad_shape(grad_output, Shape{in[0], in[1] / 2, in[2] / 2, in[3]},
                     "maxpool2_backward");
  BasicTensor<T> grad(in);
  for (std::size_t i = 0; i < grad_output.size(); ++i)
    grad[tape.argmax[i]] += grad_output[i];
  return grad;
}

// ---------------------------------------------------------------------------
// batch_norm

template <typename T>
BatchNormParams<T> BatchNormParams<T>::identity(std::size_t channels) {
  BatchNormParams p;
  p.gamma = BasicTensor<T>(Shape{channels}, T{1});
  p.beta = BasicTensor<T>(Shape{channels}, T{0});
  p.running_mean = BasicTensor<T>(Shape{channels}, T{0});
  p.running_var = BasicTensor<T>(Shape{channels}, T{1});
  return p;
}

namespace {

template <typename T>
std::size_t check_batch_norm(const BasicTensor<T>& input,
                             const BatchNormParams<T>& p) {
  if (input.rank() < 2)
    fail(ErrorCode::shape_mismatch,
         "batch_norm: input must have rank >= 2, got " + input.shape().str());
  const std::size_t c = input.dim(input.rank() - 1);
  for (const auto* t : {&p.gamma, &p.beta, &p.running_mean, &p.running_var})
    if (t->rank() != 1 || t->dim(0) != c)
      fail(ErrorCode::shape_mismatch,
           "batch_norm: parameter shape " + t->shape().str() +
               " does not match input channels " + std::to_string(c));
  return c;
}

}  // namespace

template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& input,
                                const BatchNormParams<T>& p) {
  const std::size_t c = check_batch_norm(input, p);
  BasicTensor<T> out(input.shape());
  std::vector<T> scale(c), shift(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T inv = T{1} / std::sqrt(p.running_var[ch] + static_cast<T>(p.epsilon));
    scale[ch] = p.gamma[ch] * inv;
    shift[ch] = p.beta[ch] - p.running_mean[ch] * scale[ch];
  }
  const T* x = input.data().data();
  T* y = out.data().data();
  for (std::size_t i = 0; i < input.size(); i += c)
    for (std::size_t ch = 0; ch < c; ++ch)
      y[i + ch] = x[i + ch] * scale[ch] + shift[ch];
  return out;
}

template <typename T>
BatchNormResult<T> batch_norm(const BasicTensor<T>& input,
                              BatchNormParams<T>& p, Mode mode) {
  if (mode == Mode::infer) return {batch_norm_infer(input, p), {}};

  const std::size_t c = check_batch_norm(input, p);
  const std::size_t m = input.size() / c;
  if (m < 2)
    fail(ErrorCode::invalid_argument,
         "batch_norm: train mode needs at least 2 values per channel, got " +
             std::to_string(m));

  // Accumulate in double so float batches do not lose the mean.
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  const T* x = input.data().data();
  for (std::size_t i = 0; i < input.size(); i += c)
    for (std::size_t ch = 0; ch < c; ++ch) mean[ch] += x[i + ch];
  for (auto& v : mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < input.size(); i += c)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = x[i + ch] - mean[ch];
      var[ch] += d * d;
    }
  for (auto& v : var) v /= static_cast<double>(m);

  BatchNormResult<T> r;
  r.output = BasicTensor<T>(input.shape());
  r.tape.normalized = BasicTensor<T>(input.shape());
  r.tape.inv_std.resize(c);
  r.tape.gamma = p.gamma;
  r.tape.live = true;
  std::vector<T> mu(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    r.tape.inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + p.epsilon));
    mu[ch] = static_cast<T>(mean[ch]);
  }
  T* y = r.output.data().data();
  T* xhat = r.tape.normalized.data().data();
  for (std::size_t i = 0; i < input.size(); i += c)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T h = (x[i + ch] - mu[ch]) * r.tape.inv_std[ch];
      xhat[i + ch] = h;
      y[i + ch] = p.gamma[ch] * h + p.beta[ch];
    }

  const double keep = p.momentum;
  for (std::size_t ch = 0; ch < c; ++ch) {
    p.running_mean[ch] =
        static_cast<T>(keep * p.running_mean[ch] + (1.0 - keep) * mean[ch]);
    p.running_var[ch] =
        static_cast<T>(keep * p.running_var[ch] + (1.0 - keep) * var[ch]);
  }
  return r;
}

template <typename T>
BatchNormGrads<T> batch_norm_backward(BatchNormTape<T>&& tape,
                                      const BasicTensor<T>& grad_output) {
  require_live(tape.live, "batch_norm_backward");
  tape.live = false;
  require_grad_shape(grad_output, tape.normalized.shape(),
                     "batch_norm_backward");
  const std::size_t c = tape.inv_std.size();
  const std::size_t total = grad_output.size();
  const double m = static_cast<double>(total / c);

  BatchNormGrads<T> g;
  g.gamma = BasicTensor<T>(Shape{c});
  g.beta = BasicTensor<T>(Shape{c});
  g.input = BasicTensor<T>(grad_output.shape());

  const T* dy = grad_output.data().data();
  const T* xhat = tape.normalized.data().data();
  std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
  for (std::size_t i = 0; i < total; i += c)
    for (std::size_t ch = 0; ch < c; ++ch) {
      sum_dy[ch] += dy[i + ch];
      sum_dy_xhat[ch] += static_cast<double>(dy[i + ch]) * xhat[i + ch];
    }
  for (std::size_t ch = 0; ch < c; ++ch) {
    g.beta[ch] = static_cast<T>(sum_dy[ch]);
    g.gamma[ch] = static_cast<T>(sum_dy_xhat[ch]);
  }
  // dx = gamma * inv_std / m * (m*dy - sum(dy) - xhat * sum(dy*xhat))
  std::vector<T> a(c), b(c), s(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    s[ch] = static_cast<T>(tape.gamma[ch] * tape.inv_std[ch]);
    a[ch] = static_cast<T>(sum_dy[ch] / m);
    b[ch] = static_cast<T>(sum_dy_xhat[ch] / m);
  }
  T* dx = g.input.data().data();
  for (std::size_t i = 0; i < total; i += c)
    for (std::size_t ch = 0; ch < c; ++ch)
      dx[i + ch] = s[ch] * (dy[i + ch] - a[ch] - xhat[i + ch] * b[ch]);
  return g;
}

// ---------------------------------------------------------------------------
// dense

namespace {

template <typename T>
void check_dense(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                 const BasicTensor<T>& bias) {
  require_rank(input.shape(), 2, "dense", "input");
  require_rank(weight.shape(), 2, "dense", "weight");
  require_rank(bias.shape(), 1, "dense", "bias");
  if (input.dim(1) != weight.dim(0))
    fail(ErrorCode::shape_mismatch,
         "dense: input width " + std::to_string(input.dim(1)) +
             " does not match weight rows " + std::to_string(weight.dim(0)));
  if (bias.dim(0) != weight.dim(1))
    fail(ErrorCode::shape_mismatch,
         "dense: bias length " + std::to_string(bias.dim(0)) +
             " does not match weight columns " + std::to_string(weight.dim(1)));
}

}  // namespace

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input,
                             const BasicTensor<T>& weight,
                             const BasicTensor<T>& bias) {
  check_dense(input, weight, bias);
  const std::size_t n = input.dim(0), din = weight.dim(0), dout = weight.dim(1);
  BasicTensor<T> out(Shape{n, dout});
  for (std::size_t r = 0; r < n; ++r)
    std::memcpy(out.data().data() + r * dout, bias.data().data(),
                dout * sizeof(T));
  detail::gemm<T>(false, false, n, dout, din, T{1}, input.data().data(), din,
                  weight.data().data(), dout, T{1}, out.data().data(), dout);
  return out;
}

template <typename T>
DenseResult<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                     const BasicTensor<T>& bias) {
  DenseResult<T> r{dense_forward(input, weight, bias), {}};
  r.tape = DenseTape<T>{input, weight, true};
  return r;
}

template <typename T>
DenseGrads<T> dense_backward(DenseTape<T>&& tape,
                             const BasicTensor<T>& grad_output,
                             bool want_input_grad) {
  require_live(tape.live, "dense_backward");
  tape.live = false;
  const std::size_t n = tape.input.dim(0), din = tape.weight.dim(0),
                    dout = tape.weight.dim(1);
  require_grad_shape(grad_output, Shape{n, dout}, "dense_backward");
  DenseGrads<T> g;
  g.weight = BasicTensor<T>(tape.weight.shape());
  g.bias = BasicTensor<T>(Shape{dout});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dout; ++j) g.bias[j] += grad_output[r * dout + j];
  detail::gemm<T>(true, false, din, dout, n, T{1}, tape.input.data().data(),
                  din, grad_output.data().data(), dout, T{0},
                  g.weight.data().data(), dout);
  if (want_input_grad) {
    g.input = BasicTensor<T>(tape.input.shape());
    detail::gemm<T>(false, true, n, din, dout, T{1},
                    grad_output.data().data(), dout, tape.weight.data().data(),
                    dout, T{0}, g.input.data().data(), din);
  }
  return g;
}

// ---------------------------------------------------------------------------
// relu

template <typename T>
BasicTensor<T> relu_forward(BasicTensor<T> input) {
  for (T& v : input.data()) v = v > T{0} ? v : T{0};
  return input;
}

template <typename T>
ReluResult<T> relu(const BasicTensor<T>& input) {
  ReluResult<T> r{BasicTensor<T>(input.shape()), {}};
  r.tape.shape = input.shape();
  r.tape.active.resize(input.size());
  r.tape.live = true;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const bool on = input[i] > T{0};
    r.tape.active[i] = on;
    r.output[i] = on ? input[i] : T{0};
  }
  return r;
}

template <typename T>
BasicTensor<T> relu_backward(ReluTape&& tape, const BasicTensor<T>& grad_output) {
  require_live(tape.live, "relu_backward");
  tape.live = false;
  require_grad_shape(grad_output, tape.shape, "relu_backward");
  BasicTensor<T> g(tape.shape);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = tape.active[i] ? grad_output[i] : T{0};
  return g;
}

// ---------------------------------------------------------------------------
// softmax

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> out(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const T* x = logits.data().data() + r * k;
    T* y = out.data().data() + r * k;
    T hi = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(x[j]))
        fail(ErrorCode::non_finite,
             "softmax: non-finite logit at row " + std::to_string(r) +
                 ", column " + std::to_string(j));
      hi = std::max(hi, x[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      y[j] = std::exp(x[j] - hi);
      total += y[j];
    }
    for (std::size_t j = 0; j < k; ++j)
      y[j] = static_cast<T>(y[j] / total);
  }
  return out;
}

// ---------------------------------------------------------------------------
// weighted cross-entropy

template <typename T>
CrossEntropyResult<T> weighted_cross_entropy(const BasicTensor<T>& probs,
                                             std::span<const int> labels,
                                             std::span<const T> class_weights) {
  require_rank(probs.shape(), 2, "weighted_cross_entropy", "probs");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (labels.size() != n)
    fail(ErrorCode::shape_mismatch,
         "weighted_cross_entropy: " + std::to_string(labels.size()) +
             " labels for " + std::to_string(n) + " rows");
  if (class_weights.size() != k)
    fail(ErrorCode::shape_mismatch,
         "weighted_cross_entropy: " + std::to_string(class_weights.size()) +
             " class weights for " + std::to_string(k) + " classes");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      fail(ErrorCode::invalid_argument,
           "weighted_cross_entropy: label " + std::to_string(labels[i]) +
               " at row " + std::to_string(i) + " is outside [0, " +
               std::to_string(k) + ")");
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) row += probs[i * k + j];
    if (std::abs(row - 1.0) > 1e-4)
      fail(ErrorCode::invalid_argument,
           "weighted_cross_entropy: probability row " + std::to_string(i) +
               " sums to " + std::to_string(row));
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::max<double>(probs[i * k + labels[i]], kProbabilityFloor);
    total += static_cast<double>(class_weights[labels[i]]) * -std::log(p);
  }
  CrossEntropyResult<T> r;
  r.loss = static_cast<T>(total / static_cast<double>(n));
  r.tape.probs = probs;
  r.tape.labels.assign(labels.begin(), labels.end());
  r.tape.class_weights.assign(class_weights.begin(), class_weights.end());
  r.tape.live = true;
  return r;
}

template <typename T>
BasicTensor<T> cross_entropy_backward(CrossEntropyTape<T>&& tape) {
  require_live(tape.live, "cross_entropy_backward");
  tape.live = false;
  const std::size_t n = tape.probs.dim(0), k = tape.probs.dim(1);
  BasicTensor<T> g(tape.probs.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const int y = tape.labels[i];
    const T scale = tape.class_weights[y] / static_cast<T>(n);
    for (std::size_t j = 0; j < k; ++j) {
      const T onehot = static_cast<int>(j) == y ? T{1} : T{0};
      g[i * k + j] = scale * (tape.probs[i * k + j] - onehot);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

#define FER_INSTANTIATE_OPS(T)                                                \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&,               \
                                         const ConvParams<T>&);               \
  template ConvResult<T> conv2d(const BasicTensor<T>&, const ConvParams<T>&); \
  template ConvGrads<T> conv2d_backward(ConvTape<T>&&, const BasicTensor<T>&, \
                                        bool);                                \
  template BasicTensor<T> maxpool2_forward(const BasicTensor<T>&);            \
  template PoolResult<T> maxpool2(const BasicTensor<T>&);                     \
  template BasicTensor<T> maxpool2_backward(PoolTape&&, const BasicTensor<T>&); \
  template struct BatchNormParams<T>;                                         \
  template BatchNormResult<T> batch_norm(const BasicTensor<T>&,               \
                                         BatchNormParams<T>&, Mode);          \
  template BasicTensor<T> batch_norm_infer(const BasicTensor<T>&,             \
                                           const BatchNormParams<T>&);        \
  template BatchNormGrads<T> batch_norm_backward(BatchNormTape<T>&&,          \
                                                 const BasicTensor<T>&);      \
  template BasicTensor<T> dense_forward(                                      \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
  template DenseResult<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, \
                                const BasicTensor<T>&);                       \
  template DenseGrads<T> dense_backward(DenseTape<T>&&, const BasicTensor<T>&, \
                                        bool);                                \
  template BasicTensor<T> relu_forward(BasicTensor<T>);                       \
  template ReluResult<T> relu(const BasicTensor<T>&);                         \
  template BasicTensor<T> relu_backward(ReluTape&&, const BasicTensor<T>&);   \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                     \
  template CrossEntropyResult<T> weighted_cross_entropy(                      \
      const BasicTensor<T>&, std::span<const int>, std::span<const T>);       \
  template BasicTensor<T> cross_entropy_backward(CrossEntropyTape<T>&&);

FER_INSTANTIATE_OPS(float)
FER_INSTANTIATE_OPS(double)

#undef FER_INSTANTIATE_OPS

}  // namespace fer
