#include "model/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "model/labels.hpp"

namespace fer {

namespace {

// Flatten width of the reference chain, evaluated at compile time:
// 224 -9+1 -> 216 /2 -> 108 -7+1 -> 102 /2 -> 51 -5+1 -> 47 /2 -> 23
//     -3+1 -> 21 /2 -> 10 -3+1 -> 8 /2 -> 4; 4*4*128.
constexpr std::size_t reference_flatten_width() {
  constexpr std::array<std::size_t, 5> kernels{9, 7, 5, 3, 3};
  std::size_t extent = 224;
  for (std::size_t k : kernels) extent = (extent - k + 1) / 2;
  return extent * extent * 128;
}
static_assert(reference_flatten_width() == 2048);

[[noreturn]] void layer_error(ErrorCode code, const LayerSpec& layer,
                              const std::string& what) {
  fail(code, "layer '" + layer.name + "' (" +
                 std::string(layer_kind_name(layer.kind)) + "): " + what);
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (LayerKind k : {LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2,
                      LayerKind::batch_norm, LayerKind::flatten,
                      LayerKind::dense, LayerKind::softmax})
    if (layer_kind_name(k) == name) return k;
  fail(ErrorCode::format, "unsupported layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv(std::string name, std::size_t kernel,
                          std::size_t filters) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.name = std::move(name);
  l.kernel = kernel;
  l.filters = filters;
  return l;
}

LayerSpec LayerSpec::dense_layer(std::string name, std::size_t units) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.name = std::move(name);
  l.units = units;
  return l;
}

LayerSpec LayerSpec::simple(LayerKind kind, std::string name) {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  return l;
}

ModelLayout analyze(const ModelSpec& spec) {
  if (spec.input.empty() || spec.input.size() > 3)
    fail(ErrorCode::format, "model input must have rank 1..3");
  if (spec.layers.empty()) fail(ErrorCode::format, "model has no layers");

  ModelLayout layout;
  Shape act(spec.input);
  std::set<std::string> names;

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.name.empty() || l.name.find('.') != std::string::npos)
      fail(ErrorCode::format,
           "layer " + std::to_string(i) + " needs a non-empty name without '.'");
    if (!names.insert(l.name).second)
      fail(ErrorCode::format, "duplicate layer name '" + l.name + "'");
    layout.first_slot.push_back(layout.slots.size());
    auto add = [&](const std::string& t, Shape s, bool trainable = true) {
      layout.slots.push_back({l.name + "." + t, std::move(s), trainable, i});
    };

    switch (l.kind) {
      case LayerKind::conv2d: {
        if (act.rank() != 3)
          layer_error(ErrorCode::shape_mismatch, l,
                      "expects an HxWxC activation, got " + act.str());
        if (l.kernel != 3 && l.kernel != 5 && l.kernel != 7 && l.kernel != 9)
          layer_error(ErrorCode::format, l,
                      "kernel size must be 3, 5, 7 or 9, got " +
                          std::to_string(l.kernel));
        if (l.filters == 0)
          layer_error(ErrorCode::format, l, "filters must be >= 1");
        if (act[0] < l.kernel || act[1] < l.kernel)
          layer_error(ErrorCode::shape_mismatch, l,
                      "activation " + act.str() + " is smaller than the " +
                          std::to_string(l.kernel) + "x" +
                          std::to_string(l.kernel) + " kernel");
        add("kernel", Shape{l.kernel, l.kernel, act[2], l.filters});
        add("bias", Shape{l.filters});
        act = Shape{act[0] - l.kernel + 1, act[1] - l.kernel + 1, l.filters};
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2:
        if (act.rank() != 3 || act[0] < 2 || act[1] < 2)
          layer_error(ErrorCode::shape_mismatch, l,
                      "expects an HxWxC activation with H,W >= 2, got " +
                          act.str());
        act = Shape{act[0] / 2, act[1] / 2, act[2]};
        break;
      case LayerKind::batch_norm: {
        if (!(l.momentum > 0.0 && l.momentum < 1.0) || !(l.epsilon > 0.0))
          layer_error(ErrorCode::format, l,
                      "momentum must be in (0,1) and epsilon positive");
        const std::size_t c = act[act.rank() - 1];
        add("gamma", Shape{c});
        add("beta", Shape{c});
        add("running_mean", Shape{c}, false);
        add("running_var", Shape{c}, false);
        break;
      }
      case LayerKind::flatten:
        act = Shape{act.size()};
        layout.flatten_width = act[0];
        break;
      case LayerKind::dense:
        if (act.rank() != 1)
          layer_error(ErrorCode::shape_mismatch, l,
                      "expects a flat activation, got " + act.str() +
                          " (add a flatten layer)");
        if (l.units == 0) layer_error(ErrorCode::format, l, "units must be >= 1");
        add("weight", Shape{act[0], l.units});
        add("bias", Shape{l.units});
        act = Shape{l.units};
        break;
      case LayerKind::softmax:
        if (i + 1 != spec.layers.size())
          layer_error(ErrorCode::format, l, "softmax must be the last layer");
        if (act.rank() != 1)
          layer_error(ErrorCode::shape_mismatch, l,
                      "expects a flat activation, got " + act.str());
        break;
    }
    layout.activations.push_back(act);
  }

  if (spec.layers.back().kind != LayerKind::softmax)
    fail(ErrorCode::format, "model must end with a softmax layer");
  layout.classes = act[0];
  if (layout.classes != kNumEmotions)
    fail(ErrorCode::shape_mismatch,
         "model must output " + std::to_string(kNumEmotions) +
             " classes, got " + std::to_string(layout.classes));
  return layout;
}

ModelSpec reference_spec() {
  ModelSpec spec;
  spec.input = {224, 224, 3};
  const std::array<std::pair<std::size_t, std::size_t>, 5> blocks{
      {{9, 16}, {7, 32}, {5, 64}, {3, 128}, {3, 128}}};
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string n = std::to_string(b + 1);
    spec.layers.push_back(LayerSpec::conv("conv" + n, blocks[b].first, blocks[b].second));
    spec.layers.push_back(LayerSpec::simple(LayerKind::relu, "relu" + n));
    spec.layers.push_back(LayerSpec::simple(LayerKind::maxpool2, "pool" + n));
    spec.layers.push_back(LayerSpec::simple(LayerKind::batch_norm, "bn" + n));
  }
  spec.layers.push_back(LayerSpec::simple(LayerKind::flatten, "flatten"));
  spec.layers.push_back(LayerSpec::dense_layer("dense1", 1024));
  spec.layers.push_back(LayerSpec::simple(LayerKind::relu, "relu6"));
  spec.layers.push_back(LayerSpec::dense_layer("dense2", 1024));
  spec.layers.push_back(LayerSpec::simple(LayerKind::relu, "relu7"));
  spec.layers.push_back(LayerSpec::dense_layer("dense3", kNumEmotions));
  spec.layers.push_back(LayerSpec::simple(LayerKind::softmax, "softmax"));
  return spec;
}

Model::Model(ModelSpec spec, std::vector<Tensor> tensors)
    : spec_(std::move(spec)), layout_(analyze(spec_)), tensors_(std::move(tensors)) {
  if (tensors_.size() != layout_.slots.size())
    fail(ErrorCode::shape_mismatch,
         "model expects " + std::to_string(layout_.slots.size()) +
             " tensors, got " + std::to_string(tensors_.size()));
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].shape() != layout_.slots[i].shape)
      fail(ErrorCode::shape_mismatch,
           "tensor '" + layout_.slots[i].name + "' has shape " +
               tensors_[i].shape().str() + ", expected " +
               layout_.slots[i].shape.str());
}

Model Model::initialize(ModelSpec spec, std::uint64_t seed) {
  const ModelLayout layout = analyze(spec);
  std::mt19937_64 rng(seed);
  std::vector<Tensor> tensors;
  tensors.reserve(layout.slots.size());
  for (const ParamSlot& slot : layout.slots) {
    const std::string_view t =
        std::string_view(slot.name).substr(slot.name.find('.') + 1);
    Tensor value(slot.shape);
    if (t == "kernel" || t == "weight") {
      // Fan-in: everything but the output axis.
      const std::size_t fan_in = slot.shape.size() / slot.shape[slot.shape.rank() - 1];
      std::normal_distribution<float> dist(
          0.f, static_cast<float>(std::sqrt(2.0 / static_cast<double>(fan_in))));
      for (float& v : value.data()) v = dist(rng);
    } else if (t == "gamma" || t == "running_var") {
      value = Tensor(slot.shape, 1.f);
    }
    tensors.push_back(std::move(value));
  }
  return Model(std::move(spec), std::move(tensors));
}

const Tensor& Model::tensor(std::string_view name) const {
  for (std::size_t i = 0; i < layout_.slots.size(); ++i)
    if (layout_.slots[i].name == name) return tensors_[i];
  fail(ErrorCode::not_found, "model has no tensor '" + std::string(name) + "'");
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::size_t Model::trainable_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (layout_.slots[i].trainable) n += tensors_[i].size();
  return n;
}

bool Model::same_spec(const Model& other) const {
  if (spec_.input != other.spec_.input ||
      spec_.layers.size() != other.spec_.layers.size())
    return false;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& a = spec_.layers[i];
    const auto& b = other.spec_.layers[i];
    if (a.kind != b.kind || a.name != b.name || a.kernel != b.kernel ||
        a.filters != b.filters || a.units != b.units ||
        a.momentum != b.momentum || a.epsilon != b.epsilon)
      return false;
  }
  return true;
}

std::string Model::describe() const {
  std::ostringstream out;
  out << "input " << Shape(spec_.input).str() << "\n";
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    out << l.name << " " << layer_kind_name(l.kind);
    if (l.kind == LayerKind::conv2d)
      out << " " << l.kernel << "x" << l.kernel << "x" << l.filters;
    if (l.kind == LayerKind::dense) out << " " << l.units;
    out << " -> " << layout_.activations[i].str();
    std::size_t params = 0;
    const std::size_t end =
        i + 1 < spec_.layers.size() ? layout_.first_slot[i + 1] : layout_.slots.size();
    for (std::size_t s = layout_.first_slot[i]; s < end; ++s)
      params += tensors_[s].size();
    if (params) out << " params " << params;
    out << "\n";
  }
  out << "total parameters " << parameter_count() << " (trainable "
      << trainable_count() << ")\n";
  return out.str();
}

Model build_reference_model(std::uint64_t seed) {
  return Model::initialize(reference_spec(), seed);
}

}  // namespace fer
