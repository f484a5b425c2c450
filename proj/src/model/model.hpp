#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tensor/tensor.hpp"

namespace fer {

enum class LayerKind { conv2d, relu, maxpool2, batch_norm, flatten, dense, softmax };

std::string_view layer_kind_name(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;
  std::size_t kernel = 0;   // conv2d: square kernel extent
  std::size_t filters = 0;  // conv2d: output channels
  std::size_t units = 0;    // dense: output width
  double momentum = 0.9;    // batch_norm
  double epsilon = 1e-5;    // batch_norm

  static LayerSpec conv(std::string name, std::size_t kernel, std::size_t filters);
  static LayerSpec dense_layer(std::string name, std::size_t units);
  static LayerSpec simple(LayerKind kind, std::string name);
};

// Ordered layer manifest plus the per-sample input geometry.
struct ModelSpec {
  std::vector<std::size_t> input{224, 224, 3};
  std::vector<LayerSpec> layers;
};

struct ParamSlot {
  std::string name;  // "<layer>.<tensor>"
  Shape shape;
  bool trainable = true;
  std::size_t layer = 0;
};

// Everything derived from a spec by shape propagation.
struct ModelLayout {
  std::vector<Shape> activations;  // per-sample output shape of each layer
  std::vector<ParamSlot> slots;
  std::vector<std::size_t> first_slot;  // per layer, index into slots
  std::size_t flatten_width = 0;        // 0 when the spec has no flatten
  std::size_t classes = 0;
};

// Validates that adjacent layers compose and the model ends in an 8-way
// softmax. Throws shape_mismatch / format errors naming the offending layer.
ModelLayout analyze(const ModelSpec& spec);

// conv 9x9x16, 7x7x32, 5x5x64, 3x3x128, 3x3x128, each block
// conv -> relu -> maxpool2 -> batch_norm, then flatten -> dense 1024 + relu ->
// dense 1024 + relu -> dense 8 -> softmax.
ModelSpec reference_spec();

class Model {
 public:
  Model() = default;
  // Throws shape_mismatch naming the first tensor whose shape disagrees with
  // the spec.
  Model(ModelSpec spec, std::vector<Tensor> tensors);

  // Fan-in scaled Gaussian weights (variance 2/fan_in), zero biases and
  // betas, unit gammas, running statistics (0, 1).
  static Model initialize(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  const ModelLayout& layout() const noexcept { return layout_; }
  std::span<const ParamSlot> slots() const noexcept { return layout_.slots; }
  std::span<const Tensor> tensors() const noexcept { return tensors_; }
  const Tensor& tensor(std::size_t slot) const { return tensors_.at(slot); }
  const Tensor& tensor(std::string_view name) const;

  // Write access for a training session that owns this copy.
  Tensor& mutable_tensor(std::size_t slot) { return tensors_.at(slot); }

  std::size_t parameter_count() const;  // every stored scalar
  std::size_t trainable_count() const;

  std::string describe() const;

  friend bool operator==(const Model& a, const Model& b) {
    return a.tensors_ == b.tensors_ && a.same_spec(b);
  }

 private:
  bool same_spec(const Model& other) const;

  ModelSpec spec_;
  ModelLayout layout_;
  std::vector<Tensor> tensors_;
};

Model build_reference_model(std::uint64_t seed);

}  // namespace fer
