#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fscil/tensor.hpp"

namespace fscil {

enum class Activation : std::uint8_t { Linear = 0, Tanh = 1 };

/// Affine layer y = act(W x + b). Weights are stored out x in.
struct Layer {
  Tensor weights;
  Tensor bias;
  Activation activation = Activation::Tanh;
  bool frozen = false;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct SgdConfig {
  double learning_rate = 0.05;
  int epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  // Throws ArgumentError; dataset_size of 0 skips the batch bound.
  void validate(std::size_t dataset_size = 0) const;
};

/// Activations cached by a training forward pass. A default-constructed
/// trace means "no forward pass happened" and backward rejects it.
struct ForwardTrace {
  std::vector<Tensor> activations;  // [0] = input, [i+1] = output of layer i
  bool single_row = false;

  bool empty() const { return activations.empty(); }
  const Tensor& output() const { return activations.back(); }
};

struct LayerGradient {
  Tensor weights;
  Tensor bias;
};

/// Gradients of a scalar loss. Frozen layers have no entry (nullopt).
struct Gradients {
  std::vector<std::optional<LayerGradient>> layers;
  Tensor input;
};

class LayerStack {
 public:
  LayerStack() = default;
  explicit LayerStack(std::vector<Layer> layers);

  /// Seeded Glorot-uniform init over widths {in, h1, ..., out}; biases zero.
  static LayerStack glorot(std::span<const std::size_t> widths, Activation hidden,
                           Activation output, std::uint64_t seed);

  std::size_t depth() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::span<const Layer> layers() const { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }

  void set_frozen(std::size_t i, bool frozen) { layers_.at(i).frozen = frozen; }
  void set_all_frozen(bool frozen);
  std::size_t trainable_count() const;

  /// x is rank 1 (one sample) or rank 2 (batch x in). Output has the same rank.
  Tensor forward(const Tensor& x) const;
  ForwardTrace forward_trace(const Tensor& x) const;

  /// Backpropagates dLoss/dOutput through the cached trace.
  Gradients backward(const ForwardTrace& trace, const Tensor& output_grad) const;

  friend void sgd_step(LayerStack& stack, const Gradients& grads, const SgdConfig& cfg);
  friend bool operator==(const LayerStack&, const LayerStack&) = default;

 private:
  std::vector<Layer> layers_;
};

void sgd_step(LayerStack& stack, const Gradients& grads, const SgdConfig& cfg);

struct SplitStack {
  LayerStack body;
  LayerStack tail;
};

/// Splits at body_depth: body layers are frozen, tail layers trainable.
SplitStack split_freeze(const LayerStack& stack, std::size_t body_depth);

/// Concatenates two stacks, keeping each layer's frozen flag.
LayerStack compose(const LayerStack& first, const LayerStack& second);

}  // namespace fscil
