#include "fscil/layer_stack.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fscil/error.hpp"

namespace fscil {

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Linear:
      return z;
    case Activation::Tanh:
      return std::tanh(z);
  }
  return z;
}

// Derivative expressed through the activation output.
double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::Linear:
      return 1.0;
    case Activation::Tanh:
      return 1.0 - y * y;
  }
  return 1.0;
}

Tensor as_batch(const Tensor& x) {
  if (x.rank() == 1) return Tensor({1, x.size()}, x.data());
  if (x.rank() == 2) return x;
  throw ShapeError("layer stack input must be rank 1 or 2");
}

Tensor apply_layer(const Layer& layer, const Tensor& in) {
  const std::size_t n = in.rows();
  const std::size_t out_dim = layer.out_dim();
  const std::size_t in_dim = layer.in_dim();
  Tensor out({n, out_dim});
  for (std::size_t r = 0; r < n; ++r) {
    auto x = in.row(r);
    for (std::size_t o = 0; o < out_dim; ++o) {
      auto w = layer.weights.row(o);
      double z = layer.bias[o];
      for (std::size_t k = 0; k < in_dim; ++k) z += w[k] * x[k];
      out.at(r, o) = activate(layer.activation, z);
    }
  }
  return out;
}

}  // namespace

void SgdConfig::validate(std::size_t dataset_size) const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("learning_rate must be positive");
  }
  if (epochs < 0) throw ArgumentError("epochs must be non-negative");
  if (batch_size == 0) throw ArgumentError("batch_size must be positive");
  if (dataset_size != 0 && batch_size > dataset_size) {
    throw ArgumentError("batch_size " + std::to_string(batch_size) +
                        " exceeds dataset size " + std::to_string(dataset_size));
  }
}

LayerStack::LayerStack(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.weights.rank() != 2) throw ShapeError("layer weights must be rank 2");
    if (l.bias.size() != l.out_dim()) {
      throw ShapeError("layer " + std::to_string(i) + " bias length mismatch");
    }
    if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
      throw ShapeError("layer " + std::to_string(i) + " input width " +
                       std::to_string(l.in_dim()) + " does not match previous output " +
                       std::to_string(layers_[i - 1].out_dim()));
    }
  }
}

LayerStack LayerStack::glorot(std::span<const std::size_t> widths, Activation hidden,
                              Activation output, std::uint64_t seed) {
  if (widths.size() < 2) throw ArgumentError("need at least input and output widths");
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t fan_in = widths[i];
    const std::size_t fan_out = widths[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer;
    layer.weights = Tensor({fan_out, fan_in});
    for (auto& w : layer.weights.values()) w = dist(rng);
    layer.bias = Tensor({fan_out}, 0.0);
    layer.activation = (i + 2 == widths.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return LayerStack(std::move(layers));
}

std::size_t LayerStack::input_dim() const {
  if (layers_.empty()) throw StateError("empty layer stack");
  return layers_.front().in_dim();
}

std::size_t LayerStack::output_dim() const {
  if (layers_.empty()) throw StateError("empty layer stack");
  return layers_.back().out_dim();
}

void LayerStack::set_all_frozen(bool frozen) {
  for (auto& l : layers_) l.frozen = frozen;
}

std::size_t LayerStack::trainable_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.frozen ? 0 : 1;
  return n;
}

ForwardTrace LayerStack::forward_trace(const Tensor& x) const {
  if (layers_.empty()) throw StateError("forward on empty layer stack");
  Tensor batch = as_batch(x);
  if (batch.cols() != input_dim()) {
    throw ShapeError("input width " + std::to_string(batch.cols()) +
                     " does not match stack input " + std::to_string(input_dim()));
  }
  ForwardTrace trace;
  trace.single_row = x.rank() == 1;
  trace.activations.reserve(layers_.size() + 1);
  trace.activations.push_back(std::move(batch));
  for (const auto& layer : layers_) {
    trace.activations.push_back(apply_layer(layer, trace.activations.back()));
  }
  return trace;
}

Tensor LayerStack::forward(const Tensor& x) const {
  ForwardTrace trace = forward_trace(x);
  Tensor out = std::move(trace.activations.back());
  if (trace.single_row) return Tensor({out.size()}, out.data());
  return out;
}

Gradients LayerStack::backward(const ForwardTrace& trace, const Tensor& output_grad) const {
  if (trace.empty()) throw StateError("backward called before forward");
  if (trace.activations.size() != layers_.size() + 1) {
    throw StateError("forward trace does not belong to this stack");
  }
  Tensor delta = as_batch(output_grad);
  const Tensor& out = trace.output();
  if (delta.rows() != out.rows() || delta.cols() != out.cols()) {
    throw ShapeError("output gradient shape does not match forward output");
  }

  Gradients grads;
  grads.layers.resize(layers_.size());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const Tensor& y = trace.activations[li + 1];
    const Tensor& x = trace.activations[li];
    const std::size_t n = x.rows();
    const std::size_t in_dim = layer.in_dim();
    const std::size_t out_dim = layer.out_dim();

    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta[i] *= activation_slope(layer.activation, y[i]);
    }

    if (!layer.frozen) {
      LayerGradient g{Tensor({out_dim, in_dim}), Tensor({out_dim})};
      for (std::size_t r = 0; r < n; ++r) {
        auto xr = x.row(r);
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double d = delta.at(r, o);
          g.bias[o] += d;
          auto gw = g.weights.row(o);
          for (std::size_t k = 0; k < in_dim; ++k) gw[k] += d * xr[k];
        }
      }
      grads.layers[li] = std::move(g);
    }

    Tensor prev({n, in_dim});
    for (std::size_t r = 0; r < n; ++r) {
      auto pr = prev.row(r);
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double d = delta.at(r, o);
        auto w = layer.weights.row(o);
        for (std::size_t k = 0; k < in_dim; ++k) pr[k] += d * w[k];
      }
    }
    delta = std::move(prev);
  }
  grads.input = trace.single_row ? Tensor({delta.size()}, delta.data()) : std::move(delta);
  return grads;
}

void sgd_step(LayerStack& stack, const Gradients& grads, const SgdConfig& cfg) {
  if (grads.layers.size() != stack.layers_.size()) {
    throw ShapeError("gradient set does not match stack depth");
  }
  const double lr = cfg.learning_rate;
  for (std::size_t i = 0; i < stack.layers_.size(); ++i) {
    Layer& layer = stack.layers_[i];
    if (layer.frozen || !grads.layers[i]) continue;
    const LayerGradient& g = *grads.layers[i];
    if (g.weights.size() != layer.weights.size() || g.bias.size() != layer.bias.size()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(i));
    }
    for (std::size_t k = 0; k < g.weights.size(); ++k) layer.weights[k] -= lr * g.weights[k];
    for (std::size_t k = 0; k < g.bias.size(); ++k) layer.bias[k] -= lr * g.bias[k];
  }
}

SplitStack split_freeze(const LayerStack& stack, std::size_t body_depth) {
  if (body_depth == 0 || body_depth >= stack.depth()) {
    throw ArgumentError("body_depth " + std::to_string(body_depth) +
                        " must lie in (0, " + std::to_string(stack.depth()) + ")");
  }
  auto all = stack.layers();
  std::vector<Layer> body(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(body_depth));
  std::vector<Layer> tail(all.begin() + static_cast<std::ptrdiff_t>(body_depth), all.end());
  for (auto& l : body) l.frozen = true;
  for (auto& l : tail) l.frozen = false;
  return {LayerStack(std::move(body)), LayerStack(std::move(tail))};
}

LayerStack compose(const LayerStack& first, const LayerStack& second) {
  std::vector<Layer> layers(first.layers().begin(), first.layers().end());
  layers.insert(layers.end(), second.layers().begin(), second.layers().end());
  return LayerStack(std::move(layers));
}

}  // namespace fscil
