#include "fscil/checkpoint.hpp"

#include <string>

#include "fscil/error.hpp"

namespace fscil {

void write_checkpoint(ByteWriter& out, const LayerStack& stack) {
  out.magic("FSC1");
  out.u32(static_cast<std::uint32_t>(stack.depth()));
  for (const Layer& layer : stack.layers()) {
    out.u32(static_cast<std::uint32_t>(layer.out_dim()));
    out.u32(static_cast<std::uint32_t>(layer.in_dim()));
    for (double w : layer.weights.values()) out.f64(w);
    for (double b : layer.bias.values()) out.f64(b);
    out.u8(layer.frozen ? 1 : 0);
    out.u8(static_cast<std::uint8_t>(layer.activation));
  }
}

LayerStack read_checkpoint(ByteReader& in) {
  in.expect_magic("FSC1");
  const std::uint32_t count = in.u32();
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = in.offset();
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    if (rows == 0 || cols == 0) {
      throw FormatError("zero layer dimension at byte offset " + std::to_string(at));
    }
    const std::size_t need = (static_cast<std::size_t>(rows) * cols + rows) * 8 + 2;
    if (in.remaining() < need) {
      throw FormatError("truncated layer at byte offset " + std::to_string(at));
    }
    Layer layer;
    std::vector<double> w(static_cast<std::size_t>(rows) * cols);
    for (auto& v : w) v = in.f64();
    std::vector<double> b(rows);
    for (auto& v : b) v = in.f64();
    layer.weights = Tensor({rows, cols}, std::move(w));
    layer.bias = Tensor({rows}, std::move(b));
    const std::uint8_t frozen = in.u8();
    const std::uint8_t act = in.u8();
    if (frozen > 1 || act > static_cast<std::uint8_t>(Activation::Tanh)) {
      throw FormatError("bad layer flags at byte offset " + std::to_string(in.offset() - 2));
    }
    layer.frozen = frozen == 1;
    layer.activation = static_cast<Activation>(act);
    layers.push_back(std::move(layer));
  }
  try {
    return LayerStack(std::move(layers));
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_checkpoint(const LayerStack& stack) {
  ByteWriter w;
  write_checkpoint(w, stack);
  return w.take();
}

LayerStack decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  LayerStack stack = read_checkpoint(r);
  r.expect_end();
  return stack;
}

void save_checkpoint(const std::string& path, const LayerStack& stack) {
  write_file_bytes(path, encode_checkpoint(stack));
}

LayerStack load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace fscil
