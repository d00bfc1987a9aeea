#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fscil/binary_io.hpp"
#include "fscil/layer_stack.hpp"

namespace fscil {

// "FSC1" parameter checkpoint:
//   magic "FSC1", u32 layer count, then per layer
//   u32 rows, u32 cols, rows*cols f64 weights (row-major), rows f64 biases,
//   u8 frozen flag, u8 activation id.
// All integers and floats little-endian.
void write_checkpoint(ByteWriter& out, const LayerStack& stack);
LayerStack read_checkpoint(ByteReader& in);

std::vector<std::uint8_t> encode_checkpoint(const LayerStack& stack);
LayerStack decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const LayerStack& stack);
LayerStack load_checkpoint(const std::string& path);

}  // namespace fscil
