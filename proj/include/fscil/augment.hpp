#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "fscil/tensor.hpp"

namespace fscil {

struct Rect {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Per-pixel keep mask. 1 keeps the pixel of the first image, 0 takes the
/// second image's pixel.
class BinaryMask {
 public:
  BinaryMask(std::size_t height, std::size_t width, std::uint8_t fill = 1);
  BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return bits_[r * width_ + c]; }
  std::size_t zero_count() const;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> bits_;
};

/// Half-area rectangular drop mask: the zero region holds exactly
/// floor(H*W/2) pixels.
struct MaskSpec {
  std::size_t height = 0;
  std::size_t width = 0;
  Rect zero_region;

  std::size_t zero_area() const { return zero_region.height * zero_region.width; }
  BinaryMask to_binary() const;
};

/// Draws a half-area rectangle with a random orientation bit and a uniformly
/// random offset. Throws ArgumentError if H*W < 2 or if no rectangle of area
/// floor(H*W/2) fits (only possible when both sides are odd).
MaskSpec make_mask(std::size_t height, std::size_t width, std::uint64_t seed);

/// Mixes two images of shape H x W x C (rank 3), H x W (rank 2) or a flat
/// vector viewed as 1 x W (rank 1): out = M*a + (1-M)*b per channel.
Tensor cutmix(const Tensor& a, const Tensor& b, const BinaryMask& mask);
Tensor cutmix(const Tensor& a, const Tensor& b, const MaskSpec& mask);

/// Unordered pair of real class ids, stored as (min, max).
using ClassPair = std::pair<int, int>;

ClassPair normalized_pair(int a, int b);

/// Bijection from unordered class pairs to consecutive labels starting at the
/// real base class count, assigned in sorted pair order.
class VirtualLabelTable {
 public:
  VirtualLabelTable() = default;
  VirtualLabelTable(int base_class_count, std::map<ClassPair, int> labels)
      : base_class_count_(base_class_count), labels_(std::move(labels)) {}

  int base_class_count() const { return base_class_count_; }
  std::size_t size() const { return labels_.size(); }
  int label_of(int class_a, int class_b) const;
  const std::map<ClassPair, int>& entries() const { return labels_; }

  friend bool operator==(const VirtualLabelTable&, const VirtualLabelTable&) = default;

 private:
  int base_class_count_ = 0;
  std::map<ClassPair, int> labels_;
};

VirtualLabelTable assign_virtual_labels(int base_class_count, std::span<const ClassPair> pairs);

/// Samples `count` distinct unordered pairs of distinct classes.
std::vector<ClassPair> sample_class_pairs(std::span<const int> classes, std::size_t count,
                                          std::mt19937_64& rng);

struct VirtualSample {
  Tensor image;
  int virtual_label = 0;
  ClassPair source_pair;
};

}  // namespace fscil
