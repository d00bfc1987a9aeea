#include "fscil/augment.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "fscil/error.hpp"

namespace fscil {

namespace {

struct ImageShape {
  std::size_t height;
  std::size_t width;
  std::size_t channels;
};

ImageShape image_shape(const Tensor& t) {
  switch (t.rank()) {
    case 1:
      return {1, t.dim(0), 1};
    case 2:
      return {t.dim(0), t.dim(1), 1};
    case 3:
      return {t.dim(0), t.dim(1), t.dim(2)};
    default:
      throw ShapeError("cutmix expects a rank 1-3 image");
  }
}

}  // namespace

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (bits_.size() != height_ * width_) throw ShapeError("mask bit count mismatch");
  for (auto& b : bits_) {
    if (b > 1) throw ArgumentError("mask entries must be 0 or 1");
  }
}

std::size_t BinaryMask::zero_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 0));
}

BinaryMask MaskSpec::to_binary() const {
  std::vector<std::uint8_t> bits(height * width, 1);
  for (std::size_t r = 0; r < zero_region.height; ++r) {
    for (std::size_t c = 0; c < zero_region.width; ++c) {
      bits[(zero_region.top + r) * width + zero_region.left + c] = 0;
    }
  }
  return BinaryMask(height, width, std::move(bits));
}

MaskSpec make_mask(std::size_t height, std::size_t width, std::uint64_t seed) {
  if (height * width < 2) {
    throw ArgumentError("mask needs at least 2 pixels, got " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
  const std::size_t area = height * width / 2;
  std::mt19937_64 rng(seed);
  const bool tall = (rng() & 1U) == 0;

  std::size_t rh = 0;
  std::size_t rw = 0;
  const bool can_tall = width % 2 == 0;
  const bool can_wide = height % 2 == 0;
  if (can_tall && (tall || !can_wide)) {
    rh = height;
    rw = width / 2;
  } else if (can_wide) {
    rh = height / 2;
    rw = width;
  } else {
    // Both sides odd: fall back to any factorisation that fits.
    std::vector<std::pair<std::size_t, std::size_t>> fits;
    for (std::size_t h = std::min(height, area); h >= 1; --h) {
      if (area % h == 0 && area / h <= width) fits.emplace_back(h, area / h);
    }
    if (fits.empty()) {
      throw ArgumentError("no rectangle of area " + std::to_string(area) + " fits in " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
    std::tie(rh, rw) = tall ? fits.front() : fits.back();
  }

  std::uniform_int_distribution<std::size_t> top_dist(0, height - rh);
  std::uniform_int_distribution<std::size_t> left_dist(0, width - rw);
  MaskSpec spec;
  spec.height = height;
  spec.width = width;
  spec.zero_region.top = top_dist(rng);
  spec.zero_region.left = left_dist(rng);
  spec.zero_region.height = rh;
  spec.zero_region.width = rw;
  return spec;
}

Tensor cutmix(const Tensor& a, const Tensor& b, const BinaryMask& mask) {
  if (a.dims() != b.dims()) throw ShapeError("cutmix: source images differ in shape");
  const ImageShape s = image_shape(a);
  if (s.height != mask.height() || s.width != mask.width()) {
    throw ShapeError("cutmix: mask is " + std::to_string(mask.height()) + "x" +
                     std::to_string(mask.width()) + " but image is " +
                     std::to_string(s.height) + "x" + std::to_string(s.width));
  }
  Tensor out = a;
  for (std::size_t r = 0; r < s.height; ++r) {
    for (std::size_t c = 0; c < s.width; ++c) {
      if (mask.at(r, c)) continue;
      const std::size_t base = (r * s.width + c) * s.channels;
      for (std::size_t ch = 0; ch < s.channels; ++ch) out[base + ch] = b[base + ch];
    }
  }
  return out;
}

Tensor cutmix(const Tensor& a, const Tensor& b, const MaskSpec& mask) {
  return cutmix(a, b, mask.to_binary());
}

ClassPair normalized_pair(int a, int b) { return a < b ? ClassPair{a, b} : ClassPair{b, a}; }

int VirtualLabelTable::label_of(int class_a, int class_b) const {
  auto it = labels_.find(normalized_pair(class_a, class_b));
  if (it == labels_.end()) {
    throw ArgumentError("no virtual label for pair (" + std::to_string(class_a) + "," +
                        std::to_string(class_b) + ")");
  }
  return it->second;
}

VirtualLabelTable assign_virtual_labels(int base_class_count, std::span<const ClassPair> pairs) {
  if (base_class_count < 2) throw ArgumentError("virtual labels need at least 2 real classes");
  std::set<ClassPair> sorted;
  for (const auto& [a, b] : pairs) {
    if (a == b) throw ArgumentError("virtual pair mixes class " + std::to_string(a) + " with itself");
    if (a < 0 || b < 0 || a >= base_class_count || b >= base_class_count) {
      throw ArgumentError("virtual pair references a non-base class");
    }
    if (!sorted.insert(normalized_pair(a, b)).second) {
      throw ArgumentError("duplicate virtual pair (" + std::to_string(a) + "," +
                          std::to_string(b) + ")");
    }
  }
  std::map<ClassPair, int> labels;
  int next = base_class_count;
  for (const auto& p : sorted) labels.emplace(p, next++);
  return VirtualLabelTable(base_class_count, std::move(labels));
}

std::vector<ClassPair> sample_class_pairs(std::span<const int> classes, std::size_t count,
                                          std::mt19937_64& rng) {
  const std::size_t n = classes.size();
  if (n < 2) throw ArgumentError("need at least two classes to form pairs");
  const std::size_t available = n * (n - 1) / 2;
  count = std::min(count, available);

  std::vector<ClassPair> all;
  all.reserve(available);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) all.push_back(normalized_pair(classes[i], classes[j]));
  }
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(count);
  return all;
}

}  // namespace fscil
