#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fscil/tensor.hpp"

namespace fscil {

/// Per-sample layout. Flat feature vectors use height 1, channels 1.
struct SampleShape {
  std::size_t height = 1;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t size() const { return height * width * channels; }
  bool is_image() const { return height > 1; }
  friend bool operator==(const SampleShape&, const SampleShape&) = default;
};

/// Samples stored as an n x D matrix with one global class id per row.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(SampleShape shape, Tensor samples, std::vector<int> labels);

  const SampleShape& shape() const { return shape_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t feature_dim() const { return shape_.size(); }

  const Tensor& samples() const { return samples_; }
  std::span<const int> labels() const { return labels_; }
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const double> row(std::size_t i) const { return samples_.row(i); }

  /// Sample i as an H x W x C tensor (or a flat vector when not an image).
  Tensor image(std::size_t i) const;

  /// Sorted distinct labels.
  std::vector<int> classes() const;
  std::vector<std::size_t> indices_of(int class_id) const;

  LabeledDataset select(std::span<const std::size_t> indices) const;
  LabeledDataset with_classes(std::span<const int> class_ids) const;

  /// Appends rows of `other`; shapes must agree.
  void append(const LabeledDataset& other);

  /// Throws FormatError unless labels are dense in [0, max_label].
  void require_dense_labels() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  SampleShape shape_;
  Tensor samples_;
  std::vector<int> labels_;
};

// FDS dataset file:
//   magic "FDS1", u8 rank (2 or 4), rank x u32 dims (dim0 = sample count;
//   rank 4 is N x H x W x C), f32 values in [0,1] row-major, dim0 x u32 labels.
// Everything little-endian.
std::vector<std::uint8_t> encode_fds(const LabeledDataset& data);
LabeledDataset decode_fds(std::span<const std::uint8_t> bytes);
void save_fds(const std::string& path, const LabeledDataset& data);
LabeledDataset load_fds(const std::string& path);

/// Gaussian-cluster benchmark. Class means are uniform in [0.2, 0.8]^D,
/// samples add isotropic noise of std `spread`, clamp to [0,1] and round to
/// float precision.
struct SynthSpec {
  int classes = 40;
  std::size_t dim = 16;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;
  double spread = 0.1;
  std::uint64_t seed = 1;
  // When image_height > 1 the samples are images image_height x (dim / image_height) x 1.
  std::size_t image_height = 1;
};

struct SynthBenchmark {
  LabeledDataset train;
  LabeledDataset test;
};

SynthBenchmark generate_gaussian_clusters(const SynthSpec& spec);

}  // namespace fscil
