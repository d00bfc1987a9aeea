#include "fscil/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "fscil/binary_io.hpp"
#include "fscil/error.hpp"

namespace fscil {

LabeledDataset::LabeledDataset(SampleShape shape, Tensor samples, std::vector<int> labels)
    : shape_(shape), samples_(std::move(samples)), labels_(std::move(labels)) {
  if (shape_.size() == 0) throw ShapeError("sample shape must be non-empty");
  if (labels_.empty()) {
    if (!samples_.empty()) throw ShapeError("samples without labels");
    return;
  }
  if (samples_.rank() != 2 || samples_.rows() != labels_.size() ||
      samples_.cols() != shape_.size()) {
    throw ShapeError("sample matrix must be " + std::to_string(labels_.size()) + " x " +
                     std::to_string(shape_.size()));
  }
  for (int l : labels_) {
    if (l < 0) throw ArgumentError("negative class label");
  }
}

Tensor LabeledDataset::image(std::size_t i) const {
  auto r = row(i);
  std::vector<double> data(r.begin(), r.end());
  if (shape_.is_image()) {
    return Tensor({shape_.height, shape_.width, shape_.channels}, std::move(data));
  }
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

std::vector<int> LabeledDataset::classes() const {
  std::set<int> s(labels_.begin(), labels_.end());
  return {s.begin(), s.end()};
}

std::vector<std::size_t> LabeledDataset::indices_of(int class_id) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == class_id) idx.push_back(i);
  }
  return idx;
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> indices) const {
  if (indices.empty()) return LabeledDataset(shape_, Tensor(), {});
  const std::size_t d = feature_dim();
  std::vector<double> data;
  data.reserve(indices.size() * d);
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw ArgumentError("sample index out of range");
    auto r = row(i);
    data.insert(data.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
  }
  return LabeledDataset(shape_, Tensor({indices.size(), d}, std::move(data)), std::move(labels));
}

LabeledDataset LabeledDataset::with_classes(std::span<const int> class_ids) const {
  std::set<int> keep(class_ids.begin(), class_ids.end());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (keep.count(labels_[i])) idx.push_back(i);
  }
  return select(idx);
}

void LabeledDataset::append(const LabeledDataset& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (!(other.shape_ == shape_)) throw ShapeError("cannot append datasets of different shape");
  std::vector<double> data = samples_.data();
  data.insert(data.end(), other.samples_.data().begin(), other.samples_.data().end());
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
  samples_ = Tensor({labels_.size(), feature_dim()}, std::move(data));
}

void LabeledDataset::require_dense_labels() const {
  const auto cls = classes();
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] != static_cast<int>(i)) {
      throw FormatError("labels are not dense: class " + std::to_string(i) + " missing");
    }
  }
}

std::vector<std::uint8_t> encode_fds(const LabeledDataset& data) {
  ByteWriter w;
  w.magic("FDS1");
  const SampleShape& s = data.shape();
  const auto n = static_cast<std::uint32_t>(data.size());
  if (s.is_image() || s.channels > 1) {
    w.u8(4);
    w.u32(n);
    w.u32(static_cast<std::uint32_t>(s.height));
    w.u32(static_cast<std::uint32_t>(s.width));
    w.u32(static_cast<std::uint32_t>(s.channels));
  } else {
    w.u8(2);
    w.u32(n);
    w.u32(static_cast<std::uint32_t>(s.width));
  }
  for (double v : data.samples().values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("FDS values must lie in [0,1]");
    w.f32(static_cast<float>(v));
  }
  for (int l : data.labels()) w.u32(static_cast<std::uint32_t>(l));
  return w.take();
}

LabeledDataset decode_fds(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("FDS1");
  const std::size_t rank_at = r.offset();
  const std::uint8_t rank = r.u8();
  if (rank != 2 && rank != 4) {
    throw FormatError("FDS rank must be 2 or 4 at byte offset " + std::to_string(rank_at));
  }
  std::vector<std::uint32_t> dims(rank);
  for (auto& d : dims) d = r.u32();
  SampleShape shape;
  if (rank == 2) {
    shape.width = dims[1];
  } else {
    shape = {dims[1], dims[2], dims[3]};
  }
  const std::size_t n = dims[0];
  if (shape.size() == 0) throw FormatError("FDS sample shape has a zero dimension");
  const std::size_t count = n * shape.size();
  if (r.remaining() != count * 4 + n * 4) {
    throw FormatError("FDS payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                      std::to_string(count * 4 + n * 4) + " (data starts at byte offset " +
                      std::to_string(r.offset()) + ")");
  }
  std::vector<double> values(count);
  for (auto& v : values) {
    const std::size_t at = r.offset();
    const float f = r.f32();
    if (!(f >= 0.0F && f <= 1.0F)) {
      throw FormatError("FDS value out of [0,1] at byte offset " + std::to_string(at));
    }
    v = f;
  }
  std::vector<int> labels(n);
  for (auto& l : labels) {
    const std::size_t at = r.offset();
    const std::uint32_t raw = r.u32();
    if (raw > static_cast<std::uint32_t>(INT32_MAX)) {
      throw FormatError("FDS label too large at byte offset " + std::to_string(at));
    }
    l = static_cast<int>(raw);
  }
  if (n == 0) return LabeledDataset(shape, Tensor(), {});
  return LabeledDataset(shape, Tensor({n, shape.size()}, std::move(values)), std::move(labels));
}

void save_fds(const std::string& path, const LabeledDataset& data) {
  write_file_bytes(path, encode_fds(data));
}

LabeledDataset load_fds(const std::string& path) { return decode_fds(read_file_bytes(path)); }

SynthBenchmark generate_gaussian_clusters(const SynthSpec& spec) {
  if (spec.classes < 1 || spec.dim == 0) throw ArgumentError("synthetic spec needs classes and dim");
  if (spec.image_height == 0 || spec.dim % spec.image_height != 0) {
    throw ArgumentError("image_height must divide dim");
  }
  SampleShape shape{spec.image_height, spec.dim / spec.image_height, 1};
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> center(0.2, 0.8);
  std::normal_distribution<double> noise(0.0, spec.spread);

  std::vector<std::vector<double>> means(static_cast<std::size_t>(spec.classes));
  for (auto& m : means) {
    m.resize(spec.dim);
    for (auto& v : m) v = center(rng);
  }

  auto draw = [&](std::size_t per_class) {
    std::vector<double> data;
    std::vector<int> labels;
    data.reserve(per_class * means.size() * spec.dim);
    for (std::size_t c = 0; c < means.size(); ++c) {
      for (std::size_t k = 0; k < per_class; ++k) {
        for (std::size_t j = 0; j < spec.dim; ++j) {
          const double v = std::clamp(means[c][j] + noise(rng), 0.0, 1.0);
          data.push_back(static_cast<double>(static_cast<float>(v)));
        }
        labels.push_back(static_cast<int>(c));
      }
    }
    if (labels.empty()) return LabeledDataset(shape, Tensor(), {});
    const std::size_t n = labels.size();
    return LabeledDataset(shape, Tensor({n, spec.dim}, std::move(data)), std::move(labels));
  };

  SynthBenchmark out;
  out.train = draw(spec.train_per_class);
  out.test = draw(spec.test_per_class);
  return out;
}

}  // namespace fscil
