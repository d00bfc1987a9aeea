#pragma once

#include <span>
#include <vector>

#include "fscil/tensor.hpp"

namespace fscil {

/// Class probabilities aligned with global class ids.
struct ProbVector {
  std::vector<double> probs;
  std::vector<int> class_ids;

  std::size_t size() const { return probs.size(); }
  std::size_t argmax() const;
  int predicted_class() const { return class_ids.at(argmax()); }
};

/// Cosine classifier: one prototype row per class, logits = scale * cos.
class PrototypeSet {
 public:
  PrototypeSet() = default;
  PrototypeSet(std::vector<int> class_ids, Tensor prototypes, double scale);

  const std::vector<int>& class_ids() const { return class_ids_; }
  const Tensor& prototypes() const { return prototypes_; }
  double scale() const { return scale_; }
  std::size_t size() const { return class_ids_.size(); }
  std::size_t feature_dim() const { return prototypes_.cols(); }

  std::size_t index_of(int class_id) const;
  bool contains(int class_id) const;

  /// Rows for the given ids, in the given order.
  PrototypeSet subset(std::span<const int> ids) const;

  /// prototypes -= lr * grad; rejects a step that zeroes a row.
  void apply_gradient(const Tensor& grad, double learning_rate);

  friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;

 private:
  std::vector<int> class_ids_;
  Tensor prototypes_;
  double scale_ = 16.0;
};

/// Elementwise mean of equally sized feature vectors.
Tensor compute_prototype(std::span<const Tensor> features);

/// Builds a PrototypeSet whose row k is the mean feature of class_ids[k].
/// `features` is n x D with labels aligned to rows.
PrototypeSet prototypes_from_features(const Tensor& features, std::span<const int> labels,
                                      std::span<const int> class_ids, double scale);

std::vector<double> cosine_logits(std::span<const double> feature, const PrototypeSet& protos);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

ProbVector predict_proba(std::span<const double> feature, const PrototypeSet& protos);

struct CosineCeResult {
  double loss = 0.0;
  Tensor feature_grad;    // n x D
  Tensor prototype_grad;  // |C| x D
};

/// Mean negative log-likelihood of the true class under softmax(scale * cos),
/// with analytic gradients for the features and the prototype rows.
CosineCeResult cosine_ce_loss(const Tensor& features, std::span<const int> labels,
                              const PrototypeSet& protos);

}  // namespace fscil
