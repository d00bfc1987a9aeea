#include "fscil/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "fscil/error.hpp"

namespace fscil {

std::size_t ProbVector::argmax() const {
  if (probs.empty()) throw StateError("argmax of empty probability vector");
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

PrototypeSet::PrototypeSet(std::vector<int> class_ids, Tensor prototypes, double scale)
    : class_ids_(std::move(class_ids)), prototypes_(std::move(prototypes)), scale_(scale) {
  if (!(scale_ > 0.0)) throw ArgumentError("prototype scale must be positive");
  if (prototypes_.rank() != 2 || prototypes_.rows() != class_ids_.size()) {
    throw ShapeError("prototype matrix must have one row per class id");
  }
  std::set<int> seen;
  for (std::size_t i = 0; i < class_ids_.size(); ++i) {
    if (!seen.insert(class_ids_[i]).second) {
      throw ArgumentError("duplicate class id " + std::to_string(class_ids_[i]));
    }
    if (l2_norm(prototypes_.row(i)) == 0.0) {
      throw ArgumentError("zero-norm prototype for class " + std::to_string(class_ids_[i]));
    }
  }
}

std::size_t PrototypeSet::index_of(int class_id) const {
  auto it = std::find(class_ids_.begin(), class_ids_.end(), class_id);
  if (it == class_ids_.end()) {
    throw ArgumentError("class " + std::to_string(class_id) + " not in prototype set");
  }
  return static_cast<std::size_t>(it - class_ids_.begin());
}

bool PrototypeSet::contains(int class_id) const {
  return std::find(class_ids_.begin(), class_ids_.end(), class_id) != class_ids_.end();
}

PrototypeSet PrototypeSet::subset(std::span<const int> ids) const {
  const std::size_t d = feature_dim();
  Tensor rows({ids.size(), d});
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto src = prototypes_.row(index_of(ids[k]));
    std::copy(src.begin(), src.end(), rows.row(k).begin());
  }
  return PrototypeSet(std::vector<int>(ids.begin(), ids.end()), std::move(rows), scale_);
}

void PrototypeSet::apply_gradient(const Tensor& grad, double learning_rate) {
  if (grad.size() != prototypes_.size()) throw ShapeError("prototype gradient shape mismatch");
  Tensor next = prototypes_;
  for (std::size_t i = 0; i < next.size(); ++i) next[i] -= learning_rate * grad[i];
  for (std::size_t r = 0; r < next.rows(); ++r) {
    if (l2_norm(next.row(r)) == 0.0) throw NumericError("prototype update produced a zero row");
  }
  prototypes_ = std::move(next);
}

Tensor compute_prototype(std::span<const Tensor> features) {
  if (features.empty()) throw ArgumentError("prototype of an empty feature list");
  const std::size_t d = features.front().size();
  std::vector<double> sum(d, 0.0);
  for (const auto& f : features) {
    if (f.size() != d) throw ShapeError("features differ in dimension");
    for (std::size_t i = 0; i < d; ++i) sum[i] += f[i];
  }
  const double n = static_cast<double>(features.size());
  for (auto& v : sum) v /= n;
  return Tensor({d}, std::move(sum));
}

PrototypeSet prototypes_from_features(const Tensor& features, std::span<const int> labels,
                                      std::span<const int> class_ids, double scale) {
  if (features.rows() != labels.size()) throw ShapeError("features and labels differ in count");
  const std::size_t d = features.cols();
  Tensor rows({class_ids.size(), d});
  for (std::size_t k = 0; k < class_ids.size(); ++k) {
    std::vector<Tensor> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == class_ids[k]) {
        auto r = features.row(i);
        members.emplace_back(std::vector<std::size_t>{d}, std::vector<double>(r.begin(), r.end()));
      }
    }
    if (members.empty()) {
      throw ArgumentError("no samples for class " + std::to_string(class_ids[k]));
    }
    Tensor mean = compute_prototype(members);
    std::copy(mean.values().begin(), mean.values().end(), rows.row(k).begin());
  }
  return PrototypeSet(std::vector<int>(class_ids.begin(), class_ids.end()), std::move(rows), scale);
}

std::vector<double> cosine_logits(std::span<const double> feature, const PrototypeSet& protos) {
  if (feature.size() != protos.feature_dim()) {
    throw ShapeError("feature dim " + std::to_string(feature.size()) +
                     " does not match prototype dim " + std::to_string(protos.feature_dim()));
  }
  const double fn = l2_norm(feature);
  if (fn == 0.0) throw NumericError("zero-norm feature has no cosine");
  std::vector<double> logits(protos.size());
  for (std::size_t k = 0; k < protos.size(); ++k) {
    auto w = protos.prototypes().row(k);
    const double c = std::clamp(dot(feature, w) / (fn * l2_norm(w)), -1.0, 1.0);
    logits[k] = protos.scale() * c;
  }
  return logits;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

ProbVector predict_proba(std::span<const double> feature, const PrototypeSet& protos) {
  return ProbVector{softmax(cosine_logits(feature, protos)), protos.class_ids()};
}

CosineCeResult cosine_ce_loss(const Tensor& features, std::span<const int> labels,
                              const PrototypeSet& protos) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  const std::size_t c = protos.size();
  if (n != labels.size()) throw ShapeError("features and labels differ in count");
  if (n == 0) throw ArgumentError("cosine-CE loss of an empty batch");
  if (d != protos.feature_dim()) throw ShapeError("feature dim does not match prototypes");

  std::vector<std::size_t> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = protos.index_of(labels[i]);

  const Tensor& w = protos.prototypes();
  std::vector<double> wnorm(c);
  for (std::size_t k = 0; k < c; ++k) wnorm[k] = l2_norm(w.row(k));

  CosineCeResult res{0.0, Tensor({n, d}), Tensor({c, d})};
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> cosines(c);
  std::vector<double> logits(c);
  for (std::size_t i = 0; i < n; ++i) {
    auto f = features.row(i);
    const double fn = l2_norm(f);
    if (fn == 0.0) throw NumericError("zero-norm feature in cosine-CE batch");
    for (std::size_t k = 0; k < c; ++k) {
      cosines[k] = dot(f, w.row(k)) / (fn * wnorm[k]);
      logits[k] = protos.scale() * cosines[k];
    }
    const auto p = softmax(logits);
    res.loss -= std::log(p[target[i]]) * inv_n;

    auto gf = res.feature_grad.row(i);
    for (std::size_t k = 0; k < c; ++k) {
      // dL/dcos_k = s * (p_k - [k == y]) / n
      const double g = protos.scale() * (p[k] - (k == target[i] ? 1.0 : 0.0)) * inv_n;
      if (g == 0.0) continue;
      auto wk = w.row(k);
      auto gw = res.prototype_grad.row(k);
      const double cos_k = cosines[k];
      for (std::size_t j = 0; j < d; ++j) {
        gf[j] += g * (wk[j] / (fn * wnorm[k]) - cos_k * f[j] / (fn * fn));
        gw[j] += g * (f[j] / (fn * wnorm[k]) - cos_k * wk[j] / (wnorm[k] * wnorm[k]));
      }
    }
  }
  return res;
}

}  // namespace fscil
