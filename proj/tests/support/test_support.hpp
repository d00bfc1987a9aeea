#pragma once

// Test-only oracles and fixtures. Nothing here calls into the code paths it
// is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "fscil/dataset.hpp"
#include "fscil/uq_router.hpp"

namespace fscil::testing {

/// Central finite difference of f with respect to every entry of params.
inline std::vector<double> central_difference(std::vector<double>& params,
                                              const std::function<double()>& f,
                                              double step = 1e-5) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + step;
    const double up = f();
    params[i] = keep - step;
    const double down = f();
    params[i] = keep;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

/// Straight-line cosine-CE loss: mean over rows of -log softmax(s*cos)[y].
inline double cosine_ce_oracle(std::span<const double> features, std::size_t rows,
                               std::size_t dim, std::span<const double> protos,
                               std::size_t classes, std::span<const int> target_rows,
                               double scale) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* f = features.data() + i * dim;
    double fn = 0.0;
    for (std::size_t j = 0; j < dim; ++j) fn += f[j] * f[j];
    fn = std::sqrt(fn);
    std::vector<double> z(classes);
    for (std::size_t k = 0; k < classes; ++k) {
      const double* w = protos.data() + k * dim;
      double wn = 0.0;
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        wn += w[j] * w[j];
        d += f[j] * w[j];
      }
      z[k] = scale * d / (fn * std::sqrt(wn));
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - mx);
    total += -(z[static_cast<std::size_t>(target_rows[i])] - mx - std::log(denom));
  }
  return total / static_cast<double>(rows);
}

/// Entropy by direct summation in long double.
inline double entropy_oracle(std::span<const double> p) {
  long double h = 0.0L;
  for (double v : p) {
    if (v > 0.0) h -= static_cast<long double>(v) * std::log(static_cast<long double>(v));
  }
  return static_cast<double>(h);
}

/// Random point on the probability simplex (normalised exponentials).
inline std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) {
    v = e(rng);
    s += v;
  }
  for (auto& v : p) v /= s;
  return p;
}

/// Each synthetic session model is one-hot on its own classes and uniform
/// elsewhere. The sample's first feature encodes its class id.
class OracleScorer final : public SessionScorer {
 public:
  explicit OracleScorer(std::vector<std::vector<int>> session_classes)
      : sessions_(std::move(session_classes)) {}

  std::size_t model_count() const override { return sessions_.size(); }

  std::vector<ModelOutput> score(std::span<const double> sample) const override {
    const int cls = static_cast<int>(std::lround(sample[0]));
    std::vector<ModelOutput> out;
    for (const auto& ids : sessions_) {
      ModelOutput m{std::vector<double>(ids.size(), 0.0), ids};
      for (std::size_t k = 0; k < ids.size(); ++k) {
        if (ids[k] == cls) m.logits[k] = 1000.0;  // exp(-1000) underflows: exact one-hot
      }
      out.push_back(std::move(m));
    }
    return out;
  }

 private:
  std::vector<std::vector<int>> sessions_;
};

/// Dataset whose sample i carries its class id in feature 0 (for OracleScorer).
inline LabeledDataset labelled_probe_set(const std::vector<int>& classes, std::size_t per_class) {
  std::vector<double> data;
  std::vector<int> labels;
  for (int c : classes) {
    for (std::size_t k = 0; k < per_class; ++k) {
      data.push_back(static_cast<double>(c));
      data.push_back(static_cast<double>(k));
      labels.push_back(c);
    }
  }
  const std::size_t n = labels.size();
  return LabeledDataset(SampleShape{1, 2, 1}, Tensor({n, 2}, std::move(data)), std::move(labels));
}

inline std::vector<int> iota_classes(int first, int count) {
  std::vector<int> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = first + i;
  return v;
}

}  // namespace fscil::testing
