#include "fscil/uq_router.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fscil/error.hpp"

namespace fscil {

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h <= 0.0 ? 0.0 : h;
}

SubBlockLayout make_layout(std::size_t base_classes, std::size_t inc_classes) {
  if (base_classes == 0 || inc_classes == 0) {
    throw ConfigError("sub-block layout needs positive class counts");
  }
  if (base_classes % inc_classes != 0) {
    throw ConfigError("base class count " + std::to_string(base_classes) +
                      " is not divisible by incremental width " + std::to_string(inc_classes));
  }
  return {base_classes / inc_classes, inc_classes};
}

std::vector<double> block_entropies(std::span<const double> base_probs,
                                    const SubBlockLayout& layout) {
  if (base_probs.size() != layout.base_classes()) {
    throw ShapeError("base output has " + std::to_string(base_probs.size()) +
                     " classes, layout expects " + std::to_string(layout.base_classes()));
  }
  const double max_entropy = std::log(static_cast<double>(layout.block_size));
  std::vector<double> out(layout.block_count);
  std::vector<double> q(layout.block_size);
  for (std::size_t b = 0; b < layout.block_count; ++b) {
    auto block = base_probs.subspan(layout.begin(b), layout.block_size);
    double mass = 0.0;
    for (double p : block) mass += p;
    if (!(mass > 0.0)) {
      out[b] = max_entropy;
      continue;
    }
    for (std::size_t i = 0; i < block.size(); ++i) q[i] = block[i] / mass;
    out[b] = entropy(q);
  }
  return out;
}

BlockUncertainty base_uncertainty(std::span<const double> base_probs,
                                  const SubBlockLayout& layout) {
  const auto h = block_entropies(base_probs, layout);
  BlockUncertainty best{std::numeric_limits<double>::infinity(), 0};
  bool found = false;
  for (std::size_t b = 0; b < layout.block_count; ++b) {
    double mass = 0.0;
    for (std::size_t i = layout.begin(b); i < layout.end(b); ++i) mass += base_probs[i];
    if (!(mass > 0.0)) continue;
    if (h[b] < best.entropy) {
      best = {h[b], b};
      found = true;
    }
  }
  if (!found) return {h.front(), 0};
  return best;
}

UncertaintyRecord route_probabilities(std::span<const ProbVector> outputs,
                                      const RouterOptions& options) {
  if (outputs.empty()) throw StateError("no session models to route between");
  UncertaintyRecord rec;
  rec.model_entropy.resize(outputs.size());

  const ProbVector& base = outputs.front();
  const bool partition = options.sub_results && (outputs.size() > 1 || options.block_size);
  std::optional<SubBlockLayout> layout;
  if (partition) {
    const std::size_t width = options.block_size.value_or(outputs[1].size());
    for (std::size_t t = 1; t < outputs.size(); ++t) {
      if (outputs[t].size() != width) {
        throw ConfigError("incremental sessions differ in width; sub-results need equal widths");
      }
    }
    layout = make_layout(base.size(), width);
  }

  std::optional<std::size_t> base_block;
  if (layout) {
    const auto h = block_entropies(base.probs, *layout);
    const BlockUncertainty best = base_uncertainty(base.probs, *layout);
    rec.candidates = h;
    rec.model_entropy[0] = best.entropy;
    base_block = best.block;
  } else {
    rec.model_entropy[0] = entropy(base.probs);
    rec.candidates.push_back(rec.model_entropy[0]);
  }
  for (std::size_t t = 1; t < outputs.size(); ++t) {
    rec.model_entropy[t] = entropy(outputs[t].probs);
    rec.candidates.push_back(rec.model_entropy[t]);
  }

  // First minimum over models; the base value already is the min over blocks.
  std::size_t winner = 0;
  for (std::size_t t = 1; t < outputs.size(); ++t) {
    if (rec.model_entropy[t] < rec.model_entropy[winner]) winner = t;
  }
  rec.winning_model = winner;

  const ProbVector& chosen = outputs[winner];
  if (winner == 0 && base_block) {
    rec.winning_block = base_block;
    if (options.predict_within_block) {
      std::size_t best = layout->begin(*base_block);
      for (std::size_t i = best + 1; i < layout->end(*base_block); ++i) {
        if (chosen.probs[i] > chosen.probs[best]) best = i;
      }
      rec.predicted_class = chosen.class_ids.at(best);
      return rec;
    }
  }
  rec.predicted_class = chosen.predicted_class();
  return rec;
}

std::vector<ProbVector> to_probabilities(const std::vector<ModelOutput>& outputs) {
  std::vector<ProbVector> probs;
  probs.reserve(outputs.size());
  for (const auto& o : outputs) probs.push_back({softmax(o.logits), o.class_ids});
  return probs;
}

UncertaintyRecord route(std::span<const double> sample, const SessionScorer& scorer,
                        const RouterOptions& options) {
  if (scorer.model_count() == 0) throw StateError("routing needs at least one session model");
  const auto probs = to_probabilities(scorer.score(sample));
  return route_probabilities(probs, options);
}

UncertaintyRecord route(std::span<const double> sample, const SessionModelStore& store,
                        const RouterOptions& options) {
  return route(sample, StoreScorer(store), options);
}

}  // namespace fscil
