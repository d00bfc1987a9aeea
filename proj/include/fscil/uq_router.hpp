#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fscil/prototype.hpp"
#include "fscil/session_store.hpp"

namespace fscil {

/// Shannon entropy in nats; zero-probability terms contribute nothing.
double entropy(std::span<const double> probs);

/// Contiguous equal-width partition of the base model's class indices.
struct SubBlockLayout {
  std::size_t block_count = 1;  // N_sub
  std::size_t block_size = 1;   // |C^i|

  std::size_t base_classes() const { return block_count * block_size; }
  std::size_t begin(std::size_t block) const { return block * block_size; }
  std::size_t end(std::size_t block) const { return (block + 1) * block_size; }
};

/// Throws ConfigError unless inc_classes divides base_classes.
SubBlockLayout make_layout(std::size_t base_classes, std::size_t inc_classes);

struct BlockUncertainty {
  double entropy = 0.0;
  std::size_t block = 0;
};

/// Per-block renormalised entropy of the base output; returns the smallest
/// (lowest block index on ties). Blocks with zero mass count as ln|C^i| and
/// only win when every block has zero mass.
BlockUncertainty base_uncertainty(std::span<const double> base_probs,
                                  const SubBlockLayout& layout);

/// Entropies of every block, in block order (zero-mass blocks = ln|C^i|).
std::vector<double> block_entropies(std::span<const double> base_probs,
                                    const SubBlockLayout& layout);

struct RouterOptions {
  bool sub_results = true;
  // When a base sub-block wins, predict inside that block instead of over the
  // full base output.
  bool predict_within_block = false;
  // Block width for the base partition; defaults to the first incremental
  // model's class count.
  std::optional<std::size_t> block_size;
};

struct UncertaintyRecord {
  // Candidate uncertainties in order: base entries first (one, or N_sub when
  // partitioned), then one per incremental model.
  std::vector<double> candidates;
  // One value per model; the base value is the minimum over its blocks.
  std::vector<double> model_entropy;
  std::size_t winning_model = 0;
  std::optional<std::size_t> winning_block;
  int predicted_class = -1;
};

/// Selects the minimum-entropy model among per-model probability outputs.
/// Ties go to the earliest candidate (the base model first).
UncertaintyRecord route_probabilities(std::span<const ProbVector> outputs,
                                      const RouterOptions& options);

/// Source of per-session logits for a sample. SessionModelStore is the real
/// one; tests plug in synthetic sessions.
class SessionScorer {
 public:
  virtual ~SessionScorer() = default;
  virtual std::size_t model_count() const = 0;
  virtual std::vector<ModelOutput> score(std::span<const double> sample) const = 0;
};

class StoreScorer final : public SessionScorer {
 public:
  explicit StoreScorer(const SessionModelStore& store) : store_(store) {}
  std::size_t model_count() const override { return store_.size(); }
  std::vector<ModelOutput> score(std::span<const double> sample) const override {
    return store_.score(sample);
  }

 private:
  const SessionModelStore& store_;
};

std::vector<ProbVector> to_probabilities(const std::vector<ModelOutput>& outputs);

UncertaintyRecord route(std::span<const double> sample, const SessionScorer& scorer,
                        const RouterOptions& options);
UncertaintyRecord route(std::span<const double> sample, const SessionModelStore& store,
                        const RouterOptions& options);

}  // namespace fscil
