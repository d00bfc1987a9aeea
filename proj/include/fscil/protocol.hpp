#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fscil/dataset.hpp"
#include "fscil/session_store.hpp"
#include "fscil/uq_router.hpp"

namespace fscil {

/// Ablation switches, named after the method components:
/// FC virtual categories, DR decoupled tail fine-tuning, MS entropy model
/// selection, SR base sub-results, FT real-class classifier fine-tune.
struct AblationFlags {
  bool fc = true;
  bool dr = true;
  bool ms = true;
  bool sr = true;
  bool ft = true;

  std::string vector_string() const;  // e.g. "1,1,1,0,1"
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

/// N-way K-shot session layout. Classes are taken from `class_order`
/// (identity when empty): the first base_classes form session 0, then
/// consecutive groups of `way`.
struct ProtocolSpec {
  int base_classes = 20;
  int way = 5;
  int shot = 5;
  int sessions = 4;  // incremental sessions after the base
  std::uint64_t seed = 1;
  std::vector<int> class_order;

  void validate(int total_classes) const;
  std::vector<std::vector<int>> session_classes() const;
};

struct ProtocolSplit {
  std::vector<std::vector<int>> classes;  // per session
  std::vector<LabeledDataset> train;      // per session
  std::vector<LabeledDataset> test;       // cumulative over seen classes
};

/// Base gets every train sample of its classes; each incremental class gets
/// `shot` seeded-random train samples. Throws ProtocolError when a class has
/// fewer than `shot` samples.
ProtocolSplit split_protocol(const LabeledDataset& train, const LabeledDataset& test,
                             const ProtocolSpec& spec);

struct EvalOptions {
  bool model_selection = true;  // MS
  RouterOptions router;         // router.sub_results is SR
};

struct TraceRow {
  std::size_t index = 0;
  int true_class = -1;
  std::vector<double> model_entropy;
  std::size_t winner = 0;
  int prediction = -1;
};

struct EvalResult {
  double accuracy = 0.0;
  double routing_accuracy = 0.0;
  std::size_t samples = 0;
  std::vector<TraceRow> trace;
};

/// Routed accuracy over `test`. With MS off every model's logits are
/// concatenated into one softmax; routing accuracy then counts samples whose
/// predicted class belongs to the true class's session.
EvalResult evaluate(const SessionScorer& scorer, const LabeledDataset& test,
                    const EvalOptions& options);
EvalResult evaluate(const SessionModelStore& store, const LabeledDataset& test,
                    const EvalOptions& options);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

struct SessionResult {
  int session = 0;
  std::size_t classes_seen = 0;
  std::size_t test_samples = 0;
  double accuracy = 0.0;
  double routing_accuracy = 0.0;
};

struct SessionReport {
  AblationFlags flags;
  std::vector<SessionResult> sessions;
  double average_accuracy = 0.0;

  /// Recomputes average_accuracy from the per-session rows.
  void finalize();
};

EvalOptions eval_options(const AblationFlags& flags);

/// Per-session training config: DR off means zero incremental epochs, i.e.
/// the base tail with a prototype-only classifier.
TrainConfig incremental_config(const TrainConfig& cfg, const AblationFlags& flags);

struct RunOutputs {
  SessionReport report;
  SessionModelStore store;
  std::vector<std::vector<TraceRow>> traces;  // per session
};

RunOutputs run_protocol_full(const LabeledDataset& train, const LabeledDataset& test,
                             const ProtocolSpec& spec, const AblationFlags& flags,
                             const TrainConfig& cfg);

SessionReport run_protocol(const LabeledDataset& train, const LabeledDataset& test,
                           const ProtocolSpec& spec, const AblationFlags& flags,
                           const TrainConfig& cfg);

std::string report_csv(const SessionReport& report);
std::string report_plot_data(const SessionReport& report);

/// Writes sessions.csv and accuracy.dat into `dir` (created if missing).
void write_report(const SessionReport& report, const std::string& dir);

}  // namespace fscil
