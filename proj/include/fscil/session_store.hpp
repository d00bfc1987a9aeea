#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fscil/dataset.hpp"
#include "fscil/layer_stack.hpp"
#include "fscil/prototype.hpp"

namespace fscil {

enum class TailInit { Base, Previous };

struct TrainConfig {
  std::vector<std::size_t> hidden = {64, 32};
  std::size_t feature_dim = 16;
  std::size_t body_depth = 2;
  double scale = 16.0;
  std::size_t batch = 32;

  double lr_base = 0.05;
  int epochs_base = 30;

  // Virtual-category augmentation. Zero means "derive from data":
  // pairs default to 2x the base class count, samples per pair to half the
  // mean per-class sample count.
  std::size_t virtual_pairs = 0;
  std::size_t virtual_samples_per_pair = 0;

  // Real-class classifier fine-tune after virtual-category training.
  double lr_ft = 0.02;
  int epochs_ft = 10;
  bool ft_updates_tail = false;

  double lr_inc = 0.02;
  int epochs_inc = 20;
  TailInit inc_tail_init = TailInit::Base;

  std::uint64_t seed = 1;

  void validate() const;
};

/// One session's isolated parameters: tail plus cosine classifier.
struct SessionModel {
  int session_id = 0;
  LayerStack tail;
  PrototypeSet classifier;

  const std::vector<int>& class_ids() const { return classifier.class_ids(); }
  friend bool operator==(const SessionModel&, const SessionModel&) = default;
};

/// Logits and class ids of one session model for one sample.
struct ModelOutput {
  std::vector<double> logits;
  std::vector<int> class_ids;
};

/// Shared frozen body plus one immutable SessionModel per finished session.
/// Appending a session never touches the body or earlier sessions.
class SessionModelStore {
 public:
  SessionModelStore() = default;
  SessionModelStore(LayerStack body, SessionModel base);

  const LayerStack& body() const { return body_; }
  std::size_t size() const { return sessions_.size(); }
  bool empty() const { return sessions_.empty(); }
  std::span<const SessionModel> sessions() const { return sessions_; }
  const SessionModel& session(std::size_t t) const { return sessions_.at(t); }

  /// Throws ProtocolError on class overlap or an out-of-order session id.
  void append(SessionModel model);

  /// Session index owning class_id, or -1.
  int session_of_class(int class_id) const;

  Tensor body_features(const Tensor& x) const { return body_.forward(x); }
  /// tail_t(body(x)) for rank-1 or rank-2 x.
  Tensor features(std::size_t t, const Tensor& x) const;

  /// Runs the body once and every session head on its output.
  std::vector<ModelOutput> score(std::span<const double> sample) const;

  friend bool operator==(const SessionModelStore&, const SessionModelStore&) = default;

 private:
  LayerStack body_;
  std::vector<SessionModel> sessions_;
};

struct BaseTraining {
  LayerStack body;
  SessionModel model;
  std::size_t phase_one_rows = 0;  // classifier rows (real + virtual) during phase one
};

/// Base session: trains the full extractor and classifier with cosine-CE.
/// `virtual_categories` mixes CutMix virtual classes into every epoch;
/// `real_finetune` then rebuilds a real-only classifier from prototypes and
/// fine-tunes it. The returned classifier holds only the real base classes.
BaseTraining train_base(const LabeledDataset& data, const TrainConfig& cfg,
                        bool virtual_categories, bool real_finetune);

/// Incremental session t = store.size(). The new tail starts as a copy of the
/// base tail (or the latest tail), the classifier from class-mean prototypes,
/// and both are fine-tuned on `session_data` only. The store is not modified.
SessionModel train_incremental(const SessionModelStore& store, const LabeledDataset& session_data,
                               const TrainConfig& cfg);

// Store file ("FSCS"): magic, u16 version, u16 session count, body FSC1
// checkpoint, then per session: u32 session id, u32 class count + u32 ids,
// tail FSC1 checkpoint, u32 rows, u32 cols, f64 prototypes, f64 scale.
inline constexpr std::uint16_t kStoreVersion = 1;

std::vector<std::uint8_t> encode_store(const SessionModelStore& store);
SessionModelStore decode_store(std::span<const std::uint8_t> bytes);
void save_store(const std::string& path, const SessionModelStore& store);
SessionModelStore load_store(const std::string& path);

}  // namespace fscil
