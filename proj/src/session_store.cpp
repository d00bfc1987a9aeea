#include "fscil/session_store.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "fscil/augment.hpp"
#include "fscil/binary_io.hpp"
#include "fscil/checkpoint.hpp"
#include "fscil/error.hpp"

namespace fscil {

namespace {

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx) {
  const std::size_t d = x.cols();
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = x.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// One shuffled minibatch pass of cosine-CE over (x, y). Layers flagged
// frozen in `net` stay untouched; the head is updated when train_head.
double sgd_pass(LayerStack& net, PrototypeSet& head, const Tensor& x, std::span<const int> y,
                std::size_t batch, double lr, bool train_head, std::mt19937_64& rng) {
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const SgdConfig step{lr, 1, batch, 0};
  const bool train_net = net.trainable_count() > 0;
  double loss = 0.0;
  std::vector<int> labels;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    std::span<const std::size_t> idx(order.data() + start, end - start);
    labels.clear();
    for (std::size_t i : idx) labels.push_back(y[i]);

    ForwardTrace trace = net.forward_trace(gather_rows(x, idx));
    CosineCeResult res = cosine_ce_loss(trace.output(), labels, head);
    loss += res.loss * static_cast<double>(idx.size());
    if (train_net) sgd_step(net, net.backward(trace, res.feature_grad), step);
    if (train_head) head.apply_gradient(res.prototype_grad, lr);
  }
  return loss / static_cast<double>(n);
}

PrototypeSet relabel(const PrototypeSet& head, const std::vector<int>& ids) {
  return PrototypeSet(ids, head.prototypes(), head.scale());
}

std::vector<int> iota_ids(int first, std::size_t count) {
  std::vector<int> ids(count);
  std::iota(ids.begin(), ids.end(), first);
  return ids;
}

}  // namespace

void TrainConfig::validate() const {
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden widths must be positive");
  }
  if (body_depth == 0 || body_depth > hidden.size()) {
    throw ConfigError("body_depth must lie in [1, " + std::to_string(hidden.size()) + "]");
  }
  if (!(scale > 0.0)) throw ConfigError("scale_s must be positive");
  if (batch == 0) throw ConfigError("batch must be positive");
  for (double lr : {lr_base, lr_ft, lr_inc}) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
  if (epochs_base < 0 || epochs_ft < 0 || epochs_inc < 0) {
    throw ConfigError("epoch counts must be non-negative");
  }
}

SessionModelStore::SessionModelStore(LayerStack body, SessionModel base)
    : body_(std::move(body)) {
  if (body_.empty()) throw ArgumentError("store body is empty");
  if (body_.trainable_count() != 0) throw ArgumentError("store body must be frozen");
  if (base.session_id != 0) throw ProtocolError("first stored session must have id 0");
  append(std::move(base));
}

void SessionModelStore::append(SessionModel model) {
  if (body_.empty()) throw StateError("store has no body");
  if (model.session_id != static_cast<int>(sessions_.size())) {
    throw ProtocolError("expected session id " + std::to_string(sessions_.size()) + ", got " +
                        std::to_string(model.session_id));
  }
  if (model.tail.empty() || model.tail.input_dim() != body_.output_dim()) {
    throw ShapeError("session tail does not fit the shared body");
  }
  if (model.tail.output_dim() != model.classifier.feature_dim()) {
    throw ShapeError("session classifier does not fit its tail");
  }
  for (int c : model.class_ids()) {
    const int owner = session_of_class(c);
    if (owner >= 0) {
      throw ProtocolError("class " + std::to_string(c) + " already learned in session " +
                          std::to_string(owner));
    }
  }
  model.tail.set_all_frozen(true);
  sessions_.push_back(std::move(model));
}

int SessionModelStore::session_of_class(int class_id) const {
  for (const auto& s : sessions_) {
    if (s.classifier.contains(class_id)) return s.session_id;
  }
  return -1;
}

Tensor SessionModelStore::features(std::size_t t, const Tensor& x) const {
  return session(t).tail.forward(body_.forward(x));
}

std::vector<ModelOutput> SessionModelStore::score(std::span<const double> sample) const {
  if (sessions_.empty()) throw StateError("store has no session models");
  const Tensor shared = body_.forward(Tensor({sample.size()}, {sample.begin(), sample.end()}));
  std::vector<ModelOutput> out;
  out.reserve(sessions_.size());
  for (const auto& s : sessions_) {
    const Tensor f = s.tail.forward(shared);
    out.push_back({cosine_logits(f.values(), s.classifier), s.class_ids()});
  }
  return out;
}

BaseTraining train_base(const LabeledDataset& data, const TrainConfig& cfg,
                        bool virtual_categories, bool real_finetune) {
  cfg.validate();
  const std::vector<int> classes = data.classes();
  if (classes.size() < 2) throw ArgumentError("base session needs at least 2 classes");
  for (int c : classes) {
    if (data.indices_of(c).size() < 2) {
      throw ArgumentError("class " + std::to_string(c) + " has fewer than 2 samples");
    }
  }

  // Local ids 0..B-1 for real classes; virtual labels start at B.
  const std::size_t real_count = classes.size();
  std::vector<int> local(data.size());
  std::vector<std::vector<std::size_t>> members(real_count);
  for (std::size_t i = 0; i < data.size(); ++i) {
    local[i] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), data.label(i)) -
                                classes.begin());
    members[static_cast<std::size_t>(local[i])].push_back(i);
  }
  const std::vector<int> real_local = iota_ids(0, real_count);

  std::vector<std::size_t> widths{data.feature_dim()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(cfg.feature_dim);
  LayerStack net = LayerStack::glorot(widths, Activation::Tanh, Activation::Linear, cfg.seed);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t batch = std::min(cfg.batch, data.size());
  PrototypeSet head =
      prototypes_from_features(net.forward(data.samples()), local, real_local, cfg.scale);

  const std::size_t pair_count =
      std::min(cfg.virtual_pairs ? cfg.virtual_pairs : 2 * real_count,
               real_count * (real_count - 1) / 2);
  const std::size_t per_pair = cfg.virtual_samples_per_pair
                                   ? cfg.virtual_samples_per_pair
                                   : std::max<std::size_t>(1, data.size() / real_count / 2);
  const SampleShape shape = data.shape();

  BaseTraining result;
  result.phase_one_rows = real_count + (virtual_categories ? pair_count : 0);

  for (int epoch = 0; epoch < cfg.epochs_base; ++epoch) {
    if (!virtual_categories) {
      sgd_pass(net, head, data.samples(), local, batch, cfg.lr_base, true, rng);
      continue;
    }
    const auto pairs = sample_class_pairs(real_local, pair_count, rng);
    const VirtualLabelTable table = assign_virtual_labels(static_cast<int>(real_count), pairs);

    std::vector<double> vdata;
    std::vector<int> vlabels;
    vdata.reserve(table.size() * per_pair * shape.size());
    for (const auto& [pair, label] : table.entries()) {
      const auto& from_a = members[static_cast<std::size_t>(pair.first)];
      const auto& from_b = members[static_cast<std::size_t>(pair.second)];
      std::uniform_int_distribution<std::size_t> pick_a(0, from_a.size() - 1);
      std::uniform_int_distribution<std::size_t> pick_b(0, from_b.size() - 1);
      for (std::size_t k = 0; k < per_pair; ++k) {
        std::size_t ia = from_a[pick_a(rng)];
        std::size_t ib = from_b[pick_b(rng)];
        if (rng() & 1U) std::swap(ia, ib);
        const MaskSpec mask = make_mask(shape.height, shape.width, rng());
        const Tensor mixed = cutmix(data.image(ia), data.image(ib), mask);
        vdata.insert(vdata.end(), mixed.values().begin(), mixed.values().end());
        vlabels.push_back(label);
      }
    }
    const Tensor virt({vlabels.size(), shape.size()}, std::move(vdata));
    const std::vector<int> virt_ids = iota_ids(static_cast<int>(real_count), table.size());
    const PrototypeSet virt_head =
        prototypes_from_features(net.forward(virt), vlabels, virt_ids, cfg.scale);

    std::vector<double> rows = head.prototypes().data();
    rows.insert(rows.end(), virt_head.prototypes().data().begin(),
                virt_head.prototypes().data().end());
    std::vector<int> ids = real_local;
    ids.insert(ids.end(), virt_ids.begin(), virt_ids.end());
    PrototypeSet joint(ids, Tensor({ids.size(), cfg.feature_dim}, std::move(rows)), cfg.scale);

    std::vector<double> xs = data.samples().data();
    xs.insert(xs.end(), virt.data().begin(), virt.data().end());
    std::vector<int> ys = local;
    ys.insert(ys.end(), vlabels.begin(), vlabels.end());
    const Tensor x_all({ys.size(), shape.size()}, std::move(xs));

    sgd_pass(net, joint, x_all, ys, batch, cfg.lr_base, true, rng);
    head = joint.subset(real_local);
  }

  if (real_finetune) {
    head = prototypes_from_features(net.forward(data.samples()), local, real_local, cfg.scale);
    for (std::size_t i = 0; i < net.depth(); ++i) {
      net.set_frozen(i, !cfg.ft_updates_tail || i < cfg.body_depth);
    }
    for (int epoch = 0; epoch < cfg.epochs_ft; ++epoch) {
      sgd_pass(net, head, data.samples(), local, batch, cfg.lr_ft, true, rng);
    }
  }

  SplitStack split = split_freeze(net, cfg.body_depth);
  split.tail.set_all_frozen(true);
  result.body = std::move(split.body);
  result.model.session_id = 0;
  result.model.tail = std::move(split.tail);
  result.model.classifier = relabel(head, classes);
  return result;
}

SessionModel train_incremental(const SessionModelStore& store, const LabeledDataset& session_data,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (store.empty()) throw StateError("incremental training needs a trained base session");
  if (session_data.empty()) throw ArgumentError("incremental session has no samples");
  const std::vector<int> classes = session_data.classes();
  for (int c : classes) {
    const int owner = store.session_of_class(c);
    if (owner >= 0) {
      throw ProtocolError("class " + std::to_string(c) + " was already learned in session " +
                          std::to_string(owner));
    }
  }

  const auto t = static_cast<int>(store.size());
  LayerStack tail = cfg.inc_tail_init == TailInit::Base ? store.session(0).tail
                                                        : store.sessions().back().tail;
  tail.set_all_frozen(false);

  const Tensor shared = store.body_features(session_data.samples());
  PrototypeSet head =
      prototypes_from_features(tail.forward(shared), session_data.labels(), classes, cfg.scale);

  std::mt19937_64 rng(cfg.seed + 0x51ed27ULL * static_cast<std::uint64_t>(t));
  const std::size_t batch = std::min(cfg.batch, session_data.size());
  for (int epoch = 0; epoch < cfg.epochs_inc; ++epoch) {
    sgd_pass(tail, head, shared, session_data.labels(), batch, cfg.lr_inc, true, rng);
  }
  tail.set_all_frozen(true);
  return SessionModel{t, std::move(tail), std::move(head)};
}

std::vector<std::uint8_t> encode_store(const SessionModelStore& store) {
  if (store.empty()) throw StateError("refusing to save an empty store");
  ByteWriter w;
  w.magic("FSCS");
  w.u16(kStoreVersion);
  w.u16(static_cast<std::uint16_t>(store.size()));
  write_checkpoint(w, store.body());
  for (const auto& s : store.sessions()) {
    w.u32(static_cast<std::uint32_t>(s.session_id));
    w.u32(static_cast<std::uint32_t>(s.class_ids().size()));
    for (int c : s.class_ids()) w.u32(static_cast<std::uint32_t>(c));
    write_checkpoint(w, s.tail);
    const Tensor& p = s.classifier.prototypes();
    w.u32(static_cast<std::uint32_t>(p.rows()));
    w.u32(static_cast<std::uint32_t>(p.cols()));
    for (double v : p.values()) w.f64(v);
    w.f64(s.classifier.scale());
  }
  return w.take();
}

SessionModelStore decode_store(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("FSCS");
  const std::uint16_t version = r.u16();
  if (version != kStoreVersion) {
    throw FormatError("unsupported store version " + std::to_string(version));
  }
  const std::uint16_t count = r.u16();
  if (count == 0) throw FormatError("store file has no sessions");
  LayerStack body = read_checkpoint(r);

  std::vector<SessionModel> models;
  for (std::uint16_t k = 0; k < count; ++k) {
    SessionModel m;
    m.session_id = static_cast<int>(r.u32());
    const std::uint32_t n_ids = r.u32();
    if (r.remaining() < static_cast<std::size_t>(n_ids) * 4) {
      throw FormatError("truncated class-id list at byte offset " + std::to_string(r.offset()));
    }
    std::vector<int> ids(n_ids);
    for (auto& id : ids) id = static_cast<int>(r.u32());
    m.tail = read_checkpoint(r);
    const std::size_t at = r.offset();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != n_ids || cols == 0) {
      throw FormatError("prototype matrix shape mismatch at byte offset " + std::to_string(at));
    }
    if (r.remaining() < (static_cast<std::size_t>(rows) * cols + 1) * 8) {
      throw FormatError("truncated prototype matrix at byte offset " + std::to_string(at));
    }
    std::vector<double> p(static_cast<std::size_t>(rows) * cols);
    for (auto& v : p) v = r.f64();
    const double scale = r.f64();
    try {
      m.classifier = PrototypeSet(std::move(ids), Tensor({rows, cols}, std::move(p)), scale);
    } catch (const Error& e) {
      throw FormatError(std::string("invalid prototype set: ") + e.what());
    }
    models.push_back(std::move(m));
  }
  r.expect_end();

  try {
    SessionModelStore store(std::move(body), std::move(models.front()));
    for (std::size_t k = 1; k < models.size(); ++k) store.append(std::move(models[k]));
    return store;
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("inconsistent store file: ") + e.what());
  }
}

void save_store(const std::string& path, const SessionModelStore& store) {
  write_file_bytes(path, encode_store(store));
}

SessionModelStore load_store(const std::string& path) {
  return decode_store(read_file_bytes(path));
}

}  // namespace fscil
