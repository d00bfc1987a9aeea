#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fscil/checkpoint.hpp"
#include "fscil/dataset.hpp"
#include "fscil/error.hpp"
#include "fscil/protocol.hpp"
#include "fscil/session_store.hpp"

using namespace fscil;

namespace {

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.hidden = {16, 12};
  cfg.feature_dim = 8;
  cfg.epochs_base = 3;
  cfg.epochs_ft = 2;
  cfg.epochs_inc = 3;
  return cfg;
}

SynthBenchmark clusters(int classes, std::size_t dim, std::size_t train_per_class,
                        std::uint64_t seed, std::size_t image_height = 1) {
  SynthSpec spec;
  spec.classes = classes;
  spec.dim = dim;
  spec.train_per_class = train_per_class;
  spec.test_per_class = 50;
  spec.seed = seed;
  spec.image_height = image_height;
  return generate_gaussian_clusters(spec);
}

std::vector<int> range(int first, int count) {
  std::vector<int> v;
  for (int i = 0; i < count; ++i) v.push_back(first + i);
  return v;
}

// Own-session accuracy: argmax of session t's head alone, over its classes.
double own_accuracy(const SessionModelStore& store, std::size_t t, const LabeledDataset& test) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const ModelOutput m = store.score(test.row(i))[t];
    std::size_t best = 0;
    for (std::size_t k = 1; k < m.logits.size(); ++k) {
      if (m.logits[k] > m.logits[best]) best = k;
    }
    hits += m.class_ids[best] == test.label(i) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

SessionModelStore store_from(BaseTraining base) {
  return SessionModelStore(std::move(base.body), std::move(base.model));
}

}  // namespace

TEST_CASE("plain base training keeps one classifier row per base class") {
  const SynthBenchmark data = clusters(4, 8, 20, 3);
  const BaseTraining b = train_base(data.train, quick_config(), false, false);
  CHECK(b.phase_one_rows == 4);
  CHECK(b.model.classifier.size() == 4);
  CHECK(b.model.class_ids() == range(0, 4));
  CHECK(b.body.trainable_count() == 0);
  CHECK(b.model.tail.trainable_count() == 0);
  CHECK(b.body.depth() == 2);
  CHECK(b.model.tail.depth() == 1);
}

TEST_CASE("virtual categories widen phase one, then only real rows remain") {
  const SynthBenchmark data = clusters(4, 8, 20, 3, 2);
  TrainConfig cfg = quick_config();
  cfg.virtual_pairs = 3;
  const BaseTraining b = train_base(data.train, cfg, true, true);
  CHECK(b.phase_one_rows == 7);
  CHECK(b.model.classifier.size() == 4);
  CHECK(b.model.class_ids() == range(0, 4));
}

TEST_CASE("base training keeps global class ids that are not dense") {
  const SynthBenchmark data = clusters(6, 8, 20, 4);
  const std::vector<int> keep = {1, 3, 5};
  const BaseTraining b = train_base(data.train.with_classes(keep), quick_config(), true, true);
  CHECK(b.model.class_ids() == keep);
}

TEST_CASE("base training is deterministic") {
  const SynthBenchmark data = clusters(4, 8, 20, 5, 2);
  const TrainConfig cfg = quick_config();
  const BaseTraining a = train_base(data.train, cfg, true, true);
  const BaseTraining b = train_base(data.train, cfg, true, true);
  CHECK(encode_store(store_from(a)) == encode_store(store_from(b)));
}

TEST_CASE("base training rejects degenerate data and configs") {
  const SynthBenchmark data = clusters(4, 8, 20, 3);
  CHECK_THROWS_AS(train_base(data.train.with_classes(std::vector<int>{2}), quick_config(), false,
                             false),
                  ArgumentError);
  const std::vector<std::size_t> one = {0};
  CHECK_THROWS_AS(train_base(data.train.select(one), quick_config(), false, false), ArgumentError);
  TrainConfig bad = quick_config();
  bad.body_depth = 3;
  CHECK_THROWS_AS(train_base(data.train, bad, false, false), ConfigError);
  bad = quick_config();
  bad.lr_base = 0.0;
  CHECK_THROWS_AS(train_base(data.train, bad, false, false), ConfigError);
}

TEST_CASE("4-Gaussian base session reaches high accuracy with defaults") {
  const SynthBenchmark data = clusters(4, 8, 100, 11);
  const SessionModelStore store = store_from(train_base(data.train, TrainConfig{}, true, true));
  CHECK(own_accuracy(store, 0, data.test) >= 0.95);
}

TEST_CASE("a 5-way 5-shot session reaches high own-session accuracy") {
  ProtocolSpec spec;
  spec.sessions = 1;
  spec.seed = 2;
  const SynthBenchmark data = clusters(25, 16, 100, 2);
  const ProtocolSplit split = split_protocol(data.train, data.test, spec);
  SessionModelStore store = store_from(train_base(split.train[0], TrainConfig{}, true, true));
  store.append(train_incremental(store, split.train[1], TrainConfig{}));
  CHECK(split.train[1].size() == 25);
  CHECK(own_accuracy(store, 1, data.test.with_classes(split.classes[1])) >= 0.90);
}

TEST_CASE("one-shot prototypes without fine-tuning are exactly the sample features") {
  const SynthBenchmark data = clusters(6, 8, 10, 6);
  SessionModelStore store =
      store_from(train_base(data.train.with_classes(range(0, 4)), quick_config(), false, false));
  std::vector<std::size_t> picks;
  for (int c : {4, 5}) picks.push_back(data.train.indices_of(c).front());
  const LabeledDataset shots = data.train.select(picks);

  TrainConfig cfg = quick_config();
  cfg.epochs_inc = 0;
  const SessionModel m = train_incremental(store, shots, cfg);
  CHECK(m.session_id == 1);
  const Tensor f = store.features(0, shots.samples());
  for (std::size_t k = 0; k < 2; ++k) {
    const auto want = f.row(k);
    const auto got = m.classifier.prototypes().row(m.classifier.index_of(shots.label(k)));
    CHECK(std::equal(want.begin(), want.end(), got.begin(), got.end()));
  }
  CHECK(m.tail == store.session(0).tail);
}

TEST_CASE("incremental training touches neither the body nor earlier sessions") {
  const SynthBenchmark data = clusters(12, 8, 20, 7);
  SessionModelStore store =
      store_from(train_base(data.train.with_classes(range(0, 4)), quick_config(), true, true));
  const auto body_bytes = encode_checkpoint(store.body());
  for (int t = 1; t <= 4; ++t) {
    const std::vector<SessionModel> before(store.sessions().begin(), store.sessions().end());
    const SessionModel next =
        train_incremental(store, data.train.with_classes(range(2 + 2 * t, 2)), quick_config());
    CHECK(next.tail.trainable_count() == 0);
    CHECK_FALSE(next.tail == store.session(0).tail);
    store.append(next);
    CHECK(encode_checkpoint(store.body()) == body_bytes);
    for (std::size_t s = 0; s < before.size(); ++s) CHECK(store.session(s) == before[s]);
  }
  CHECK(store.size() == 5);
  CHECK(store.body().trainable_count() == 0);
}

TEST_CASE("tail initialisation can chain from the previous session") {
  const SynthBenchmark data = clusters(8, 8, 20, 8);
  SessionModelStore store =
      store_from(train_base(data.train.with_classes(range(0, 4)), quick_config(), false, false));
  store.append(train_incremental(store, data.train.with_classes(range(4, 2)), quick_config()));
  TrainConfig cfg = quick_config();
  cfg.epochs_inc = 0;
  cfg.inc_tail_init = TailInit::Previous;
  CHECK(train_incremental(store, data.train.with_classes(range(6, 2)), cfg).tail ==
        store.session(1).tail);
  cfg.inc_tail_init = TailInit::Base;
  CHECK(train_incremental(store, data.train.with_classes(range(6, 2)), cfg).tail ==
        store.session(0).tail);
}

TEST_CASE("store rejects overlapping classes and out-of-order sessions") {
  const SynthBenchmark data = clusters(8, 8, 20, 9);
  SessionModelStore store =
      store_from(train_base(data.train.with_classes(range(0, 4)), quick_config(), false, false));
  CHECK_THROWS_AS(train_incremental(store, data.train.with_classes(range(3, 2)), quick_config()),
                  ProtocolError);
  SessionModel m = train_incremental(store, data.train.with_classes(range(4, 2)), quick_config());
  SessionModel wrong_id = m;
  wrong_id.session_id = 2;
  CHECK_THROWS_AS(store.append(wrong_id), ProtocolError);
  store.append(m);
  m.session_id = 2;
  CHECK_THROWS_AS(store.append(m), ProtocolError);
  CHECK(store.session_of_class(5) == 1);
  CHECK(store.session_of_class(7) == -1);
}

TEST_CASE("an empty store cannot train, score or be saved") {
  const SessionModelStore empty;
  const SynthBenchmark data = clusters(2, 4, 5, 1);
  CHECK_THROWS_AS(train_incremental(empty, data.train, quick_config()), StateError);
  CHECK_THROWS_AS(empty.score(data.train.row(0)), StateError);
  CHECK_THROWS_AS(encode_store(empty), StateError);
}

TEST_CASE("store files round-trip byte for byte with nine sessions") {
  const SynthBenchmark data = clusters(20, 8, 10, 10);
  TrainConfig cfg = quick_config();
  SessionModelStore store =
      store_from(train_base(data.train.with_classes(range(0, 4)), cfg, true, true));
  for (int t = 1; t <= 8; ++t) {
    store.append(train_incremental(store, data.train.with_classes(range(2 + 2 * t, 2)), cfg));
  }
  const auto bytes = encode_store(store);
  const SessionModelStore back = decode_store(bytes);
  CHECK(back.size() == 9);
  CHECK(back == store);
  CHECK(encode_store(back) == bytes);

  const auto dir = std::filesystem::temp_directory_path() / "fscil_store_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "store.fscs").string();
  save_store(path, store);
  const SessionModelStore loaded = load_store(path);
  save_store(path, loaded);
  CHECK(load_store(path) == store);
  std::filesystem::remove_all(dir);
}

TEST_CASE("truncated or foreign store files are format errors") {
  const SynthBenchmark data = clusters(4, 8, 10, 12);
  const auto bytes =
      encode_store(store_from(train_base(data.train, quick_config(), false, false)));
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{40}, bytes.size() / 2,
                          bytes.size() - 1}) {
    CHECK_THROWS_AS(decode_store(std::span(bytes).first(cut)), FormatError);
  }
  auto magic = bytes;
  magic[1] = 'X';
  CHECK_THROWS_AS(decode_store(magic), FormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(decode_store(version), FormatError);
  CHECK_THROWS_AS(load_store("/nonexistent/dir/store.fscs"), IoError);
}
