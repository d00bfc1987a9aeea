// Command-line front end for the session engine.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fscil/config.hpp"
#include "fscil/dataset.hpp"
#include "fscil/error.hpp"
#include "fscil/protocol.hpp"
#include "fscil/session_store.hpp"

namespace fs = std::filesystem;
using namespace fscil;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string trace;
};

ExperimentConfig load(const CommonArgs& args) {
  ExperimentConfig cfg = args.config.empty() ? config_from_json(nlohmann::json::object())
                                             : load_config(args.config);
  if (args.seed) cfg.override_seed(*args.seed);
  return cfg;
}

ProtocolSplit load_split(const ExperimentConfig& cfg) {
  const LabeledDataset train = load_fds(cfg.paths.train);
  const LabeledDataset test = load_fds(cfg.paths.test);
  train.require_dense_labels();
  return split_protocol(train, test, cfg.protocol);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

std::string session_trace_path(const std::string& path, std::size_t session) {
  fs::path p(path);
  const std::string stem = p.stem().string() + "_s" + std::to_string(session);
  return (p.parent_path() / (stem + p.extension().string())).string();
}

void print_result(std::size_t session, const EvalResult& ev) {
  std::printf("session %zu: samples=%zu accuracy=%.6f routing_accuracy=%.6f\n", session,
              ev.samples, ev.accuracy, ev.routing_accuracy);
}

int cmd_gen_synth(const CommonArgs& args, SynthSpec overrides, const std::string& out_dir,
                  const CLI::App& sub) {
  ExperimentConfig cfg = load(args);
  SynthSpec spec = cfg.synth;
  if (sub.count("--classes")) spec.classes = overrides.classes;
  if (sub.count("--dim")) spec.dim = overrides.dim;
  if (sub.count("--train-per-class")) spec.train_per_class = overrides.train_per_class;
  if (sub.count("--test-per-class")) spec.test_per_class = overrides.test_per_class;
  if (sub.count("--spread")) spec.spread = overrides.spread;
  if (sub.count("--image-height")) spec.image_height = overrides.image_height;
  if (args.seed) spec.seed = *args.seed;

  std::string train_path = cfg.paths.train;
  std::string test_path = cfg.paths.test;
  if (!out_dir.empty()) {
    train_path = (fs::path(out_dir) / "train.fds").string();
    test_path = (fs::path(out_dir) / "test.fds").string();
  }
  const SynthBenchmark bench = generate_gaussian_clusters(spec);
  ensure_parent(train_path);
  ensure_parent(test_path);
  save_fds(train_path, bench.train);
  save_fds(test_path, bench.test);
  std::printf("wrote %s (%zu samples) and %s (%zu samples)\n", train_path.c_str(),
              bench.train.size(), test_path.c_str(), bench.test.size());
  return 0;
}

int cmd_train_base(const CommonArgs& args) {
  const ExperimentConfig cfg = load(args);
  const ProtocolSplit split = load_split(cfg);
  BaseTraining base = train_base(split.train[0], cfg.train, cfg.flags.fc, cfg.flags.ft);
  SessionModelStore store(std::move(base.body), std::move(base.model));
  ensure_parent(cfg.paths.store);
  save_store(cfg.paths.store, store);
  print_result(0, evaluate(store, split.test[0], eval_options(cfg.flags)));
  return 0;
}

int cmd_train_inc(const CommonArgs& args, std::optional<std::size_t> session) {
  const ExperimentConfig cfg = load(args);
  const ProtocolSplit split = load_split(cfg);
  SessionModelStore store = load_store(cfg.paths.store);
  const std::size_t t = session.value_or(store.size());
  if (t != store.size()) {
    throw ProtocolError("store holds " + std::to_string(store.size()) +
                        " sessions; next trainable session is " + std::to_string(store.size()));
  }
  if (t >= split.train.size()) throw ProtocolError("protocol has no session " + std::to_string(t));
  store.append(train_incremental(store, split.train[t], incremental_config(cfg.train, cfg.flags)));
  save_store(cfg.paths.store, store);
  print_result(t, evaluate(store, split.test[t], eval_options(cfg.flags)));
  return 0;
}

int cmd_evaluate(const CommonArgs& args, std::optional<std::size_t> session) {
  const ExperimentConfig cfg = load(args);
  const ProtocolSplit split = load_split(cfg);
  const SessionModelStore store = load_store(cfg.paths.store);
  const std::size_t t = session.value_or(store.size() - 1);
  if (t >= store.size()) throw ArgumentError("store has not been trained through session " +
                                             std::to_string(t));
  const EvalResult ev = evaluate(store, split.test[t], eval_options(cfg.flags));
  if (!args.trace.empty()) write_trace_csv(args.trace, ev.trace);
  print_result(t, ev);
  return 0;
}

int cmd_run_protocol(const CommonArgs& args, const std::string& out_dir) {
  const ExperimentConfig cfg = load(args);
  const LabeledDataset train = load_fds(cfg.paths.train);
  const LabeledDataset test = load_fds(cfg.paths.test);
  train.require_dense_labels();
  const RunOutputs run = run_protocol_full(train, test, cfg.protocol, cfg.flags, cfg.train);

  const std::string dir = out_dir.empty() ? cfg.paths.report_dir : out_dir;
  write_report(run.report, dir);
  std::ofstream(fs::path(dir) / "report.json") << report_to_json(run.report).dump(2) << '\n';
  ensure_parent(cfg.paths.store);
  save_store(cfg.paths.store, run.store);
  if (!args.trace.empty()) {
    ensure_parent(args.trace);
    for (std::size_t t = 0; t < run.traces.size(); ++t) {
      write_trace_csv(session_trace_path(args.trace, t), run.traces[t]);
    }
  }
  std::cout << report_csv(run.report);
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& out_dir) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open " + in_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(in_path + ": " + e.what());
  }
  const SessionReport report = report_from_json(j);
  write_report(report, out_dir);
  std::cout << report_csv(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot class-incremental session engine"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "Experiment config JSON");
    sub->add_option("--seed", args.seed, "Override the protocol/training seed");
  };

  SynthSpec synth;
  std::string out_dir;
  auto* gen = app.add_subcommand("gen-synth", "Write a Gaussian-cluster benchmark as FDS files");
  add_common(gen);
  gen->add_option("--out", out_dir, "Output directory (train.fds, test.fds)");
  gen->add_option("--classes", synth.classes);
  gen->add_option("--dim", synth.dim);
  gen->add_option("--train-per-class", synth.train_per_class);
  gen->add_option("--test-per-class", synth.test_per_class);
  gen->add_option("--spread", synth.spread);
  gen->add_option("--image-height", synth.image_height);

  auto* base = app.add_subcommand("train-base", "Train the base session and create the store");
  add_common(base);

  std::optional<std::size_t> session;
  auto* inc = app.add_subcommand("train-inc", "Train the next incremental session");
  add_common(inc);
  inc->add_option("--session", session, "Session index (must be the next one)");

  auto* eval = app.add_subcommand("evaluate", "Evaluate the store on a session's test set");
  add_common(eval);
  eval->add_option("--session", session, "Session whose cumulative test set to use");
  eval->add_option("--trace", args.trace, "Routing trace CSV");

  auto* run = app.add_subcommand("run-protocol", "Run base + all incremental sessions");
  add_common(run);
  run->add_option("--trace", args.trace, "Routing trace CSV (one file per session)");
  run->add_option("--out", out_dir, "Report directory (overrides paths.report_dir)");

  std::string in_path;
  auto* rep = app.add_subcommand("report", "Rewrite CSV/plot files from a report.json");
  rep->add_option("--in", in_path, "report.json from run-protocol")->required();
  rep->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_synth(args, synth, out_dir, *gen);
    if (*base) return cmd_train_base(args);
    if (*inc) return cmd_train_inc(args, session);
    if (*eval) return cmd_evaluate(args, session);
    if (*run) return cmd_run_protocol(args, out_dir);
    if (*rep) return cmd_report(in_path, out_dir);
  } catch (const fscil::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
