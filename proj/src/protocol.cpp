#include "fscil/protocol.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "fscil/error.hpp"

namespace fscil {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::size_t worker_count(std::size_t items) {
  const std::size_t hw = std::max(1U, std::thread::hardware_concurrency());
  return std::clamp<std::size_t>(items / 64, 1, std::min<std::size_t>(hw, 8));
}

}  // namespace

std::string AblationFlags::vector_string() const {
  std::string s;
  for (bool b : {fc, dr, ms, sr, ft}) {
    if (!s.empty()) s += ',';
    s += b ? '1' : '0';
  }
  return s;
}

void ProtocolSpec::validate(int total_classes) const {
  if (base_classes < 2) throw ConfigError("protocol needs at least 2 base classes");
  if (way < 1 || shot < 1 || sessions < 0) {
    throw ConfigError("way and shot must be positive, sessions non-negative");
  }
  const int needed = base_classes + way * sessions;
  if (needed > total_classes) {
    throw ConfigError("protocol needs " + std::to_string(needed) + " classes, dataset has " +
                      std::to_string(total_classes));
  }
  if (!class_order.empty()) {
    if (static_cast<int>(class_order.size()) < needed) {
      throw ConfigError("class order lists fewer classes than the protocol needs");
    }
    std::set<int> seen;
    for (int c : class_order) {
      if (c < 0 || c >= total_classes) throw ConfigError("class order id out of range");
      if (!seen.insert(c).second) throw ConfigError("class order repeats a class");
    }
  }
}

std::vector<std::vector<int>> ProtocolSpec::session_classes() const {
  std::vector<int> order = class_order;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(base_classes + way * sessions));
    std::iota(order.begin(), order.end(), 0);
  }
  std::vector<std::vector<int>> out;
  out.emplace_back(order.begin(), order.begin() + base_classes);
  for (int s = 0; s < sessions; ++s) {
    auto first = order.begin() + base_classes + s * way;
    out.emplace_back(first, first + way);
  }
  return out;
}

ProtocolSplit split_protocol(const LabeledDataset& train, const LabeledDataset& test,
                             const ProtocolSpec& spec) {
  const auto cls = train.classes();
  const int total = cls.empty() ? 0 : cls.back() + 1;
  spec.validate(total);

  ProtocolSplit split;
  split.classes = spec.session_classes();
  std::vector<int> seen;
  for (std::size_t t = 0; t < split.classes.size(); ++t) {
    const auto& ids = split.classes[t];
    if (t == 0) {
      split.train.push_back(train.with_classes(ids));
    } else {
      std::vector<std::size_t> picked;
      for (int c : ids) {
        auto idx = train.indices_of(c);
        if (static_cast<int>(idx.size()) < spec.shot) {
          throw ProtocolError("class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                              " train samples, fewer than shot " + std::to_string(spec.shot));
        }
        std::mt19937_64 rng(spec.seed * 1000003ULL + static_cast<std::uint64_t>(c));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(spec.shot));
        std::sort(idx.begin(), idx.end());
        picked.insert(picked.end(), idx.begin(), idx.end());
      }
      split.train.push_back(train.select(picked));
    }
    seen.insert(seen.end(), ids.begin(), ids.end());
    split.test.push_back(test.with_classes(seen));
  }
  return split;
}

EvalResult evaluate(const SessionScorer& scorer, const LabeledDataset& test,
                    const EvalOptions& options) {
  if (test.empty()) throw ArgumentError("evaluation needs a non-empty test set");
  if (scorer.model_count() == 0) throw StateError("evaluation needs at least one session model");

  std::map<int, std::size_t> owner;
  {
    const auto outs = scorer.score(test.row(0));
    for (std::size_t t = 0; t < outs.size(); ++t) {
      for (int c : outs[t].class_ids) owner.emplace(c, t);
    }
  }

  const std::size_t n = test.size();
  std::vector<TraceRow> rows(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto outs = scorer.score(test.row(i));
      const auto probs = to_probabilities(outs);
      const UncertaintyRecord rec = route_probabilities(probs, options.router);
      TraceRow& row = rows[i];
      row.index = i;
      row.true_class = test.label(i);
      row.model_entropy = rec.model_entropy;
      if (options.model_selection) {
        row.winner = rec.winning_model;
        row.prediction = rec.predicted_class;
      } else {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < outs.size(); ++t) {
          for (std::size_t k = 0; k < outs[t].logits.size(); ++k) {
            if (outs[t].logits[k] > best) {
              best = outs[t].logits[k];
              row.prediction = outs[t].class_ids[k];
              row.winner = t;
            }
          }
        }
      }
    }
  };

  const std::size_t workers = worker_count(n);
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = std::min(n, w * chunk);
      const std::size_t e = std::min(n, b + chunk);
      pool.emplace_back([&, w, b, e] {
        try {
          work(b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  EvalResult res;
  res.samples = n;
  std::size_t correct = 0;
  std::size_t routed = 0;
  for (const auto& row : rows) {
    correct += row.prediction == row.true_class ? 1 : 0;
    auto it = owner.find(row.true_class);
    routed += (it != owner.end() && it->second == row.winner) ? 1 : 0;
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  res.routing_accuracy = static_cast<double>(routed) / static_cast<double>(n);
  res.trace = std::move(rows);
  return res;
}

EvalResult evaluate(const SessionModelStore& store, const LabeledDataset& test,
                    const EvalOptions& options) {
  return evaluate(StoreScorer(store), test, options);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  std::size_t models = 0;
  for (const auto& r : trace) models = std::max(models, r.model_entropy.size());
  out << "index,true_class";
  for (std::size_t t = 0; t < models; ++t) out << ",H" << t;
  out << ",winner,prediction\n";
  char buf[64];
  for (const auto& r : trace) {
    out << r.index << ',' << r.true_class;
    for (std::size_t t = 0; t < models; ++t) {
      out << ',';
      if (t < r.model_entropy.size()) {
        std::snprintf(buf, sizeof buf, "%.9g", r.model_entropy[t]);
        out << buf;
      }
    }
    out << ',' << r.winner << ',' << r.prediction << '\n';
  }
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write trace " + path);
  write_trace_csv(out, trace);
  if (!out) throw IoError("write failed for " + path);
}

void SessionReport::finalize() {
  if (sessions.empty()) {
    average_accuracy = 0.0;
    return;
  }
  double sum = 0.0;
  for (const auto& s : sessions) sum += s.accuracy;
  average_accuracy = sum / static_cast<double>(sessions.size());
}

EvalOptions eval_options(const AblationFlags& flags) {
  EvalOptions opt;
  opt.model_selection = flags.ms;
  opt.router.sub_results = flags.sr;
  return opt;
}

TrainConfig incremental_config(const TrainConfig& cfg, const AblationFlags& flags) {
  TrainConfig inc = cfg;
  if (!flags.dr) inc.epochs_inc = 0;
  return inc;
}

RunOutputs run_protocol_full(const LabeledDataset& train, const LabeledDataset& test,
                             const ProtocolSpec& spec, const AblationFlags& flags,
                             const TrainConfig& cfg) {
  const ProtocolSplit split = split_protocol(train, test, spec);
  const EvalOptions opts = eval_options(flags);
  if (flags.sr && spec.sessions > 0) make_layout(split.classes[0].size(), split.classes[1].size());

  RunOutputs out;
  out.report.flags = flags;
  BaseTraining base = train_base(split.train[0], cfg, flags.fc, flags.ft);
  out.store = SessionModelStore(std::move(base.body), std::move(base.model));

  const TrainConfig inc_cfg = incremental_config(cfg, flags);
  std::size_t seen = 0;
  for (std::size_t t = 0; t < split.classes.size(); ++t) {
    if (t > 0) out.store.append(train_incremental(out.store, split.train[t], inc_cfg));
    seen += split.classes[t].size();
    EvalResult ev = evaluate(out.store, split.test[t], opts);
    out.report.sessions.push_back(
        {static_cast<int>(t), seen, ev.samples, ev.accuracy, ev.routing_accuracy});
    out.traces.push_back(std::move(ev.trace));
  }
  out.report.finalize();
  return out;
}

SessionReport run_protocol(const LabeledDataset& train, const LabeledDataset& test,
                           const ProtocolSpec& spec, const AblationFlags& flags,
                           const TrainConfig& cfg) {
  return run_protocol_full(train, test, spec, flags, cfg).report;
}

std::string report_csv(const SessionReport& report) {
  std::ostringstream out;
  out << "# FC,DR,MS,SR,FT\n";
  out << "# " << report.flags.vector_string() << "\n";
  out << "session,classes,test_samples,accuracy,routing_accuracy\n";
  for (const auto& s : report.sessions) {
    out << s.session << ',' << s.classes_seen << ',' << s.test_samples << ','
        << fixed6(s.accuracy) << ',' << fixed6(s.routing_accuracy) << '\n';
  }
  out << "AA,,," << fixed6(report.average_accuracy) << ",\n";
  return out.str();
}

std::string report_plot_data(const SessionReport& report) {
  std::ostringstream out;
  out << "# session accuracy\n";
  for (const auto& s : report.sessions) out << s.session << ' ' << fixed6(s.accuracy) << '\n';
  return out.str();
}

void write_report(const SessionReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory " + dir + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& text) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    if (!f) throw IoError("write failed for " + path);
  };
  put("sessions.csv", report_csv(report));
  put("accuracy.dat", report_plot_data(report));
}

}  // namespace fscil
