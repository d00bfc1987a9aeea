#include "fscil/config.hpp"

#include <filesystem>
#include <fstream>

#include "fscil/error.hpp"

namespace fscil {

namespace {

using nlohmann::json;

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

void ExperimentConfig::override_seed(std::uint64_t seed) {
  protocol.seed = seed;
  train.seed = seed;
}

ExperimentConfig config_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  ExperimentConfig cfg;
  bool train_seed_given = false;

  if (auto it = j.find("protocol"); it != j.end()) {
    const json& p = *it;
    read_opt(p, "base_classes", cfg.protocol.base_classes);
    read_opt(p, "way", cfg.protocol.way);
    read_opt(p, "shot", cfg.protocol.shot);
    read_opt(p, "sessions", cfg.protocol.sessions);
    read_opt(p, "seed", cfg.protocol.seed);
    read_opt(p, "class_order", cfg.protocol.class_order);
  }
  if (auto it = j.find("train"); it != j.end()) {
    const json& t = *it;
    TrainConfig& tc = cfg.train;
    read_opt(t, "lr", tc.lr_base);
    read_opt(t, "lr_ft", tc.lr_ft);
    read_opt(t, "lr_inc", tc.lr_inc);
    read_opt(t, "epochs_base", tc.epochs_base);
    read_opt(t, "epochs_ft", tc.epochs_ft);
    read_opt(t, "epochs_inc", tc.epochs_inc);
    read_opt(t, "batch", tc.batch);
    read_opt(t, "scale_s", tc.scale);
    read_opt(t, "feature_dim", tc.feature_dim);
    read_opt(t, "body_depth", tc.body_depth);
    read_opt(t, "hidden", tc.hidden);
    read_opt(t, "virtual_pairs", tc.virtual_pairs);
    read_opt(t, "virtual_samples_per_pair", tc.virtual_samples_per_pair);
    read_opt(t, "ft_updates_tail", tc.ft_updates_tail);
    std::string init = "base";
    read_opt(t, "inc_tail_init", init);
    if (init == "base") {
      tc.inc_tail_init = TailInit::Base;
    } else if (init == "previous") {
      tc.inc_tail_init = TailInit::Previous;
    } else {
      throw ConfigError("inc_tail_init must be \"base\" or \"previous\"");
    }
    if (t.contains("seed")) {
      read_opt(t, "seed", tc.seed);
      train_seed_given = true;
    }
  }
  if (!train_seed_given) cfg.train.seed = cfg.protocol.seed;

  if (auto it = j.find("flags"); it != j.end()) {
    read_opt(*it, "fc", cfg.flags.fc);
    read_opt(*it, "dr", cfg.flags.dr);
    read_opt(*it, "ms", cfg.flags.ms);
    read_opt(*it, "sr", cfg.flags.sr);
    read_opt(*it, "ft", cfg.flags.ft);
  }
  if (auto it = j.find("paths"); it != j.end()) {
    read_opt(*it, "train", cfg.paths.train);
    read_opt(*it, "test", cfg.paths.test);
    read_opt(*it, "store", cfg.paths.store);
    read_opt(*it, "report_dir", cfg.paths.report_dir);
    read_opt(*it, "split", cfg.paths.split);
  }
  cfg.paths.train = resolve(base_dir, cfg.paths.train);
  cfg.paths.test = resolve(base_dir, cfg.paths.test);
  cfg.paths.store = resolve(base_dir, cfg.paths.store);
  cfg.paths.report_dir = resolve(base_dir, cfg.paths.report_dir);
  cfg.paths.split = resolve(base_dir, cfg.paths.split);

  if (auto it = j.find("synth"); it != j.end()) {
    read_opt(*it, "classes", cfg.synth.classes);
    read_opt(*it, "dim", cfg.synth.dim);
    read_opt(*it, "train_per_class", cfg.synth.train_per_class);
    read_opt(*it, "test_per_class", cfg.synth.test_per_class);
    read_opt(*it, "spread", cfg.synth.spread);
    read_opt(*it, "seed", cfg.synth.seed);
    read_opt(*it, "image_height", cfg.synth.image_height);
  }

  cfg.train.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  ExperimentConfig cfg =
      config_from_json(j, std::filesystem::path(path).parent_path().string());
  if (!cfg.paths.split.empty()) {
    cfg.protocol.class_order = load_class_order(cfg.paths.split, cfg.protocol);
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json protocol = {{"base_classes", cfg.protocol.base_classes},
                   {"way", cfg.protocol.way},
                   {"shot", cfg.protocol.shot},
                   {"sessions", cfg.protocol.sessions},
                   {"seed", cfg.protocol.seed}};
  if (!cfg.protocol.class_order.empty()) protocol["class_order"] = cfg.protocol.class_order;
  json paths = {{"train", cfg.paths.train},
                {"test", cfg.paths.test},
                {"store", cfg.paths.store},
                {"report_dir", cfg.paths.report_dir}};
  if (!cfg.paths.split.empty()) paths["split"] = cfg.paths.split;
  return json{
      {"protocol", protocol},
      {"train",
       {{"lr", t.lr_base},
        {"lr_ft", t.lr_ft},
        {"lr_inc", t.lr_inc},
        {"epochs_base", t.epochs_base},
        {"epochs_ft", t.epochs_ft},
        {"epochs_inc", t.epochs_inc},
        {"batch", t.batch},
        {"scale_s", t.scale},
        {"feature_dim", t.feature_dim},
        {"body_depth", t.body_depth},
        {"hidden", t.hidden},
        {"virtual_pairs", t.virtual_pairs},
        {"virtual_samples_per_pair", t.virtual_samples_per_pair},
        {"ft_updates_tail", t.ft_updates_tail},
        {"inc_tail_init", t.inc_tail_init == TailInit::Base ? "base" : "previous"},
        {"seed", t.seed}}},
      {"flags",
       {{"fc", cfg.flags.fc},
        {"dr", cfg.flags.dr},
        {"ms", cfg.flags.ms},
        {"sr", cfg.flags.sr},
        {"ft", cfg.flags.ft}}},
      {"paths", paths},
      {"synth",
       {{"classes", cfg.synth.classes},
        {"dim", cfg.synth.dim},
        {"train_per_class", cfg.synth.train_per_class},
        {"test_per_class", cfg.synth.test_per_class},
        {"spread", cfg.synth.spread},
        {"seed", cfg.synth.seed},
        {"image_height", cfg.synth.image_height}}},
  };
}

std::vector<int> load_class_order(const std::string& path, ProtocolSpec& spec) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("split file " + path + " is not valid JSON: " + e.what());
  }
  std::vector<int> base;
  std::vector<std::vector<int>> sessions;
  read_opt(j, "base", base);
  read_opt(j, "sessions", sessions);
  if (base.empty()) throw ConfigError("split file has no base classes");
  std::vector<int> order = base;
  for (const auto& s : sessions) {
    if (s.size() != sessions.front().size()) {
      throw ConfigError("split file sessions differ in width");
    }
    order.insert(order.end(), s.begin(), s.end());
  }
  spec.base_classes = static_cast<int>(base.size());
  spec.sessions = static_cast<int>(sessions.size());
  if (!sessions.empty()) spec.way = static_cast<int>(sessions.front().size());
  return order;
}

json report_to_json(const SessionReport& report) {
  json sessions = json::array();
  for (const auto& s : report.sessions) {
    sessions.push_back({{"session", s.session},
                        {"classes", s.classes_seen},
                        {"test_samples", s.test_samples},
                        {"accuracy", s.accuracy},
                        {"routing_accuracy", s.routing_accuracy}});
  }
  return json{{"flags",
               {{"fc", report.flags.fc},
                {"dr", report.flags.dr},
                {"ms", report.flags.ms},
                {"sr", report.flags.sr},
                {"ft", report.flags.ft}}},
              {"sessions", sessions},
              {"average_accuracy", report.average_accuracy}};
}

SessionReport report_from_json(const json& j) {
  SessionReport r;
  try {
    const json& f = j.at("flags");
    r.flags = {f.at("fc").get<bool>(), f.at("dr").get<bool>(), f.at("ms").get<bool>(),
               f.at("sr").get<bool>(), f.at("ft").get<bool>()};
    for (const auto& s : j.at("sessions")) {
      r.sessions.push_back({s.at("session").get<int>(), s.at("classes").get<std::size_t>(),
                            s.at("test_samples").get<std::size_t>(),
                            s.at("accuracy").get<double>(),
                            s.at("routing_accuracy").get<double>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report JSON: ") + e.what());
  }
  r.finalize();
  return r;
}

}  // namespace fscil
