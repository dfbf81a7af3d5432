/**
 * Copyright (c) 2026 The lss-index Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Experiment plumbing behind the command-line tool: a flat key = value
// config, data/model/index resolution and one function per subcommand.
// Every data output is deterministic given the config; wall-clock numbers go
// to separate timing_<command>.json files.

#pragma once

#include <charconv>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "lss/iul.hpp"

namespace lss {

/// Ordered key = value pairs. '#' starts a comment; blank lines are skipped.
class Settings {
 public:
  static Settings parse(std::string_view text, const std::string& origin = "config") {
    Settings s;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
      const std::size_t nl = std::min(text.find('\n', pos), text.size());
      std::string_view line = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string where = origin + ":" + std::to_string(line_no);
      require(eq != std::string_view::npos, ErrorKind::usage, where + ": expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      require(!key.empty(), ErrorKind::usage, where + ": empty key");
      require(!s.values_.count(key), ErrorKind::usage, where + ": duplicate key '" + key + "'");
      s.values_[key] = std::string(trim(line.substr(eq + 1)));
    }
    return s;
  }

  static Settings load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::usage, "cannot open config: " + path);
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse(text, path);
  }

  /// Applies "key=value", replacing any earlier value.
  void assign(std::string_view assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string_view::npos && !trim(assignment.substr(0, eq)).empty(), ErrorKind::usage,
            "override '" + std::string(assignment) + "' is not key=value");
    values_[std::string(trim(assignment.substr(0, eq)))] = std::string(trim(assignment.substr(eq + 1)));
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
  // Data: files when data.train is set, otherwise a planted synthetic set.
  std::string train_path, test_path;
  SyntheticParams synthetic{};
  double split = 0.8;

  TrainConfig model{};
  std::size_t bits = 6, tables = 8;
  IulConfig iul{};
  std::vector<std::size_t> ks{1, 5};
  std::vector<Mode> modes{Mode::full, Mode::random_hash, Mode::lss};
  bool fallback_to_full = false;
  std::vector<std::size_t> sweep_bits{4, 6, 8}, sweep_tables{1, 4, 8};
  bool sweep_train_index = true;

  std::uint64_t seed = 1;
  unsigned threads = default_threads();
  std::string out;
  std::string model_path, random_index_path, lss_index_path;  // default under out

  // Sub-seeds derived from the master seed.
  std::uint64_t family_seed() const { return seed * 101 + 7; }
  std::uint64_t iul_seed() const { return seed + 3; }

  std::string out_file(const std::string& name) const { return (std::filesystem::path(out) / name).string(); }
  std::string model_file() const { return model_path.empty() ? out_file("model.bin") : model_path; }
  std::string random_index_file() const {
    return random_index_path.empty() ? out_file("index_random.bin") : random_index_path;
  }
  std::string lss_index_file() const { return lss_index_path.empty() ? out_file("index_lss.bin") : lss_index_path; }

  void validate() const {
    require(!out.empty(), ErrorKind::usage, "no output directory (--out)");
    check_family_shape(bits, tables, 1);
    require(!ks.empty(), ErrorKind::usage, "eval.ks is empty");
    for (auto k : ks) require(k >= 1, ErrorKind::usage, "eval.ks entries must be >= 1");
    require(!modes.empty(), ErrorKind::usage, "eval.modes is empty");
    require(threads >= 1, ErrorKind::usage, "threads must be >= 1");
    require(split > 0.0 && split < 1.0, ErrorKind::usage, "data.split must lie in (0,1)");
    require(model.hidden >= 1 && model.batch >= 1, ErrorKind::usage, "model.hidden and model.batch must be >= 1");
    require(model.lr >= 0.0 && std::isfinite(model.lr), ErrorKind::usage, "model.lr must be finite and >= 0");
    for (auto K : sweep_bits) check_family_shape(K, 1, 1);
    for (auto L : sweep_tables) check_family_shape(1, L, 1);
    iul.validate();
    for (const auto* p : {&train_path, &test_path}) {
      require(p->empty() || std::filesystem::exists(*p), ErrorKind::usage, "dataset not found: " + *p);
    }
    require(test_path.empty() || !train_path.empty(), ErrorKind::usage, "data.test needs data.train");
  }

  static ExperimentConfig from(const Settings& settings);
};

namespace detail {

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  require(!v.empty() && ec == std::errc() && p == end, ErrorKind::usage,
          key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  std::size_t used = 0;
  try {
    out = std::stod(v, &used);
  } catch (...) {
    used = 0;
  }
  require(!v.empty() && used == v.size() && std::isfinite(out), ErrorKind::usage,
          key + ": expected a number, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::usage, key + ": expected true or false, got '" + v + "'");
}

/// Comma-separated items, trimmed; empty items are kept so callers reject them.
inline std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  return out;
}

inline std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& s : to_list(v)) out.push_back(static_cast<std::size_t>(to_u64(key, s)));
  require(!out.empty(), ErrorKind::usage, key + ": empty list");
  return out;
}

}  // namespace detail

/// Builds a config from settings; unknown keys are rejected.
inline ExperimentConfig ExperimentConfig::from(const Settings& settings) {
  using namespace detail;
  ExperimentConfig c;
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>> handlers{
      {"seed", [&](auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"threads", [&](auto& k, auto& v) { c.threads = static_cast<unsigned>(to_u64(k, v)); }},
      {"out", [&](auto&, auto& v) { c.out = v; }},
      {"data.train", [&](auto&, auto& v) { c.train_path = v; }},
      {"data.test", [&](auto&, auto& v) { c.test_path = v; }},
      {"data.split", [&](auto& k, auto& v) { c.split = to_double(k, v); }},
      {"synthetic.classes", [&](auto& k, auto& v) { c.synthetic.num_classes = to_u64(k, v); }},
      {"synthetic.input_dim", [&](auto& k, auto& v) { c.synthetic.input_dim = to_u64(k, v); }},
      {"synthetic.examples", [&](auto& k, auto& v) { c.synthetic.num_examples = to_u64(k, v); }},
      {"synthetic.labels_per_example", [&](auto& k, auto& v) { c.synthetic.classes_per_example = to_u64(k, v); }},
      {"synthetic.noise", [&](auto& k, auto& v) { c.synthetic.noise = to_double(k, v); }},
      {"model.hidden", [&](auto& k, auto& v) { c.model.hidden = to_u64(k, v); }},
      {"model.epochs", [&](auto& k, auto& v) { c.model.epochs = to_u64(k, v); }},
      {"model.lr", [&](auto& k, auto& v) { c.model.lr = to_double(k, v); }},
      {"model.batch", [&](auto& k, auto& v) { c.model.batch = to_u64(k, v); }},
      {"model.loss",
       [&](auto& k, auto& v) {
         if (v == "softmax") c.model.loss = LossKind::softmax;
         else if (v == "sigmoid") c.model.loss = LossKind::sigmoid;
         else fail(ErrorKind::usage, k + ": expected softmax or sigmoid, got '" + v + "'");
       }},
      {"model.path", [&](auto&, auto& v) { c.model_path = v; }},
      {"index.bits", [&](auto& k, auto& v) { c.bits = to_u64(k, v); }},
      {"index.tables", [&](auto& k, auto& v) { c.tables = to_u64(k, v); }},
      {"index.random", [&](auto&, auto& v) { c.random_index_path = v; }},
      {"index.lss", [&](auto&, auto& v) { c.lss_index_path = v; }},
      {"iul.t1", [&](auto&, auto& v) { c.iul.t1 = Threshold::parse(v); }},
      {"iul.t2", [&](auto&, auto& v) { c.iul.t2 = Threshold::parse(v); }},
      {"iul.lr", [&](auto& k, auto& v) { c.iul.lr = to_double(k, v); }},
      {"iul.epochs", [&](auto& k, auto& v) { c.iul.epochs = to_u64(k, v); }},
      {"iul.minibatch", [&](auto& k, auto& v) { c.iul.minibatch = to_u64(k, v); }},
      {"iul.rounds", [&](auto& k, auto& v) { c.iul.rounds = to_u64(k, v); }},
      {"iul.point_norm", [&](auto& k, auto& v) { c.iul.point_norm = to_double(k, v); }},
      {"iul.diagnostic_pairs", [&](auto& k, auto& v) { c.iul.diagnostic_pairs = to_u64(k, v); }},
      {"eval.ks", [&](auto& k, auto& v) { c.ks = to_sizes(k, v); }},
      {"eval.modes",
       [&](auto&, auto& v) {
         c.modes.clear();
         for (const auto& s : to_list(v)) c.modes.push_back(parse_mode(s));
       }},
      {"eval.fallback_full", [&](auto& k, auto& v) { c.fallback_to_full = to_bool(k, v); }},
      {"sweep.bits", [&](auto& k, auto& v) { c.sweep_bits = to_sizes(k, v); }},
      {"sweep.tables", [&](auto& k, auto& v) { c.sweep_tables = to_sizes(k, v); }},
      {"sweep.train_index", [&](auto& k, auto& v) { c.sweep_train_index = to_bool(k, v); }},
  };
  for (const auto& [key, value] : settings.values()) {
    const auto it = handlers.find(key);
    require(it != handlers.end(), ErrorKind::usage, "unknown config key '" + key + "'");
    it->second(key, value);
  }
  c.synthetic.seed = c.seed;
  c.model.seed = c.seed;
  c.iul.seed = c.iul_seed();
  c.iul.threads = c.threads;
  return c;
}

struct DataSplits {
  SparseDataset train, test;
};

/// Resolves the data source: two files, one file split by data.split, or a
/// synthetic set split the same way.
inline DataSplits load_data(const ExperimentConfig& cfg) {
  DataSplits d;
  if (!cfg.train_path.empty() && !cfg.test_path.empty()) {
    d.train = parse_dataset(cfg.train_path);
    d.test = parse_dataset(cfg.test_path);
    require(d.train.input_dim == d.test.input_dim && d.train.num_classes == d.test.num_classes, ErrorKind::data,
            "train and test headers disagree on dimensions");
    return d;
  }
  const auto all = cfg.train_path.empty() ? generate_synthetic(cfg.synthetic) : parse_dataset(cfg.train_path);
  auto [train, test] = split(all, cfg.split, cfg.seed);
  d.train = std::move(train);
  d.test = std::move(test);
  return d;
}

inline Model load_model_for(const ExperimentConfig& cfg, const SparseDataset& ds) {
  const auto path = cfg.model_file();
  require(std::filesystem::exists(path), ErrorKind::usage, "model not found: " + path + " (run train-model first)");
  auto model = load_model(path);
  require(model.input_dim() == ds.input_dim && model.classes() == ds.num_classes, ErrorKind::data,
          path + ": model shape does not match the dataset");
  return model;
}

inline HashIndex load_index_for(const std::string& path, const Model& model, std::string_view hint) {
  require(std::filesystem::exists(path), ErrorKind::usage,
          "index not found: " + path + " (run " + std::string(hint) + " first)");
  auto index = load_index(path);
  require(index.neuron_count() == model.classes() && index.family().hidden() == model.hidden(), ErrorKind::data,
          path + ": index does not match the model");
  return index;
}

inline HashIndex random_index(const ExperimentConfig& cfg, const Model& model, std::size_t K, std::size_t L) {
  return build(init_random(K, L, model.hidden(), cfg.family_seed()), model.W, model.b, cfg.threads);
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::usage, "cannot open for writing: " + path);
  out << text;
  require(static_cast<bool>(out), ErrorKind::data, "write failed: " + path);
}

inline void prepare_out(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  require(!ec && std::filesystem::is_directory(cfg.out), ErrorKind::usage, "cannot create output directory " + cfg.out);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string fmt(double v, int precision = 10) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

}  // namespace detail

inline void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::prepare_out(cfg);
  const auto d = load_data(cfg);
  write_dataset(d.train, cfg.out_file("train.txt"));
  write_dataset(d.test, cfg.out_file("test.txt"));
  log << "wrote " << d.train.size() << " train and " << d.test.size() << " test examples (" << d.train.input_dim
      << " features, " << d.train.num_classes << " classes) to " << cfg.out << "\n";
}

inline Model cmd_train_model(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::prepare_out(cfg);
  const auto d = load_data(cfg);
  detail::Stopwatch clock;
  std::string csv = "epoch,loss,train_p1\n";
  auto result = train(d.train, cfg.model, [&](const EpochStats& s) {
    log << "epoch " << s.epoch << "  loss " << detail::fmt(s.loss, 6) << "  train P@1 " << detail::fmt(s.train_p1, 6)
        << "\n";
    csv += std::to_string(s.epoch) + "," + detail::fmt(s.loss) + "," + detail::fmt(s.train_p1) + "\n";
  });
  const double seconds = clock.seconds();
  save_model(result.model, cfg.model_file());
  detail::write_text(cfg.out_file("train_log.csv"), csv);
  detail::write_text(cfg.out_file("timing_train_model.json"),
                     nlohmann::ordered_json{{"train_seconds", seconds}}.dump(2) + "\n");
  log << "saved " << cfg.model_file() << "\n";
  return std::move(result.model);
}

inline nlohmann::ordered_json bucket_stats_json(const HashIndex& index) {
  const auto stats = bucket_stats(index);
  nlohmann::ordered_json j;
  j["bits"] = index.bits();
  j["tables"] = index.tables();
  j["neurons"] = index.neuron_count();
  j["per_table"] = nlohmann::ordered_json::array();
  for (const auto& t : stats.tables) {
    j["per_table"].push_back({{"max", t.max}, {"mean", t.mean}, {"variance", t.variance}});
  }
  j["histogram"] = stats.histogram;
  return j;
}

inline HashIndex cmd_build_index(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::prepare_out(cfg);
  const auto d = load_data(cfg);
  const auto model = load_model_for(cfg, d.train);
  auto index = random_index(cfg, model, cfg.bits, cfg.tables);
  save_index(index, cfg.random_index_file());
  const auto stats = bucket_stats_json(index);
  detail::write_text(cfg.out_file("bucket_stats.json"), stats.dump(2) + "\n");
  for (std::size_t l = 0; l < index.tables(); ++l) {
    const auto& t = stats["per_table"][l];
    log << "table " << l << "  max " << t["max"].get<std::size_t>() << "  mean "
        << detail::fmt(t["mean"].get<double>(), 6) << "  variance " << detail::fmt(t["variance"].get<double>(), 6)
        << "\n";
  }
  log << "saved " << cfg.random_index_file() << "\n";
  return index;
}

inline PreprocessResult cmd_train_index(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::prepare_out(cfg);
  const auto d = load_data(cfg);
  const auto model = load_model_for(cfg, d.train);
  const auto init = std::filesystem::exists(cfg.random_index_file())
                        ? load_index_for(cfg.random_index_file(), model, "build-index")
                        : random_index(cfg, model, cfg.bits, cfg.tables);
  detail::Stopwatch clock;
  std::string csv = round_log_header() + "\n";
  log << round_log_header() << "\n";
  auto result = preprocess(init, model, d.train, cfg.iul, [&](const RoundLog& r) {
    csv += round_log_row(r) + "\n";
    log << round_log_row(r) << "\n";
  });
  const double seconds = clock.seconds();
  save_index(result.index, cfg.lss_index_file());
  detail::write_text(cfg.out_file("rounds.csv"), csv);
  nlohmann::ordered_json initial{{"pos_collision", result.init_pos_collision},
                                 {"neg_collision", result.init_neg_collision},
                                 {"label_recall", result.init_label_recall},
                                 {"mean_sample_size", result.init_mean_sample_size}};
  detail::write_text(cfg.out_file("rounds_init.json"), initial.dump(2) + "\n");
  detail::write_text(cfg.out_file("timing_train_index.json"),
                     nlohmann::ordered_json{{"train_index_seconds", seconds}}.dump(2) + "\n");
  log << "saved " << cfg.lss_index_file() << "\n";
  return result;
}

inline std::string predictions_csv(const BatchResult& batch) {
  std::ostringstream os;
  os << "example_id,rank,neuron_id,logit,sample_size,mode\n";
  os.precision(9);
  for (std::size_t i = 0; i < batch.predictions.size(); ++i) {
    const auto& p = batch.predictions[i];
    for (std::size_t r = 0; r < p.topk.size(); ++r) {
      os << i << ',' << r + 1 << ',' << p.topk[r].id << ',' << p.topk[r].logit << ',' << p.sample_size << ','
         << to_string(p.mode) << '\n';
    }
  }
  return os.str();
}

inline std::vector<EvalReport> cmd_infer(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::prepare_out(cfg);
  const auto d = load_data(cfg);
  const auto model = load_model_for(cfg, d.test);
  EvalOptions opts;
  opts.ks = cfg.ks;
  opts.threads = cfg.threads;
  opts.seed = cfg.seed;
  opts.infer.fallback_to_full = cfg.fallback_to_full;

  std::vector<EvalReport> reports;
  nlohmann::ordered_json timing;
  std::ostringstream table;
  table << "mode";
  for (auto k : cfg.ks) table << ",p@" << k;
  table << ",mean_sample_size,label_recall,macs_per_query,energy_proxy_per_1000\n";
  for (Mode mode : cfg.modes) {
    std::optional<HashIndex> index;
    if (mode == Mode::random_hash) index = load_index_for(cfg.random_index_file(), model, "build-index");
    if (mode == Mode::lss) index = load_index_for(cfg.lss_index_file(), model, "train-index");
    const auto ev = evaluate(model, index ? &*index : nullptr, d.test, mode, opts);
    const auto& r = ev.report;
    const std::string name(to_string(mode));
    detail::write_text(cfg.out_file("metrics_" + name + ".json"), r.to_json().dump(2) + "\n");
    detail::write_text(cfg.out_file("metrics_" + name + ".csv"), r.csv_header() + "\n" + r.csv_row() + "\n");
    detail::write_text(cfg.out_file("predictions_" + name + ".csv"), predictions_csv(ev.batch));
    timing[name] = {{"wall_time_per_1000", r.wall_time_per_1000},
                    {"last_layer_seconds", ev.batch.last_layer_seconds},
                    {"embed_seconds", ev.batch.embed_seconds}};
    table << name;
    for (auto k : cfg.ks) table << ',' << detail::fmt(r.p_at.at(k));
    table << ',' << detail::fmt(r.mean_sample_size) << ',' << detail::fmt(r.label_recall) << ','
          << detail::fmt(r.macs_per_query) << ',' << detail::fmt(r.energy_proxy_per_1000) << '\n';
    log << std::left << std::setw(12) << name;
    for (auto k : cfg.ks) log << "  P@" << k << " " << std::setw(8) << detail::fmt(r.p_at.at(k), 4);
    log << "  |S| " << std::setw(8) << detail::fmt(r.mean_sample_size, 5) << "  recall "
        << std::setw(7) << detail::fmt(r.label_recall, 4) << "  s/1000 " << detail::fmt(r.wall_time_per_1000, 4)
        << "\n";
    reports.push_back(r);
  }
  detail::write_text(cfg.out_file("table.csv"), table.str());
  detail::write_text(cfg.out_file("timing_infer.json"), timing.dump(2) + "\n");
  return reports;
}

struct SweepCell {
  std::size_t bits = 0, tables = 0;
  EvalReport report;
};

/// Trains (unless sweep.train_index is false) and evaluates one index per
/// (K, L). Cells where no test query retrieves anything report P@k as NA.
inline std::vector<SweepCell> cmd_sweep_kl(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::prepare_out(cfg);
  const auto d = load_data(cfg);
  const auto model = load_model_for(cfg, d.train);
  EvalOptions opts;
  opts.ks = cfg.ks;
  opts.threads = cfg.threads;
  opts.seed = cfg.seed;

  std::vector<SweepCell> cells;
  nlohmann::ordered_json timing = nlohmann::ordered_json::array();
  std::ostringstream csv;
  csv << "K,L";
  for (auto k : cfg.ks) csv << ",p@" << k;
  csv << ",mean_sample_size,label_recall\n";
  for (auto K : cfg.sweep_bits) {
    for (auto L : cfg.sweep_tables) {
      detail::Stopwatch clock;
      auto index = random_index(cfg, model, K, L);
      if (cfg.sweep_train_index) index = preprocess(index, model, d.train, cfg.iul).index;
      const auto ev = evaluate(model, &index, d.test, Mode::lss, opts);
      const auto& r = ev.report;
      const bool empty = r.mean_sample_size == 0.0;
      csv << K << ',' << L;
      for (auto k : cfg.ks) csv << ',' << (empty ? std::string("NA") : detail::fmt(r.p_at.at(k)));
      csv << ',' << detail::fmt(r.mean_sample_size) << ',' << detail::fmt(r.label_recall) << '\n';
      timing.push_back({{"K", K}, {"L", L}, {"seconds", clock.seconds()}});
      log << "K=" << K << " L=" << L << "  P@" << cfg.ks.front() << " "
          << (empty ? std::string("NA") : detail::fmt(r.p_at.at(cfg.ks.front()), 4)) << "  |S| "
          << detail::fmt(r.mean_sample_size, 5) << "\n";
      cells.push_back({K, L, r});
    }
  }
  detail::write_text(cfg.out_file("sweep.csv"), csv.str());
  detail::write_text(cfg.out_file("timing_sweep_kl.json"), timing.dump(2) + "\n");
  return cells;
}

}  // namespace lss
