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

// Sparse multi-label datasets: the text format (header line
// "num_examples input_dim num_classes", then one "l1,l2 idx:val ..." line
// per example, 0-based ids), gzip input, a planted synthetic generator and
// a seeded train/test split.

#pragma once

#include <zlib.h>

#include <charconv>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "lss/core.hpp"

namespace lss {

struct SparseVector {
  std::vector<FeatureId> indices;  // strictly increasing
  std::vector<float> values;       // no stored zeros
  std::size_t dim = 0;

  std::size_t nnz() const noexcept { return indices.size(); }
  bool operator==(const SparseVector&) const = default;
};

struct LabeledExample {
  SparseVector features;
  std::vector<ClassId> labels;  // sorted, unique

  bool has_label(ClassId c) const { return std::binary_search(labels.begin(), labels.end(), c); }
  bool operator==(const LabeledExample&) const = default;
};

struct SparseDataset {
  std::vector<LabeledExample> examples;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
  bool operator==(const SparseDataset&) const = default;
};

namespace detail {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline std::string read_text(const std::string& path) {
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "rb");
    require(f != nullptr, ErrorKind::usage, "cannot open dataset: " + path);
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool ok = n == 0;
    gzclose(f);
    require(ok, ErrorKind::data, path + ": gzip stream is corrupt");
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::usage, "cannot open dataset: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace detail

/// Parses one data line against the given dimensions. `where` prefixes errors.
inline LabeledExample parse_example_line(std::string_view line, std::size_t input_dim,
                                         std::size_t num_classes, const std::string& where) {
  auto bad = [&](const std::string& msg) { fail(ErrorKind::data, where + ": " + msg); };
  const auto tokens = detail::split_ws(line);
  if (tokens.empty() || tokens[0].find(':') != std::string_view::npos) bad("empty label list");

  LabeledExample ex;
  std::string_view labels = tokens[0];
  while (true) {
    const auto comma = labels.find(',');
    const auto tok = labels.substr(0, comma);
    std::uint64_t c = 0;
    if (tok.empty() || !detail::parse_number(tok, c)) bad("malformed label '" + std::string(tok) + "'");
    if (c >= num_classes) bad("label out of range: " + std::to_string(c));
    ex.labels.push_back(static_cast<ClassId>(c));
    if (comma == std::string_view::npos) break;
    labels.remove_prefix(comma + 1);
  }
  std::sort(ex.labels.begin(), ex.labels.end());
  ex.labels.erase(std::unique(ex.labels.begin(), ex.labels.end()), ex.labels.end());

  ex.features.dim = input_dim;
  std::int64_t last = -1;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const auto colon = tokens[t].find(':');
    if (colon == std::string_view::npos) bad("malformed feature '" + std::string(tokens[t]) + "'");
    std::uint64_t idx = 0;
    float val = 0.0f;
    if (!detail::parse_number(tokens[t].substr(0, colon), idx) ||
        !detail::parse_number(tokens[t].substr(colon + 1), val)) {
      bad("malformed feature '" + std::string(tokens[t]) + "'");
    }
    if (idx >= input_dim) bad("index out of range: " + std::to_string(idx));
    if (static_cast<std::int64_t>(idx) <= last) bad("non-monotone feature indices");
    if (!std::isfinite(val)) bad("non-finite feature value");
    last = static_cast<std::int64_t>(idx);
    if (val == 0.0f) continue;
    ex.features.indices.push_back(static_cast<FeatureId>(idx));
    ex.features.values.push_back(val);
  }
  return ex;
}

/// Parses a dataset from text already in memory.
inline SparseDataset parse_dataset_text(std::string_view text, const std::string& origin = "dataset") {
  SparseDataset ds;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  require(next_line(line), ErrorKind::data, origin + ": missing header");
  const auto header = detail::split_ws(line);
  std::uint64_t n = 0, d = 0, m = 0;
  if (header.size() != 3 || !detail::parse_number(header[0], n) || !detail::parse_number(header[1], d) ||
      !detail::parse_number(header[2], m)) {
    fail(ErrorKind::data, origin + ":1: missing header (expected 'num_examples input_dim num_classes')");
  }
  ds.input_dim = d;
  ds.num_classes = m;
  ds.examples.reserve(n);
  while (next_line(line)) {
    if (detail::split_ws(line).empty()) {
      // Only trailing blank lines are tolerated.
      std::string_view rest;
      while (next_line(rest)) {
        require(detail::split_ws(rest).empty(), ErrorKind::data,
                origin + ":" + std::to_string(line_no) + ": data after blank line");
      }
      break;
    }
    require(ds.examples.size() < n, ErrorKind::data,
            origin + ":" + std::to_string(line_no) + ": more examples than the header declares");
    ds.examples.push_back(parse_example_line(line, d, m, origin + ":" + std::to_string(line_no)));
  }
  require(ds.examples.size() == n, ErrorKind::data,
          origin + ": header declares " + std::to_string(n) + " examples, found " +
              std::to_string(ds.examples.size()));
  return ds;
}

/// Reads a dataset file; names ending in ".gz" are decompressed.
inline SparseDataset parse_dataset(const std::string& path) {
  return parse_dataset_text(detail::read_text(path), path);
}

inline std::string serialize_dataset(const SparseDataset& ds) {
  std::string out = std::to_string(ds.size()) + " " + std::to_string(ds.input_dim) + " " +
                    std::to_string(ds.num_classes) + "\n";
  char buf[64];
  for (const auto& ex : ds.examples) {
    for (std::size_t i = 0; i < ex.labels.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(ex.labels[i]);
    }
    for (std::size_t i = 0; i < ex.features.nnz(); ++i) {
      out += ' ';
      out += std::to_string(ex.features.indices[i]);
      out += ':';
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, ex.features.values[i]);
      out.append(buf, p);
    }
    out += '\n';
  }
  return out;
}

inline void write_dataset(const SparseDataset& ds, const std::string& path) {
  const auto text = serialize_dataset(ds);
  if (detail::ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    require(f != nullptr, ErrorKind::usage, "cannot open for writing: " + path);
    const int n = gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    gzclose(f);
    require(n == static_cast<int>(text.size()), ErrorKind::data, "write failed: " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::usage, "cannot open for writing: " + path);
  out << text;
}

struct SyntheticParams {
  std::size_t num_classes = 64;
  std::size_t input_dim = 128;
  std::size_t num_examples = 1024;
  std::size_t classes_per_example = 1;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

/// Class c owns features [c*B, (c+1)*B) with B = input_dim / num_classes.
/// Example i carries class i mod m plus (cpe - 1) further distinct random
/// classes; all owned features of its classes are set to 1. A noise fraction
/// adds noise * (active feature count) extra uniformly drawn features
/// (fractional part resolved by a Bernoulli draw).
inline SparseDataset generate_synthetic(const SyntheticParams& p) {
  require(p.classes_per_example >= 1 && p.num_classes >= p.classes_per_example, ErrorKind::usage,
          "synthetic: need num_classes >= classes_per_example >= 1");
  require(p.input_dim >= p.num_classes, ErrorKind::usage, "synthetic: need input_dim >= num_classes");
  require(p.noise >= 0.0 && p.noise <= 1.0, ErrorKind::usage, "synthetic: noise must lie in [0,1]");

  const std::size_t block = p.input_dim / p.num_classes;
  std::mt19937_64 rng(p.seed);
  std::uniform_int_distribution<std::size_t> pick_class(0, p.num_classes - 1);
  std::uniform_int_distribution<std::size_t> pick_feature(0, p.input_dim - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SparseDataset ds;
  ds.input_dim = p.input_dim;
  ds.num_classes = p.num_classes;
  ds.examples.reserve(p.num_examples);
  std::vector<char> active(p.input_dim, 0);
  for (std::size_t i = 0; i < p.num_examples; ++i) {
    LabeledExample ex;
    ex.labels.push_back(static_cast<ClassId>(i % p.num_classes));
    while (ex.labels.size() < p.classes_per_example) {
      const auto c = static_cast<ClassId>(pick_class(rng));
      if (std::find(ex.labels.begin(), ex.labels.end(), c) == ex.labels.end()) ex.labels.push_back(c);
    }
    std::sort(ex.labels.begin(), ex.labels.end());

    std::vector<FeatureId> feats;
    for (ClassId c : ex.labels) {
      for (std::size_t j = 0; j < block; ++j) feats.push_back(static_cast<FeatureId>(c * block + j));
    }
    for (auto f : feats) active[f] = 1;
    const double want = p.noise * static_cast<double>(feats.size());
    std::size_t extra = static_cast<std::size_t>(std::floor(want));
    if (unit(rng) < want - std::floor(want)) ++extra;
    extra = std::min(extra, p.input_dim - feats.size());
    while (extra > 0) {
      const auto f = static_cast<FeatureId>(pick_feature(rng));
      if (active[f]) continue;
      active[f] = 1;
      feats.push_back(f);
      --extra;
    }
    for (auto f : feats) active[f] = 0;
    std::sort(feats.begin(), feats.end());

    ex.features.dim = p.input_dim;
    ex.features.indices = std::move(feats);
    ex.features.values.assign(ex.features.indices.size(), 1.0f);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

/// Seeded shuffled split; the first round(n * train_fraction) go to train.
inline std::pair<SparseDataset, SparseDataset> split(const SparseDataset& ds, double train_fraction,
                                                     std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::usage,
          "split: train fraction must lie in (0,1)");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.size())));

  std::pair<SparseDataset, SparseDataset> out;
  for (auto* part : {&out.first, &out.second}) {
    part->input_dim = ds.input_dim;
    part->num_classes = ds.num_classes;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).examples.push_back(ds.examples[order[i]]);
  }
  return out;
}

}  // namespace lss
