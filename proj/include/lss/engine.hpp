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

// Online inference over a frozen model and index. Sparse modes score only
// the neurons retrieved for [q, 0]; full mode scores all m. Logits are
// ranked raw since any monotone activation preserves the order.

#pragma once

#include <chrono>

#include "lss/model.hpp"
#include "lss/tables.hpp"

namespace lss {

enum class Mode { full, lss, random_hash };

inline std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::full: return "full";
    case Mode::lss: return "lss";
    case Mode::random_hash: return "random-hash";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "full") return Mode::full;
  if (s == "lss") return Mode::lss;
  if (s == "random-hash" || s == "random") return Mode::random_hash;
  fail(ErrorKind::usage, "unknown mode '" + std::string(s) + "' (expected full, lss or random-hash)");
}

inline bool is_sparse(Mode mode) { return mode != Mode::full; }

struct ScoredNeuron {
  NeuronId id = 0;
  float logit = 0.0f;
  bool operator==(const ScoredNeuron&) const = default;
};

/// Logit descending, lower id first on ties.
inline bool ranks_before(const ScoredNeuron& a, const ScoredNeuron& b) {
  return a.logit > b.logit || (a.logit == b.logit && a.id < b.id);
}

struct Prediction {
  std::vector<ScoredNeuron> topk;
  std::size_t sample_size = 0;
  Mode mode = Mode::full;
  std::vector<NeuronId> retrieved;  // only kept on request, sparse modes
  bool operator==(const Prediction&) const = default;
};

struct InferOptions {
  bool keep_retrieved = false;
  bool fallback_to_full = false;  // score everything when retrieval is empty
};

/// Per-thread buffers for infer_one.
struct InferScratch {
  QueryScratch query;
  std::vector<NeuronId> ids;
  std::vector<ScoredNeuron> scored;
};

inline void select_top_k(std::vector<ScoredNeuron>& scored, std::size_t k, std::vector<ScoredNeuron>& out) {
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), ranks_before);
  out.assign(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n));
}

inline Prediction infer_one(const Model& model, const HashIndex* index, std::span<const float> q, std::size_t k,
                            Mode mode, InferScratch& scratch, const InferOptions& opts = {}) {
  require(k >= 1, ErrorKind::usage, "infer: k must be >= 1");
  Prediction p;
  p.mode = mode;
  scratch.scored.clear();
  bool score_all = mode == Mode::full;
  if (!score_all) {
    require(index != nullptr, ErrorKind::usage, "infer: sparse mode needs an index");
    index->query(q, scratch.query, scratch.ids);
    if (scratch.ids.empty() && opts.fallback_to_full) score_all = true;
  }
  if (score_all) {
    scratch.scored.resize(model.classes());
    for (std::size_t i = 0; i < model.classes(); ++i) {
      scratch.scored[i] = {static_cast<NeuronId>(i), neuron_logit<float>(model, q, i)};
    }
  } else {
    scratch.scored.reserve(scratch.ids.size());
    for (NeuronId id : scratch.ids) scratch.scored.push_back({id, neuron_logit<float>(model, q, id)});
    if (opts.keep_retrieved) p.retrieved = scratch.ids;
  }
  p.sample_size = scratch.scored.size();
  select_top_k(scratch.scored, k, p.topk);
  return p;
}

inline Prediction infer_one(const Model& model, const HashIndex* index, std::span<const float> q, std::size_t k,
                            Mode mode, const InferOptions& opts = {}) {
  InferScratch scratch;
  return infer_one(model, index, q, k, mode, scratch, opts);
}

/// Embeds every example; rows of the returned matrix are the queries.
inline Matrix<float> embed_all(const Model& model, const SparseDataset& ds, unsigned threads) {
  Matrix<float> queries(ds.size(), model.hidden());
  parallel_for(ds.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) embed_into<float>(model, ds.examples[i].features, queries.row(i));
  });
  return queries;
}

struct BatchResult {
  std::vector<Prediction> predictions;
  double last_layer_seconds = 0.0;  // hash + lookup + partial matmul + top-k
  double embed_seconds = 0.0;
  std::uint64_t score_macs = 0;  // logits: |S| * (h+1) per query
  std::uint64_t hash_macs = 0;   // projections: K * L * (h+1) per query
  std::uint64_t macs() const { return score_macs + hash_macs; }
};

/// Runs last-layer inference over precomputed queries. Results do not depend
/// on the thread count; each query is handled by exactly one thread.
inline BatchResult infer_queries(const Model& model, const HashIndex* index, const Matrix<float>& queries,
                                 std::size_t k, Mode mode, unsigned threads, const InferOptions& opts = {}) {
  BatchResult out;
  out.predictions.resize(queries.rows());
  const auto start = std::chrono::steady_clock::now();
  parallel_for(queries.rows(), threads, [&](std::size_t begin, std::size_t end) {
    InferScratch scratch;
    for (std::size_t i = begin; i < end; ++i) {
      out.predictions[i] = infer_one(model, index, queries.row(i), k, mode, scratch, opts);
    }
  });
  out.last_layer_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::uint64_t width = model.hidden() + 1;
  for (const auto& p : out.predictions) out.score_macs += p.sample_size * width;
  if (is_sparse(mode) && index != nullptr) {
    out.hash_macs = static_cast<std::uint64_t>(queries.rows()) * index->bits() * index->tables() * width;
  }
  return out;
}

inline BatchResult infer_batch(const Model& model, const HashIndex* index, const SparseDataset& ds, std::size_t k,
                               Mode mode, unsigned threads, const InferOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  const auto queries = embed_all(model, ds, threads);
  const double embed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto out = infer_queries(model, index, queries, k, mode, threads, opts);
  out.embed_seconds = embed_seconds;
  return out;
}

/// Proxy energy for relative comparisons only.
inline constexpr double kJoulesPerMac = 1e-9;

inline double energy_proxy(std::uint64_t mac_count, double joules_per_mac = kJoulesPerMac) {
  return static_cast<double>(mac_count) * joules_per_mac;
}

}  // namespace lss
