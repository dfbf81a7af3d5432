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

#pragma once

#include <map>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "lss/engine.hpp"

namespace lss {

using LabelSet = std::vector<ClassId>;

inline std::vector<LabelSet> labels_of(const SparseDataset& ds) {
  std::vector<LabelSet> out;
  out.reserve(ds.size());
  for (const auto& ex : ds.examples) out.push_back(ex.labels);
  return out;
}

namespace detail {
inline bool sorted_contains(const std::vector<ClassId>& v, std::uint32_t x) {
  return std::binary_search(v.begin(), v.end(), x);
}
}  // namespace detail

/// Mean over examples of |top-k ∩ y| / k; missing slots count as misses.
inline double precision_at_k(std::span<const Prediction> predictions, std::span<const LabelSet> labels,
                             std::size_t k) {
  require(k >= 1, ErrorKind::usage, "precision_at_k: k must be >= 1");
  require(predictions.size() == labels.size(), ErrorKind::data, "precision_at_k: inputs not aligned");
  std::vector<double> per(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& top = predictions[i].topk;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, top.size()); ++r) hits += detail::sorted_contains(labels[i], top[r].id);
    per[i] = static_cast<double>(hits) / static_cast<double>(k);
  }
  return pairwise_mean(per);
}

/// Mean over examples of |S ∩ y| / |y|; examples without labels are skipped.
inline double label_recall(std::span<const std::vector<NeuronId>> retrieved, std::span<const LabelSet> labels) {
  require(retrieved.size() == labels.size(), ErrorKind::data, "label_recall: inputs not aligned");
  std::vector<double> per;
  per.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) continue;
    std::size_t hits = 0;
    for (ClassId c : labels[i]) hits += std::binary_search(retrieved[i].begin(), retrieved[i].end(), c);
    per.push_back(static_cast<double>(hits) / static_cast<double>(labels[i].size()));
  }
  return pairwise_mean(per);
}

/// Number of tables in which two key sets agree.
inline std::size_t key_matches(std::span<const HashKey> a, std::span<const HashKey> b) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < a.size(); ++l) n += a[l] == b[l];
  return n;
}

template <std::floating_point Real>
using PointPair = std::pair<std::vector<Real>, std::vector<Real>>;

/// Fraction of (pair, table) events where the full K-bit keys coincide.
template <std::floating_point Real>
double collision_probability(const HashFamily<Real>& family, std::span<const PointPair<Real>> pairs) {
  if (pairs.empty()) return 0.0;
  std::vector<double> per(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto ka = hash_keys<Real>(family, pairs[i].first);
    const auto kb = hash_keys<Real>(family, pairs[i].second);
    per[i] = static_cast<double>(key_matches(ka, kb)) / static_cast<double>(family.tables);
  }
  return pairwise_mean(per);
}

struct RankStats {
  double mean = 0.0;
  double median = 0.0;
  std::size_t count = 0;         // (example, label) pairs ranked
  std::size_t not_retrieved = 0;  // sparse mode: labels outside S, ranked |S|+1
};

/// 1-based competition rank of each label's logit: 1 + #{j : z_j > z_label}.
/// With an index, ranks are taken within the retrieved set and labels not
/// retrieved get |S| + 1.
inline RankStats label_rank_stats(const Model& model, const SparseDataset& ds, const HashIndex* index = nullptr,
                                  unsigned threads = 1) {
  std::vector<std::vector<double>> per_example(ds.size());
  std::vector<std::size_t> missing(ds.size(), 0);
  parallel_for(ds.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<float> q(model.hidden()), z(model.classes());
    QueryScratch scratch;
    std::vector<NeuronId> ids;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& ex = ds.examples[i];
      embed_into<float>(model, ex.features, q);
      if (index == nullptr) {
        logits_into<float>(model, q, z);
        for (ClassId c : ex.labels) {
          const auto above = std::count_if(z.begin(), z.end(), [&](float v) { return v > z[c]; });
          per_example[i].push_back(1.0 + static_cast<double>(above));
        }
        continue;
      }
      index->query(q, scratch, ids);
      std::vector<float> zs(ids.size());
      for (std::size_t t = 0; t < ids.size(); ++t) zs[t] = neuron_logit<float>(model, q, ids[t]);
      for (ClassId c : ex.labels) {
        if (!std::binary_search(ids.begin(), ids.end(), c)) {
          per_example[i].push_back(static_cast<double>(ids.size()) + 1.0);
          ++missing[i];
          continue;
        }
        const float zc = neuron_logit<float>(model, q, c);
        const auto above = std::count_if(zs.begin(), zs.end(), [&](float v) { return v > zc; });
        per_example[i].push_back(1.0 + static_cast<double>(above));
      }
    }
  });
  std::vector<double> ranks;
  RankStats out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ranks.insert(ranks.end(), per_example[i].begin(), per_example[i].end());
    out.not_retrieved += missing[i];
  }
  out.count = ranks.size();
  if (ranks.empty()) return out;
  out.mean = pairwise_mean(ranks);
  std::sort(ranks.begin(), ranks.end());
  const std::size_t n = ranks.size();
  out.median = n % 2 ? ranks[n / 2] : 0.5 * (ranks[n / 2 - 1] + ranks[n / 2]);
  return out;
}

struct EvalReport {
  std::string mode;
  std::size_t examples = 0;
  std::map<std::size_t, double> p_at;
  double label_recall = 0.0;
  double mean_sample_size = 0.0;
  double mean_label_rank = 0.0;
  std::optional<double> pos_collision;  // sparse modes only
  std::optional<double> neg_collision;
  double macs_per_query = 0.0;
  double energy_proxy_per_1000 = 0.0;
  double wall_time_per_1000 = 0.0;  // seconds; excluded from deterministic outputs

  /// Deterministic fields only; timing is written separately.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = mode;
    j["examples"] = examples;
    for (const auto& [k, v] : p_at) j["p_at"][std::to_string(k)] = v;
    j["label_recall"] = label_recall;
    j["mean_sample_size"] = mean_sample_size;
    j["mean_label_rank"] = mean_label_rank;
    j["pos_collision"] = pos_collision ? nlohmann::ordered_json(*pos_collision) : nlohmann::ordered_json();
    j["neg_collision"] = neg_collision ? nlohmann::ordered_json(*neg_collision) : nlohmann::ordered_json();
    j["macs_per_query"] = macs_per_query;
    j["energy_proxy_per_1000"] = energy_proxy_per_1000;
    return j;
  }

  std::string csv_header() const {
    std::string h = "mode,examples";
    for (const auto& [k, v] : p_at) h += ",p@" + std::to_string(k);
    return h + ",label_recall,mean_sample_size,mean_label_rank,pos_collision,neg_collision,macs_per_query,"
               "energy_proxy_per_1000";
  }

  std::string csv_row() const {
    std::ostringstream os;
    os.precision(10);
    const auto opt = [](const std::optional<double>& v) {
      std::ostringstream s;
      s.precision(10);
      if (v) s << *v; else s << "NA";
      return s.str();
    };
    os << mode << ',' << examples;
    for (const auto& [k, v] : p_at) os << ',' << v;
    os << ',' << label_recall << ',' << mean_sample_size << ',' << mean_label_rank << ',' << opt(pos_collision)
       << ',' << opt(neg_collision) << ',' << macs_per_query << ',' << energy_proxy_per_1000;
    return os.str();
  }
};

struct EvalOptions {
  std::vector<std::size_t> ks{1, 5};
  unsigned threads = 1;
  std::uint64_t seed = 0;  // picks the random non-label neuron per query for neg_collision
  InferOptions infer{};
  double joules_per_mac = kJoulesPerMac;
};

struct Evaluation {
  EvalReport report;
  BatchResult batch;
};

/// Runs inference in one mode and derives every metric of the report.
/// Collision probabilities pair each query with its labels (positive) and
/// with one seeded random non-label neuron (negative).
inline Evaluation evaluate(const Model& model, const HashIndex* index, const SparseDataset& ds, Mode mode,
                           const EvalOptions& opts) {
  require(!opts.ks.empty(), ErrorKind::usage, "evaluate: no k given");
  Evaluation ev;
  auto infer = opts.infer;
  infer.keep_retrieved = true;
  const std::size_t kmax = *std::max_element(opts.ks.begin(), opts.ks.end());
  ev.batch = infer_batch(model, index, ds, kmax, mode, opts.threads, infer);
  const auto labels = labels_of(ds);
  auto& r = ev.report;
  r.mode = std::string(to_string(mode));
  r.examples = ds.size();
  for (auto k : opts.ks) r.p_at[k] = precision_at_k(ev.batch.predictions, labels, k);

  std::vector<double> sizes;
  for (const auto& p : ev.batch.predictions) sizes.push_back(static_cast<double>(p.sample_size));
  r.mean_sample_size = pairwise_mean(sizes);
  if (is_sparse(mode)) {
    std::vector<std::vector<NeuronId>> retrieved;
    for (const auto& p : ev.batch.predictions) retrieved.push_back(p.retrieved);
    r.label_recall = label_recall(retrieved, labels);
    r.mean_label_rank = label_rank_stats(model, ds, index, opts.threads).mean;

    const auto queries = embed_all(model, ds, opts.threads);
    const auto& fam = index->family();
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, model.classes() - 1);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto kq = hash_query<float>(fam, queries.row(i));
      for (ClassId c : ds.examples[i].labels) {
        const auto kn = hash_neuron<float>(fam, model.W.row(c), model.b[c]);
        pos.push_back(static_cast<double>(key_matches(kq, kn)) / static_cast<double>(fam.tables));
      }
      if (ds.examples[i].labels.size() < model.classes()) {
        std::size_t j = pick(rng);
        while (ds.examples[i].has_label(static_cast<ClassId>(j))) j = pick(rng);
        const auto kn = hash_neuron<float>(fam, model.W.row(j), model.b[j]);
        neg.push_back(static_cast<double>(key_matches(kq, kn)) / static_cast<double>(fam.tables));
      }
    }
    r.pos_collision = pairwise_mean(pos);
    r.neg_collision = pairwise_mean(neg);
  } else {
    r.label_recall = 1.0;
    r.mean_label_rank = label_rank_stats(model, ds, nullptr, opts.threads).mean;
  }
  const double n = std::max<double>(1.0, static_cast<double>(ds.size()));
  r.macs_per_query = static_cast<double>(ev.batch.macs()) / n;
  r.energy_proxy_per_1000 = energy_proxy(ev.batch.macs(), opts.joules_per_mac) * 1000.0 / n;
  r.wall_time_per_1000 = ev.batch.last_layer_seconds * 1000.0 / n;
  return ev;
}

}  // namespace lss
