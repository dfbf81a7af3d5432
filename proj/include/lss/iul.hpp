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

// Hyperplane training from retrieval feedback.
//
// Each round mines pairs against the current index. For a training example
// with query q and retrieved set S:
//   positive (q, y)  label y not in S whose logit q.w_y + b_y > t1
//   negative (q, j)  j in S, not a label, whose logit q.w_j + b_j < t2
// Both lists are shuffled and cut to g = min(|P+|, |P-|). The hyperplanes
// then take SGD steps on the index update loss
//   sum_{P+} -log sigma(k(u).k(v)) + sum_{P-} -log(1 - sigma(k(u).k(v)))
// where u = [w, b], v = [q, 0] and k(x) = tanh(theta x) over all K*L
// hyperplanes, and the tables are rebuilt. Neurons and queries stay fixed.
//
// Before relaxing, u and v are rescaled to length point_norm. Keys are sign
// patterns and do not see the scale, but tanh does: at the raw scale of a
// trained model nearly every code saturates and the positive term has no
// gradient left.

#pragma once

#include <functional>
#include <random>

#include "lss/metrics.hpp"

namespace lss {

/// Logit threshold, either absolute or a per-query percentile of that
/// query's m logits (written "p95").
struct Threshold {
  enum class Kind { absolute, percentile };
  Kind kind = Kind::absolute;
  double value = 0.0;

  static Threshold parse(std::string_view s) {
    Threshold t;
    std::string_view num = s;
    if (!s.empty() && (s.front() == 'p' || s.front() == 'P')) {
      t.kind = Kind::percentile;
      num.remove_prefix(1);
    }
    const std::string text(num);
    std::size_t used = 0;
    try {
      t.value = std::stod(text, &used);
    } catch (...) {
      used = 0;
    }
    require(!text.empty() && used == text.size() && std::isfinite(t.value), ErrorKind::usage,
            "bad threshold '" + std::string(s) + "' (expected a number or pNN)");
    if (t.kind == Kind::percentile) {
      require(t.value >= 0.0 && t.value <= 100.0, ErrorKind::usage, "percentile threshold must lie in [0, 100]");
    }
    return t;
  }

  std::string str() const {
    std::ostringstream os;
    if (kind == Kind::percentile) os << 'p';
    os << value;
    return os.str();
  }

  /// Resolves against one query's logits. Percentiles interpolate linearly
  /// between order statistics.
  double resolve(std::span<const float> logits) const {
    if (kind == Kind::absolute) return value;
    std::vector<float> z(logits.begin(), logits.end());
    std::sort(z.begin(), z.end());
    const double pos = value / 100.0 * static_cast<double>(z.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, z.size() - 1);
    return z[lo] + (pos - static_cast<double>(lo)) * (static_cast<double>(z[hi]) - z[lo]);
  }
};

struct IulConfig {
  Threshold t1{Threshold::Kind::percentile, 90.0};
  Threshold t2{Threshold::Kind::percentile, 50.0};
  double lr = 0.05;
  std::size_t epochs = 3;
  std::size_t minibatch = 256;
  std::size_t rounds = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t diagnostic_pairs = 4096;  // cap on each fixed collision-probe set
  double point_norm = 0.1;               // relaxation input length; 0 keeps raw points

  void validate() const {
    require(t1.kind == t2.kind, ErrorKind::usage, "t1 and t2 must both be absolute or both percentiles");
    require(t1.value > t2.value, ErrorKind::usage, "thresholds need t1 > t2");
    require(lr >= 0.0 && std::isfinite(lr), ErrorKind::usage, "IUL learning rate must be finite and >= 0");
    require(minibatch >= 1, ErrorKind::usage, "IUL minibatch must be >= 1");
    require(point_norm >= 0.0 && std::isfinite(point_norm), ErrorKind::usage, "IUL point_norm must be >= 0");
  }
};

struct TrainingPair {
  std::uint32_t query = 0;  // row of PairBatch::queries
  NeuronId neuron = 0;
  bool operator==(const TrainingPair&) const = default;
};

struct PairBatch {
  Matrix<float> queries;  // snapshot of q for every mined example
  std::vector<TrainingPair> positives;
  std::vector<TrainingPair> negatives;
  std::size_t positives_found = 0;  // before balancing
  std::size_t negatives_found = 0;

  std::size_t g() const noexcept { return positives.size(); }
};

namespace detail {

/// Scratch for one pair's forward/backward pass.
template <std::floating_point Real>
struct PairWork {
  std::vector<Real> u, v, ku, kv;
};

/// Loss of one pair; adds scale * d(loss)/d(theta) into grad when given.
template <std::floating_point Real>
Real pair_loss(const HashFamily<Real>& f, std::span<const float> q, std::span<const float> w, float bias,
               bool positive, Real point_norm, Matrix<Real>* grad, Real scale, PairWork<Real>& work) {
  const std::size_t h = f.hidden(), rows = f.bits * f.tables;
  work.u.assign(w.begin(), w.end());
  work.u.push_back(static_cast<Real>(bias));
  work.v.assign(q.begin(), q.end());
  work.v.push_back(Real(0));
  if (point_norm > Real(0)) {
    for (auto* x : {&work.u, &work.v}) {
      Real n2 = 0;
      for (Real e : *x) n2 += e * e;
      if (n2 > Real(0)) {
        const Real inv = point_norm / std::sqrt(n2);
        for (Real& e : *x) e *= inv;
      }
    }
  }
  work.ku.resize(rows);
  work.kv.resize(rows);
  const std::span<const Real> uh(work.u.data(), h), vh(work.v.data(), h);
  Real s = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    work.ku[r] = std::tanh(project(f, r, uh, work.u[h]));
    work.kv[r] = std::tanh(project(f, r, vh, Real(0)));
    s += work.ku[r] * work.kv[r];
  }
  const double sd = static_cast<double>(s);
  const Real loss = static_cast<Real>(positive ? softplus(-sd) : softplus(sd));
  if (grad != nullptr) {
    const Real dlds = static_cast<Real>(positive ? sigmoid(sd) - 1.0 : sigmoid(sd)) * scale;
    for (std::size_t r = 0; r < rows; ++r) {
      const Real cu = dlds * work.kv[r] * (Real(1) - work.ku[r] * work.ku[r]);
      const Real cv = dlds * work.ku[r] * (Real(1) - work.kv[r] * work.kv[r]);
      auto g = grad->row(r);
      for (std::size_t j = 0; j <= h; ++j) g[j] += cu * work.u[j] + cv * work.v[j];
    }
  }
  return loss;
}

template <std::floating_point Real>
Real batch_loss(const HashFamily<Real>& f, const PairBatch& batch, const Matrix<float>& W,
                std::span<const float> b, Real point_norm, Matrix<Real>* grad) {
  require(W.cols() + 1 == f.width() && batch.queries.cols() + 1 == f.width(), ErrorKind::data,
          "iul: point width differs from family width");
  PairWork<Real> work;
  Real total = 0;
  for (const auto& p : batch.positives) {
    total += pair_loss(f, batch.queries.row(p.query), W.row(p.neuron), b[p.neuron], true, point_norm, grad, Real(1), work);
  }
  for (const auto& p : batch.negatives) {
    total += pair_loss(f, batch.queries.row(p.query), W.row(p.neuron), b[p.neuron], false, point_norm, grad, Real(1), work);
  }
  return total;
}

}  // namespace detail

/// Index update loss of the batch (a sum over pairs; 0 when empty).
template <std::floating_point Real>
Real iul_loss(const HashFamily<Real>& family, const PairBatch& batch, const Matrix<float>& W,
              std::span<const float> b, Real point_norm = 1) {
  return detail::batch_loss<Real>(family, batch, W, b, point_norm, nullptr);
}

/// Gradient of iul_loss with respect to theta, shape (K*L) x (h+1).
template <std::floating_point Real>
Matrix<Real> iul_grad(const HashFamily<Real>& family, const PairBatch& batch, const Matrix<float>& W,
                      std::span<const float> b, Real point_norm = 1) {
  Matrix<Real> grad(family.theta.rows(), family.theta.cols());
  detail::batch_loss<Real>(family, batch, W, b, point_norm, &grad);
  return grad;
}

struct RetrievalSummary {
  double label_recall = 0.0;
  double mean_sample_size = 0.0;
};

/// Holds the frozen per-example state mining needs: query snapshots and
/// resolved thresholds. The model is frozen during preprocessing, so this
/// is computed once and reused by every round.
class PairMiner {
 public:
  PairMiner(const Model& model, const SparseDataset& data, const IulConfig& cfg)
      : model_(model), data_(data), cfg_(cfg) {
    cfg_.validate();
    queries_ = embed_all(model, data, cfg.threads);
    t1_.resize(data.size());
    t2_.resize(data.size());
    const bool need_logits = cfg.t1.kind == Threshold::Kind::percentile;
    parallel_for(data.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
      std::vector<float> z(need_logits ? model.classes() : 0);
      for (std::size_t i = begin; i < end; ++i) {
        if (need_logits) logits_into<float>(model, queries_.row(i), z);
        t1_[i] = cfg.t1.resolve(z);
        t2_[i] = cfg.t2.resolve(z);
      }
    });
  }

  const Matrix<float>& queries() const noexcept { return queries_; }
  double t1(std::size_t i) const { return t1_[i]; }
  double t2(std::size_t i) const { return t2_[i]; }

  /// All pairs meeting the criteria against this index, in example order
  /// then label (or neuron id) order; not shuffled or balanced.
  PairBatch mine_all(const HashIndex& index) const {
    const std::size_t n = data_.size();
    std::vector<std::vector<TrainingPair>> pos(n), neg(n);
    parallel_for(n, cfg_.threads, [&](std::size_t begin, std::size_t end) {
      QueryScratch scratch;
      std::vector<NeuronId> ids;
      for (std::size_t i = begin; i < end; ++i) {
        const auto q = queries_.row(i);
        const auto& ex = data_.examples[i];
        index.query(q, scratch, ids);
        const auto qi = static_cast<std::uint32_t>(i);
        for (ClassId y : ex.labels) {
          if (!std::binary_search(ids.begin(), ids.end(), y) && neuron_logit<float>(model_, q, y) > t1_[i]) {
            pos[i].push_back({qi, y});
          }
        }
        for (NeuronId j : ids) {
          if (!ex.has_label(j) && neuron_logit<float>(model_, q, j) < t2_[i]) neg[i].push_back({qi, j});
        }
      }
    });
    PairBatch batch;
    batch.queries = queries_;
    for (std::size_t i = 0; i < n; ++i) {
      batch.positives.insert(batch.positives.end(), pos[i].begin(), pos[i].end());
      batch.negatives.insert(batch.negatives.end(), neg[i].begin(), neg[i].end());
    }
    batch.positives_found = batch.positives.size();
    batch.negatives_found = batch.negatives.size();
    return batch;
  }

  /// Mined pairs, shuffled with the seed and cut to g = min(|P+|, |P-|).
  PairBatch mine(const HashIndex& index, std::uint64_t seed) const {
    auto batch = mine_all(index);
    std::mt19937_64 rng(seed);
    std::shuffle(batch.positives.begin(), batch.positives.end(), rng);
    std::shuffle(batch.negatives.begin(), batch.negatives.end(), rng);
    const std::size_t g = std::min(batch.positives.size(), batch.negatives.size());
    batch.positives.resize(g);
    batch.negatives.resize(g);
    return batch;
  }

  RetrievalSummary retrieval(const HashIndex& index) const {
    const std::size_t n = data_.size();
    std::vector<double> recall(n, 0.0), sizes(n, 0.0);
    parallel_for(n, cfg_.threads, [&](std::size_t begin, std::size_t end) {
      QueryScratch scratch;
      std::vector<NeuronId> ids;
      for (std::size_t i = begin; i < end; ++i) {
        index.query(queries_.row(i), scratch, ids);
        const auto& labels = data_.examples[i].labels;
        std::size_t hits = 0;
        for (ClassId y : labels) hits += std::binary_search(ids.begin(), ids.end(), y);
        recall[i] = labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
        sizes[i] = static_cast<double>(ids.size());
      }
    });
    return {pairwise_mean(recall), pairwise_mean(sizes)};
  }

  /// Every (query, label) pair above t1, regardless of retrieval.
  std::vector<TrainingPair> label_pairs_above_t1() const {
    std::vector<TrainingPair> out;
    for (std::size_t i = 0; i < data_.size(); ++i) {
      for (ClassId y : data_.examples[i].labels) {
        if (neuron_logit<float>(model_, queries_.row(i), y) > t1_[i]) {
          out.push_back({static_cast<std::uint32_t>(i), y});
        }
      }
    }
    return out;
  }

  /// Mean fraction of tables where query and neuron keys coincide.
  double collision(const Family& family, std::span<const TrainingPair> pairs) const {
    std::vector<double> per(pairs.size());
    parallel_for(pairs.size(), cfg_.threads, [&](std::size_t begin, std::size_t end) {
      std::vector<HashKey> kq(family.tables), kn(family.tables);
      for (std::size_t i = begin; i < end; ++i) {
        hash_into<float>(family, queries_.row(pairs[i].query), 0.0f, kq);
        hash_into<float>(family, model_.W.row(pairs[i].neuron), model_.b[pairs[i].neuron], kn);
        per[i] = static_cast<double>(key_matches(kq, kn)) / static_cast<double>(family.tables);
      }
    });
    return pairwise_mean(per);
  }

 private:
  const Model& model_;
  const SparseDataset& data_;
  IulConfig cfg_;
  Matrix<float> queries_;
  std::vector<double> t1_, t2_;
};

/// One mining pass against the index with the config seed.
inline PairBatch collect_pairs(const HashIndex& index, const Model& model, const SparseDataset& data,
                               const IulConfig& cfg) {
  return PairMiner(model, data, cfg).mine(index, cfg.seed);
}

struct RoundLog {
  std::size_t round = 0;
  std::size_t positives = 0;  // |P+| before balancing
  std::size_t negatives = 0;  // |P-| before balancing
  std::size_t g = 0;
  double loss = 0.0;  // mean IUL per balanced pair after the round's update
  double pos_collision = 0.0;
  double neg_collision = 0.0;
  double label_recall = 0.0;
  double mean_sample_size = 0.0;
};

inline std::string round_log_header() {
  return "round,|P+|,|P-|,g,loss,pos_collision,neg_collision,label_recall,mean_sample_size";
}

inline std::string round_log_row(const RoundLog& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.round << ',' << r.positives << ',' << r.negatives << ',' << r.g << ',' << r.loss << ','
     << r.pos_collision << ',' << r.neg_collision << ',' << r.label_recall << ',' << r.mean_sample_size;
  return os.str();
}

struct PreprocessResult {
  HashIndex index;
  std::vector<RoundLog> rounds;
  // Collision probes and retrieval under the initial family.
  double init_pos_collision = 0.0;
  double init_neg_collision = 0.0;
  double init_label_recall = 0.0;
  double init_mean_sample_size = 0.0;

  const Family& family() const noexcept { return index.family(); }
};

/// Runs cfg.rounds of mine -> SGD -> rebuild. Collision probabilities are
/// measured on two fixed probe sets chosen before the first round: every
/// (query, label) pair above t1 and the negatives mined from the initial
/// index, each subsampled to cfg.diagnostic_pairs.
inline PreprocessResult preprocess(const HashIndex& index, const Model& model, const SparseDataset& train,
                                   const IulConfig& cfg, const std::function<void(const RoundLog&)>& on_round = {}) {
  cfg.validate();
  require(index.neuron_count() == model.classes() && index.family().hidden() == model.hidden(), ErrorKind::data,
          "preprocess: index does not match the model's output layer");
  const PairMiner miner(model, train, cfg);

  std::mt19937_64 probe_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  auto pos_probe = miner.label_pairs_above_t1();
  auto neg_probe = miner.mine_all(index).negatives;
  for (auto* probe : {&pos_probe, &neg_probe}) {
    std::shuffle(probe->begin(), probe->end(), probe_rng);
    if (probe->size() > cfg.diagnostic_pairs) probe->resize(cfg.diagnostic_pairs);
  }

  PreprocessResult result;
  result.index = index;
  result.init_pos_collision = miner.collision(index.family(), pos_probe);
  result.init_neg_collision = miner.collision(index.family(), neg_probe);
  const auto init = miner.retrieval(index);
  result.init_label_recall = init.label_recall;
  result.init_mean_sample_size = init.mean_sample_size;

  auto theta = index.family().cast<double>();
  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    const auto batch = miner.mine(result.index, cfg.seed + round);
    RoundLog log{round, batch.positives_found, batch.negatives_found, batch.g()};

    if (batch.g() > 0) {
      std::vector<std::pair<TrainingPair, bool>> pairs;
      for (const auto& p : batch.positives) pairs.emplace_back(p, true);
      for (const auto& p : batch.negatives) pairs.emplace_back(p, false);
      std::mt19937_64 rng(cfg.seed * 1000003ULL + round);
      detail::PairWork<double> work;
      Matrix<double> grad(theta.theta.rows(), theta.theta.cols());
      for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        for (std::size_t start = 0; start < pairs.size(); start += cfg.minibatch) {
          const std::size_t end = std::min(pairs.size(), start + cfg.minibatch);
          std::fill(grad.flat().begin(), grad.flat().end(), 0.0);
          double loss = 0.0;
          for (std::size_t i = start; i < end; ++i) {
            const auto& [p, positive] = pairs[i];
            loss += detail::pair_loss<double>(theta, batch.queries.row(p.query), model.W.row(p.neuron),
                                              model.b[p.neuron], positive, cfg.point_norm, &grad, 1.0, work);
          }
          if (!std::isfinite(loss) || !all_finite(grad.flat())) {
            fail(ErrorKind::numeric, "preprocess: round " + std::to_string(round) + " epoch " +
                                         std::to_string(epoch + 1) + ": IUL loss became non-finite");
          }
          const double step = cfg.lr / static_cast<double>(end - start);
          auto t = theta.theta.flat();
          const auto gr = grad.flat();
          for (std::size_t j = 0; j < t.size(); ++j) t[j] -= step * gr[j];
        }
      }
      log.loss = iul_loss<double>(theta, batch, model.W, model.b, cfg.point_norm) / static_cast<double>(2 * batch.g());
      require(std::isfinite(log.loss), ErrorKind::numeric,
              "preprocess: round " + std::to_string(round) + ": IUL loss became non-finite");
      result.index = rebuild(result.index, theta.cast<float>(), model.W, model.b, cfg.threads);
    }

    log.pos_collision = miner.collision(result.index.family(), pos_probe);
    log.neg_collision = miner.collision(result.index.family(), neg_probe);
    const auto summary = miner.retrieval(result.index);
    log.label_recall = summary.label_recall;
    log.mean_sample_size = summary.mean_sample_size;
    result.rounds.push_back(log);
    if (on_round) on_round(log);
  }
  return result;
}

}  // namespace lss
