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

#include <functional>
#include <numeric>
#include <random>

#include "lss/dataset.hpp"

namespace lss {

enum class LossKind { softmax, sigmoid };

/// One-hidden-layer network: q = relu(E^T x), logits z = W q + b.
/// Row i of W together with b[i] is output neuron i.
template <std::floating_point Real>
struct BaseModel {
  Matrix<Real> E;  // input_dim x hidden
  Matrix<Real> W;  // classes x hidden
  std::vector<Real> b;

  std::size_t input_dim() const noexcept { return E.rows(); }
  std::size_t hidden() const noexcept { return E.cols(); }
  std::size_t classes() const noexcept { return W.rows(); }

  template <std::floating_point Other>
  BaseModel<Other> cast() const {
    BaseModel<Other> out{E.template cast<Other>(), W.template cast<Other>(), {}};
    out.b.assign(b.begin(), b.end());
    return out;
  }

  bool operator==(const BaseModel&) const = default;
};

using Model = BaseModel<float>;

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; fan_in is input_dim
/// for E and hidden for W and b.
inline Model init_model(std::size_t input_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  require(input_dim > 0 && hidden > 0 && classes > 0, ErrorKind::usage, "model dimensions must be positive");
  std::mt19937_64 rng(seed);
  Model m{Matrix<float>(input_dim, hidden), Matrix<float>(classes, hidden), std::vector<float>(classes)};
  const auto fill = [&rng](std::span<float> v, std::size_t fan_in) {
    const float a = 1.0f / std::sqrt(static_cast<float>(fan_in));
    std::uniform_real_distribution<float> u(-a, a);
    for (auto& x : v) x = u(rng);
  };
  fill(m.E.flat(), input_dim);
  fill(m.W.flat(), hidden);
  fill(m.b, hidden);
  return m;
}

/// Writes relu(E^T x) into q; pre receives the pre-activation when given.
template <std::floating_point Real>
void embed_into(const BaseModel<Real>& model, const SparseVector& x, std::span<Real> q,
                std::span<Real> pre = {}) {
  if (x.dim != model.input_dim()) {
    fail(ErrorKind::data, "embed: input dim " + std::to_string(x.dim) + " != model input dim " +
                              std::to_string(model.input_dim()));
  }
  std::fill(q.begin(), q.end(), Real(0));
  for (std::size_t t = 0; t < x.nnz(); ++t) {
    const auto row = model.E.row(x.indices[t]);
    const Real v = static_cast<Real>(x.values[t]);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] += v * row[j];
  }
  if (!pre.empty()) std::copy(q.begin(), q.end(), pre.begin());
  for (auto& v : q) v = std::max(v, Real(0));
}

template <std::floating_point Real>
std::vector<Real> embed(const BaseModel<Real>& model, const SparseVector& x) {
  std::vector<Real> q(model.hidden());
  embed_into<Real>(model, x, q);
  return q;
}

template <std::floating_point Real>
inline Real neuron_logit(const BaseModel<Real>& model, std::span<const Real> q, std::size_t i) {
  return inner<Real>(model.W.row(i), q) + model.b[i];
}

template <std::floating_point Real>
void logits_into(const BaseModel<Real>& model, std::span<const Real> q, std::span<Real> z) {
  require(q.size() == model.hidden(), ErrorKind::data, "full_logits: embedding width mismatch");
  for (std::size_t i = 0; i < model.classes(); ++i) z[i] = neuron_logit(model, q, i);
}

/// z_i = q . w_i + b_i for every neuron; no activation applied.
template <std::floating_point Real>
std::vector<Real> full_logits(const BaseModel<Real>& model, std::span<const Real> q) {
  std::vector<Real> z(model.classes());
  logits_into<Real>(model, q, z);
  return z;
}

/// Index of the largest value, lowest index on ties.
template <std::floating_point Real>
std::size_t argmax(std::span<const Real> z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  return best;
}

/// Gradient storage. dE is dense but rows are tracked so clearing and the
/// SGD update only touch rows hit by the batch's features.
template <std::floating_point Real>
struct Gradients {
  Matrix<Real> dE;
  Matrix<Real> dW;
  std::vector<Real> db;
  std::vector<FeatureId> touched;
  std::vector<char> is_touched;

  explicit Gradients(const BaseModel<Real>& m)
      : dE(m.input_dim(), m.hidden()), dW(m.classes(), m.hidden()), db(m.classes()),
        is_touched(m.input_dim(), 0) {}

  void clear() {
    for (auto f : touched) {
      auto r = dE.row(f);
      std::fill(r.begin(), r.end(), Real(0));
      is_touched[f] = 0;
    }
    touched.clear();
    std::fill(dW.flat().begin(), dW.flat().end(), Real(0));
    std::fill(db.begin(), db.end(), Real(0));
  }
};

/// Training loss of one example. Softmax: cross-entropy against the uniform
/// distribution over the label set. Sigmoid: summed binary cross-entropy.
template <std::floating_point Real>
Real example_loss(const BaseModel<Real>& model, const LabeledExample& ex, LossKind kind) {
  const auto q = embed(model, ex.features);
  const auto z = full_logits<Real>(model, q);
  if (kind == LossKind::softmax) {
    const Real zmax = *std::max_element(z.begin(), z.end());
    Real sum = 0;
    for (Real v : z) sum += std::exp(v - zmax);
    const Real lse = zmax + std::log(sum);
    Real loss = 0;
    for (ClassId c : ex.labels) loss += lse - z[c];
    return loss / static_cast<Real>(ex.labels.size());
  }
  Real loss = 0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    loss += static_cast<Real>(softplus(static_cast<double>(z[c])));
    if (ex.has_label(static_cast<ClassId>(c))) loss -= z[c];
  }
  return loss;
}

/// Adds scale * d(loss)/d(params) into g and returns the example loss.
template <std::floating_point Real>
Real accumulate_gradient(const BaseModel<Real>& model, const LabeledExample& ex, LossKind kind,
                         Gradients<Real>& g, Real scale = Real(1)) {
  const std::size_t h = model.hidden();
  const std::size_t m = model.classes();
  std::vector<Real> q(h), pre(h), z(m), dz(m);
  embed_into<Real>(model, ex.features, q, pre);
  logits_into<Real>(model, q, z);

  Real loss = 0;
  if (kind == LossKind::softmax) {
    const Real zmax = *std::max_element(z.begin(), z.end());
    Real sum = 0;
    for (std::size_t i = 0; i < m; ++i) {
      dz[i] = std::exp(z[i] - zmax);
      sum += dz[i];
    }
    const Real lse = zmax + std::log(sum);
    for (auto& v : dz) v /= sum;
    const Real share = Real(1) / static_cast<Real>(ex.labels.size());
    for (ClassId c : ex.labels) {
      dz[c] -= share;
      loss += share * (lse - z[c]);
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      const bool pos = ex.has_label(static_cast<ClassId>(i));
      dz[i] = static_cast<Real>(sigmoid(static_cast<double>(z[i]))) - (pos ? Real(1) : Real(0));
      loss += static_cast<Real>(softplus(static_cast<double>(z[i]))) - (pos ? z[i] : Real(0));
    }
  }

  std::vector<Real> dq(h, Real(0));
  for (std::size_t i = 0; i < m; ++i) {
    const Real d = dz[i];
    const auto w = model.W.row(i);
    auto gw = g.dW.row(i);
    for (std::size_t j = 0; j < h; ++j) {
      gw[j] += scale * d * q[j];
      dq[j] += d * w[j];
    }
    g.db[i] += scale * d;
  }
  for (std::size_t j = 0; j < h; ++j) {
    if (pre[j] <= Real(0)) dq[j] = Real(0);
  }
  for (std::size_t t = 0; t < ex.features.nnz(); ++t) {
    const FeatureId f = ex.features.indices[t];
    const Real v = static_cast<Real>(ex.features.values[t]);
    if (!g.is_touched[f]) {
      g.is_touched[f] = 1;
      g.touched.push_back(f);
    }
    auto ge = g.dE.row(f);
    for (std::size_t j = 0; j < h; ++j) ge[j] += scale * v * dq[j];
  }
  return loss;
}

struct TrainConfig {
  std::size_t hidden = 128;
  std::size_t epochs = 10;
  double lr = 0.5;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::softmax;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean per-example loss seen during the epoch
  double train_p1 = 0.0;  // P@1 of the end-of-epoch model on the training set
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> epochs;
};

/// Fraction of examples whose top logit (lowest id on ties) is a label.
inline double train_precision_at_1(const Model& model, const SparseDataset& ds, unsigned threads = 1) {
  if (ds.empty()) return 0.0;
  std::vector<char> hit(ds.size(), 0);
  parallel_for(ds.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<float> q(model.hidden()), z(model.classes());
    for (std::size_t i = begin; i < end; ++i) {
      embed_into<float>(model, ds.examples[i].features, q);
      logits_into<float>(model, q, z);
      hit[i] = ds.examples[i].has_label(static_cast<ClassId>(argmax<float>(z))) ? 1 : 0;
    }
  });
  return static_cast<double>(std::accumulate(hit.begin(), hit.end(), std::size_t{0})) /
         static_cast<double>(ds.size());
}

/// Mini-batch SGD on the mean batch loss. Deterministic given the seed.
inline TrainResult train(const SparseDataset& ds, const TrainConfig& cfg,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
  require(!ds.empty(), ErrorKind::data, "train: dataset is empty");
  require(cfg.batch >= 1, ErrorKind::usage, "train: batch must be >= 1");
  for (const auto& ex : ds.examples) {
    require(!ex.labels.empty(), ErrorKind::data, "train: example without labels");
  }
  TrainResult result{init_model(ds.input_dim, cfg.hidden, ds.num_classes, cfg.seed), {}};
  Model& model = result.model;
  Gradients<float> g(model);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> losses(ds.size());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      g.clear();
      double loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const double l = accumulate_gradient<float>(model, ds.examples[order[i]], cfg.loss, g);
        losses[order[i]] = l;
        loss += l;
      }
      if (!std::isfinite(loss)) {
        fail(ErrorKind::numeric, "train: loss became non-finite at epoch " + std::to_string(epoch) +
                                     ", batch starting at " + std::to_string(start) +
                                     " (try a smaller learning rate)");
      }
      const float step = static_cast<float>(cfg.lr / static_cast<double>(end - start));
      for (auto f : g.touched) {
        auto e = model.E.row(f);
        const auto d = g.dE.row(f);
        for (std::size_t j = 0; j < e.size(); ++j) e[j] -= step * d[j];
      }
      auto w = model.W.flat();
      const auto dw = g.dW.flat();
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * dw[j];
      for (std::size_t j = 0; j < model.b.size(); ++j) model.b[j] -= step * g.db[j];
    }
    EpochStats stats{epoch, pairwise_mean(losses), train_precision_at_1(model, ds, default_threads())};
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

/// Largest relative error between analytic and central-difference gradients
/// (step 1e-4, double precision) over every entry of E, W and b. Relative
/// error is |a - n| / max(|a|, |n|, 1e-6).
inline double grad_check(const Model& model, const LabeledExample& ex, LossKind kind = LossKind::softmax) {
  auto m = model.cast<double>();
  Gradients<double> g(m);
  accumulate_gradient<double>(m, ex, kind, g);
  constexpr double step = 1e-4;
  double worst = 0.0;
  const auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + step;
    const double up = example_loss<double>(m, ex, kind);
    param = saved - step;
    const double down = example_loss<double>(m, ex, kind);
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t i = 0; i < m.E.size(); ++i) probe(m.E.flat()[i], g.dE.flat()[i]);
  for (std::size_t i = 0; i < m.W.size(); ++i) probe(m.W.flat()[i], g.dW.flat()[i]);
  for (std::size_t i = 0; i < m.b.size(); ++i) probe(m.b[i], g.db[i]);
  return worst;
}

inline constexpr std::uint32_t kModelVersion = 1;

inline void write_model(io::Writer& w, const Model& m) {
  w.magic("WOLM");
  w.u32(kModelVersion);
  w.u64(m.input_dim());
  w.u64(m.hidden());
  w.u64(m.classes());
  w.f32s(m.E.flat());
  w.f32s(m.W.flat());
  w.f32s(m.b);
}

inline Model read_model(io::Reader& r) {
  r.expect_magic("WOLM");
  r.expect_version(kModelVersion);
  const auto d = r.u64(), h = r.u64(), m = r.u64();
  require(d > 0 && h > 0 && m > 0, ErrorKind::data, r.origin() + ": zero model dimension");
  require(d * h + m * h + m <= r.remaining() / sizeof(float), ErrorKind::data, r.origin() + ": truncated file");
  Model model{Matrix<float>(d, h), Matrix<float>(m, h), std::vector<float>(m)};
  r.f32s(model.E.flat());
  r.f32s(model.W.flat());
  r.f32s(model.b);
  return model;
}

inline void save_model(const Model& m, const std::string& path) {
  io::Writer w;
  write_model(w, m);
  w.save(path);
}

inline Model load_model(const std::string& path) {
  auto r = io::Reader::open(path);
  return read_model(r);
}

}  // namespace lss
