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

// Shared fixtures and independent reference implementations for the tests.
// The oracles here are written from the definitions, deliberately without
// reusing the library's kernels.

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <set>

#include "lss/lss.hpp"

namespace lss::test {

inline Model random_model(std::size_t d_in, std::size_t h, std::size_t m, std::uint64_t seed, double scale = 1.0) {
  Model model = init_model(d_in, h, m, seed);
  std::mt19937_64 rng(seed + 17);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto v : {model.E.flat(), model.W.flat()}) {
    for (auto& x : v) x = static_cast<float>(normal(rng));
  }
  for (auto& x : model.b) x = static_cast<float>(normal(rng));
  return model;
}

inline std::vector<float> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(normal(rng));
  return v;
}

inline SparseVector random_sparse(std::size_t dim, std::size_t nnz, std::mt19937_64& rng) {
  std::set<FeatureId> ids;
  std::uniform_int_distribution<std::size_t> pick(0, dim - 1);
  while (ids.size() < std::min(nnz, dim)) ids.insert(static_cast<FeatureId>(pick(rng)));
  std::uniform_real_distribution<float> val(0.1f, 2.0f);
  SparseVector x;
  x.dim = dim;
  for (auto id : ids) {
    x.indices.push_back(id);
    x.values.push_back(val(rng));
  }
  return x;
}

/// Key of one table computed bit by bit from the definition.
inline std::uint64_t oracle_key(const Family& f, std::size_t table, const std::vector<double>& v) {
  std::uint64_t key = 0;
  for (std::size_t j = 0; j < f.bits; ++j) {
    const auto row = f.theta.row(table * f.bits + j);
    double s = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c) s += static_cast<double>(row[c]) * v[c];
    if (s >= 0.0) key |= std::uint64_t{1} << j;
  }
  return key;
}

inline std::vector<double> neuron_point(const Model& m, std::size_t i) {
  std::vector<double> v(m.W.row(i).begin(), m.W.row(i).end());
  v.push_back(m.b[i]);
  return v;
}

inline std::vector<double> query_point(std::span<const float> q) {
  std::vector<double> v(q.begin(), q.end());
  v.push_back(0.0);
  return v;
}

/// Brute-force retrieval: every neuron sharing a key with q in some table.
inline std::vector<NeuronId> oracle_query(const Family& f, const Matrix<float>& W, std::span<const float> b,
                                          std::span<const float> q) {
  std::vector<NeuronId> out;
  const auto vq = query_point(q);
  for (std::size_t i = 0; i < W.rows(); ++i) {
    std::vector<double> vn(W.row(i).begin(), W.row(i).end());
    vn.push_back(b[i]);
    for (std::size_t l = 0; l < f.tables; ++l) {
      if (oracle_key(f, l, vn) == oracle_key(f, l, vq)) {
        out.push_back(static_cast<NeuronId>(i));
        break;
      }
    }
  }
  return out;
}

/// Logits by a plain double loop.
inline std::vector<double> oracle_logits(const Model& m, std::span<const float> q) {
  std::vector<double> z(m.classes());
  for (std::size_t i = 0; i < m.classes(); ++i) {
    double s = m.b[i];
    for (std::size_t j = 0; j < m.hidden(); ++j) s += static_cast<double>(m.W(i, j)) * q[j];
    z[i] = s;
  }
  return z;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lss_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace lss::test
