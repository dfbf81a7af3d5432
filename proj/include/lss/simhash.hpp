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

// Sign-of-projection hashing over the augmented space R^{h+1}. A neuron is
// hashed as [w_i, b_i] and a query as [q, 0]. Bit j of table l is
// sign(theta_{l*K + j} . v) with sign(0) = +1, packed little-endian into a
// K-bit key (bit 0 = first hyperplane of the table).

#pragma once

#include <numbers>
#include <random>

#include "lss/core.hpp"

namespace lss {

inline constexpr std::size_t kMaxBits = 30;

using HashKey = std::uint32_t;

template <std::floating_point Real>
struct HashFamily {
  std::size_t bits = 0;    // K
  std::size_t tables = 0;  // L
  Matrix<Real> theta;      // (K*L) x (h+1), row l*K + j is hyperplane j of table l

  std::size_t width() const noexcept { return theta.cols(); }
  std::size_t hidden() const noexcept { return theta.cols() - 1; }
  std::size_t buckets() const noexcept { return std::size_t{1} << bits; }

  template <std::floating_point Other>
  HashFamily<Other> cast() const {
    return {bits, tables, theta.template cast<Other>()};
  }

  bool operator==(const HashFamily&) const = default;
};

using Family = HashFamily<float>;

inline void check_family_shape(std::size_t K, std::size_t L, std::size_t h) {
  require(K >= 1 && K <= kMaxBits, ErrorKind::usage,
          "hash bits K must lie in [1, " + std::to_string(kMaxBits) + "], got " + std::to_string(K));
  require(L >= 1, ErrorKind::usage, "table count L must be >= 1");
  require(h >= 1, ErrorKind::usage, "hidden width must be >= 1");
}

/// Hyperplanes with i.i.d. N(0,1) entries from a seeded generator.
template <std::floating_point Real = float>
HashFamily<Real> init_random(std::size_t K, std::size_t L, std::size_t h, std::uint64_t seed) {
  check_family_shape(K, L, h);
  HashFamily<Real> f{K, L, Matrix<Real>(K * L, h + 1)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : f.theta.flat()) v = static_cast<Real>(normal(rng));
  return f;
}

/// Projection of [head, tail] onto hyperplane r.
template <std::floating_point Real>
inline Real project(const HashFamily<Real>& f, std::size_t r, std::span<const Real> head, Real tail) {
  const auto row = f.theta.row(r);
  return inner<Real>(row.first(head.size()), head) + row[head.size()] * tail;
}

/// Writes the L keys of [head, tail] into keys.
template <std::floating_point Real>
void hash_into(const HashFamily<Real>& f, std::span<const Real> head, Real tail, std::span<HashKey> keys) {
  if (head.size() + 1 != f.width()) {
    fail(ErrorKind::data, "hash: point width " + std::to_string(head.size() + 1) + " != family width " +
                              std::to_string(f.width()));
  }
  for (std::size_t l = 0; l < f.tables; ++l) {
    HashKey key = 0;
    for (std::size_t j = 0; j < f.bits; ++j) {
      if (project(f, l * f.bits + j, head, tail) >= Real(0)) key |= HashKey{1} << j;
    }
    keys[l] = key;
  }
}

/// Keys of a full augmented point v (length h+1).
template <std::floating_point Real>
std::vector<HashKey> hash_keys(const HashFamily<Real>& f, std::span<const Real> v) {
  if (v.size() != f.width()) {
    fail(ErrorKind::data, "hash_keys: point width " + std::to_string(v.size()) + " != family width " +
                              std::to_string(f.width()));
  }
  std::vector<HashKey> keys(f.tables);
  hash_into<Real>(f, v.first(v.size() - 1), v.back(), keys);
  return keys;
}

template <std::floating_point Real>
std::vector<HashKey> hash_neuron(const HashFamily<Real>& f, std::span<const Real> w, Real bias) {
  std::vector<HashKey> keys(f.tables);
  hash_into<Real>(f, w, bias, keys);
  return keys;
}

template <std::floating_point Real>
std::vector<HashKey> hash_query(const HashFamily<Real>& f, std::span<const Real> q) {
  std::vector<HashKey> keys(f.tables);
  hash_into<Real>(f, q, Real(0), keys);
  return keys;
}

template <std::floating_point Real>
std::vector<Real> augment(std::span<const Real> head, Real tail) {
  std::vector<Real> v(head.begin(), head.end());
  v.push_back(tail);
  return v;
}

/// tanh(theta . v) for every hyperplane, laid out as an L x K matrix.
template <std::floating_point Real>
Matrix<Real> relaxed_codes(const HashFamily<Real>& f, std::span<const Real> v) {
  require(v.size() == f.width(), ErrorKind::data, "relaxed_codes: point width mismatch");
  Matrix<Real> codes(f.tables, f.bits);
  const auto head = v.first(v.size() - 1);
  for (std::size_t r = 0; r < f.bits * f.tables; ++r) {
    codes.flat()[r] = std::tanh(project(f, r, head, v.back()));
  }
  return codes;
}

/// Probability that two points at the given angle share a full K-bit key
/// under Gaussian hyperplanes: (1 - angle/pi)^K.
inline double analytic_collision(double angle, std::size_t K) {
  require(angle >= 0.0 && angle <= std::numbers::pi, ErrorKind::usage, "analytic_collision: angle outside [0, pi]");
  return std::pow(1.0 - angle / std::numbers::pi, static_cast<double>(K));
}

inline constexpr std::uint32_t kFamilyVersion = 1;

inline void write_family(io::Writer& w, const Family& f) {
  w.magic("WOLH");
  w.u32(kFamilyVersion);
  w.u64(f.bits);
  w.u64(f.tables);
  w.u64(f.hidden());
  w.f32s(f.theta.flat());
}

inline Family read_family(io::Reader& r) {
  r.expect_magic("WOLH");
  r.expect_version(kFamilyVersion);
  const auto K = r.u64(), L = r.u64(), h = r.u64();
  require(K >= 1 && K <= kMaxBits && L >= 1 && h >= 1, ErrorKind::data, r.origin() + ": invalid family shape");
  require(K * L * (h + 1) <= r.remaining() / sizeof(float), ErrorKind::data, r.origin() + ": truncated file");
  Family f{K, L, Matrix<float>(K * L, h + 1)};
  r.f32s(f.theta.flat());
  return f;
}

inline void save_family(const Family& f, const std::string& path) {
  io::Writer w;
  write_family(w, f);
  w.save(path);
}

inline Family load_family(const std::string& path) {
  auto r = io::Reader::open(path);
  return read_family(r);
}

}  // namespace lss
