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

#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace lss;
using Catch::Approx;

namespace {

/// Fraction of tables of a fresh family in which two unit vectors at the
/// given angle share their full key.
double empirical_collision(double angle, std::size_t K, std::size_t tables, std::uint64_t seed) {
  const auto f = init_random<double>(K, tables, 2, seed);
  const std::vector<double> a{1.0, 0.0, 0.0}, b{std::cos(angle), std::sin(angle), 0.0};
  const auto ka = hash_keys<double>(f, a), kb = hash_keys<double>(f, b);
  std::size_t same = 0;
  for (std::size_t l = 0; l < tables; ++l) same += ka[l] == kb[l];
  return static_cast<double>(same) / static_cast<double>(tables);
}

}  // namespace

TEST_CASE("init_random: shape, determinism, bounds", "[simhash]") {
  const auto f = init_random(4, 2, 3, 1);
  CHECK(f.theta.rows() == 8);
  CHECK(f.theta.cols() == 4);
  CHECK(f == init_random(4, 2, 3, 1));
  CHECK_FALSE(f == init_random(4, 2, 3, 2));
  CHECK_THROWS_AS(init_random(0, 2, 3, 1), Error);
  CHECK_THROWS_AS(init_random(31, 1, 3, 1), Error);
  CHECK_THROWS_AS(init_random(4, 0, 3, 1), Error);
  CHECK_NOTHROW(init_random(30, 1, 3, 1));
}

TEST_CASE("init_random: entries are centred", "[simhash]") {
  const auto f = init_random(25, 40, 999, 12);
  REQUIRE(f.theta.size() == 1000000);
  double sum = 0, sq = 0;
  for (float v : f.theta.flat()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  CHECK(std::abs(sum / 1e6) < 0.01);
  CHECK(sq / 1e6 == Approx(1.0).margin(0.01));
}

TEST_CASE("hash_keys: basis hyperplanes give the all-ones key", "[simhash]") {
  const std::size_t K = 5;
  Family f{K, 1, Matrix<float>(K, K + 1)};
  for (std::size_t j = 0; j < K; ++j) f.theta(j, j) = 1.0f;
  const std::vector<float> v{0.5f, 1, 2, 3, 4, 5};
  CHECK(hash_keys<float>(f, v) == std::vector<HashKey>{(1u << K) - 1});
  const std::vector<float> w{-0.5f, 1, -2, 3, 4, 5};
  CHECK(hash_keys<float>(f, w) == std::vector<HashKey>{0b11010});
  CHECK(hash_keys<float>(f, std::vector<float>(K + 1, 0.0f)) == std::vector<HashKey>{(1u << K) - 1});
  CHECK_THROWS_AS(hash_keys<float>(f, std::vector<float>(K, 1.0f)), Error);
}

TEST_CASE("hash_keys: per-bit oracle and positive scale invariance", "[simhash]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t K = 1 + trial % 12, L = 1 + trial % 5, h = 3 + trial % 9;
    const auto f = init_random(K, L, h, 500 + trial);
    const auto v = test::random_vector(h + 1, rng);
    const auto keys = hash_keys<float>(f, v);
    std::vector<double> vd(v.begin(), v.end());
    for (std::size_t l = 0; l < L; ++l) {
      CHECK(keys[l] < (HashKey{1} << K));
      CHECK(keys[l] == test::oracle_key(f, l, vd));
    }
    std::vector<float> twice(v);
    for (auto& x : twice) x *= 2.0f;
    CHECK(hash_keys<float>(f, twice) == keys);
    CHECK(hash_neuron<float>(f, std::span<const float>(v).first(h), v[h]) == keys);
  }
}

TEST_CASE("hash_query hashes [q, 0]", "[simhash]") {
  std::mt19937_64 rng(8);
  const auto f = init_random(6, 3, 10, 3);
  const auto q = test::random_vector(10, rng);
  CHECK(hash_query<float>(f, q) == hash_keys<float>(f, augment<float>(q, 0.0f)));
}

TEST_CASE("relaxed_codes: zero, saturation, sign agreement", "[simhash]") {
  const auto f = init_random(4, 3, 5, 2);
  const auto zero = relaxed_codes<float>(f, std::vector<float>(6, 0.0f));
  CHECK(std::all_of(zero.flat().begin(), zero.flat().end(), [](float c) { return c == 0.0f; }));

  std::mt19937_64 rng(11);
  auto big = test::random_vector(6, rng);
  for (auto& x : big) x *= 1e4f;
  const auto sat = relaxed_codes<float>(f, big);
  for (float c : sat.flat()) CHECK(std::abs(std::abs(c) - 1.0f) < 1e-6);

  std::size_t checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto v = test::random_vector(6, rng);
    const auto codes = relaxed_codes<float>(f, v);
    const auto keys = hash_keys<float>(f, v);
    for (std::size_t l = 0; l < 3; ++l) {
      for (std::size_t j = 0; j < 4; ++j) {
        const float c = codes(l, j);
        if (std::abs(c) < 1e-6f) continue;
        ++checked;
        CHECK((c > 0) == static_cast<bool>((keys[l] >> j) & 1u));
      }
    }
  }
  CHECK(checked > 11000);
}

TEST_CASE("analytic_collision closed form", "[simhash]") {
  for (std::size_t K : {1u, 3u, 30u}) CHECK(analytic_collision(0.0, K) == 1.0);
  CHECK(analytic_collision(std::numbers::pi / 2, 1) == Approx(0.5));
  CHECK(analytic_collision(std::numbers::pi / 3, 4) == Approx(std::pow(2.0 / 3.0, 4)));
  CHECK(analytic_collision(std::numbers::pi, 2) == 0.0);
  CHECK_THROWS_AS(analytic_collision(-0.1, 1), Error);
  CHECK_THROWS_AS(analytic_collision(4.0, 1), Error);
}

TEST_CASE("Monte Carlo collision frequency matches the closed form", "[simhash]") {
  CHECK(empirical_collision(std::numbers::pi / 3, 4, 100000, 99) ==
        Approx(analytic_collision(std::numbers::pi / 3, 4)).margin(0.01));
  for (std::size_t K : {1u, 2u, 4u}) {
    for (int a = 0; a < 10; ++a) {
      const double angle = std::numbers::pi * a / 9.0;
      const double p = analytic_collision(angle, K);
      const double emp = empirical_collision(angle, K, 20000, 1000 + 10 * K + a);
      CHECK(emp == Approx(p).margin(0.015));
    }
  }
}

TEST_CASE("family file round trip", "[simhash]") {
  test::TempDir dir;
  const auto f = init_random(7, 3, 9, 4);
  save_family(f, dir.file("f.bin"));
  CHECK(load_family(dir.file("f.bin")) == f);
  auto bytes = test::slurp(dir.file("f.bin"));
  bytes[1] = '?';
  std::ofstream(dir.file("bad.bin"), std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_family(dir.file("bad.bin")), Error);
}
