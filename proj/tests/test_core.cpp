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

#include <numeric>

#include "support.hpp"

using namespace lss;

TEST_CASE("pairwise_sum agrees with a long double accumulation", "[core]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 100u, 4097u}) {
    std::vector<double> v(n);
    long double ref = 0;
    for (auto& x : v) {
      x = u(rng);
      ref += x;
    }
    CHECK(pairwise_sum(v) == Catch::Approx(static_cast<double>(ref)).margin(1e-8));
  }
  CHECK(pairwise_mean(std::vector<double>{}) == 0.0);
}

TEST_CASE("parallel_for visits every index exactly once", "[core]") {
  for (std::size_t n : {0u, 1u, 5u, 1000u}) {
    for (unsigned t : {1u, 2u, 3u, 8u, 64u}) {
      std::vector<int> hits(n, 0);
      parallel_for(n, t, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) ++hits[i];
      });
      CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
  }
}

TEST_CASE("default_threads honours LSS_THREADS", "[core]") {
  ::setenv("LSS_THREADS", "3", 1);
  CHECK(default_threads() == 3u);
  ::setenv("LSS_THREADS", "junk", 1);
  CHECK(default_threads() >= 1u);
  ::unsetenv("LSS_THREADS");
  CHECK(default_threads() >= 1u);
}

TEST_CASE("stable sigmoid and softplus", "[core]") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(softplus(0.0) == Catch::Approx(std::log(2.0)));
  CHECK(softplus(800.0) == Catch::Approx(800.0));
  CHECK(std::isfinite(softplus(-800.0)));
  for (double x : {-5.0, -0.3, 0.7, 4.0}) CHECK(softplus(x) == Catch::Approx(std::log1p(std::exp(x))));
}

TEST_CASE("dot_f32 matches a double reference", "[core]") {
  std::mt19937_64 rng(5);
  for (std::size_t n : {0u, 3u, 8u, 13u, 128u}) {
    const auto a = test::random_vector(n, rng), b = test::random_vector(n, rng);
    double ref = 0;
    for (std::size_t i = 0; i < n; ++i) ref += static_cast<double>(a[i]) * b[i];
    CHECK(dot_f32(a.data(), b.data(), n) == Catch::Approx(ref).margin(1e-4));
  }
}

TEST_CASE("reader reports truncation as a data error", "[core]") {
  io::Writer w;
  w.magic("ABCD");
  w.u32(7);
  io::Reader r(w.buffer());
  r.expect_magic("ABCD");
  CHECK(r.u32() == 7u);
  try {
    r.u64();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(e.exit_code() == 3);
  }
  io::Reader bad(w.buffer());
  CHECK_THROWS_AS(bad.expect_magic("WXYZ"), Error);
  CHECK_THROWS_AS(io::Reader::open("/nonexistent/file.bin"), Error);
}
