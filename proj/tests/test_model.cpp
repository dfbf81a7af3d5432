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

LabeledExample random_example(std::size_t d_in, std::size_t m, std::size_t labels, std::mt19937_64& rng) {
  LabeledExample ex;
  ex.features = test::random_sparse(d_in, 3, rng);
  std::uniform_int_distribution<ClassId> pick(0, static_cast<ClassId>(m - 1));
  while (ex.labels.size() < labels) {
    const auto c = pick(rng);
    if (!ex.has_label(c)) ex.labels.insert(std::upper_bound(ex.labels.begin(), ex.labels.end(), c), c);
  }
  return ex;
}

}  // namespace

TEST_CASE("embed: identity rows and zero input", "[model]") {
  Model m = init_model(2, 2, 1, 0);
  m.E(0, 0) = 1.0f;
  m.E(0, 1) = -2.0f;
  m.E(1, 0) = 0.0f;
  m.E(1, 1) = 1.0f;
  SparseVector x{{0}, {1.0f}, 2};
  CHECK(embed(m, x) == std::vector<float>{1.0f, 0.0f});
  CHECK(embed(m, SparseVector{{}, {}, 2}) == std::vector<float>{0.0f, 0.0f});
  CHECK_THROWS_AS(embed(m, SparseVector{{}, {}, 3}), Error);
}

TEST_CASE("embed: dense matmul oracle", "[model]") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = test::random_model(40, 24, 5, 100 + trial);
    const auto x = test::random_sparse(40, 9, rng);
    std::vector<double> dense(40, 0.0);
    for (std::size_t t = 0; t < x.nnz(); ++t) dense[x.indices[t]] = x.values[t];
    const auto q = embed(m, x);
    for (std::size_t j = 0; j < 24; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < 40; ++i) s += dense[i] * m.E(i, j);
      CHECK(q[j] == Approx(std::max(s, 0.0)).margin(1e-6).epsilon(1e-6));
    }
  }
}

TEST_CASE("full_logits: hand cases and double-loop oracle", "[model]") {
  Model m = init_model(1, 2, 2, 0);
  m.W(0, 0) = 1;
  m.W(0, 1) = 0;
  m.W(1, 0) = 0;
  m.W(1, 1) = 1;
  m.b = {0, 0};
  const std::vector<float> q{3, 5};
  CHECK(full_logits<float>(m, q) == std::vector<float>{3, 5});
  m.b = {0.25f, -1.5f};
  CHECK(full_logits<float>(m, std::vector<float>{0, 0}) == m.b);

  std::mt19937_64 rng(2);
  for (std::size_t h : {1u, 7u, 8u, 16u, 33u}) {
    const auto model = test::random_model(4, h, 50, h, 0.5);
    const auto qq = test::random_vector(h, rng, 0.5);
    const auto z = full_logits<float>(model, qq);
    const auto ref = test::oracle_logits(model, qq);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == Approx(ref[i]).margin(1e-6).epsilon(1e-6));
  }
}

TEST_CASE("argmax breaks ties toward the lower index", "[model]") {
  CHECK(argmax<float>(std::vector<float>{1, 3, 3, 2}) == 1);
  CHECK(argmax<float>(std::vector<float>{-1}) == 0);
}

TEST_CASE("ranking is invariant under sigmoid and softmax", "[model]") {
  std::mt19937_64 rng(4);
  const auto z = test::random_vector(200, rng, 3.0);
  std::vector<double> sig(z.size()), soft(z.size());
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0;
  for (float v : z) sum += std::exp(v - zmax);
  for (std::size_t i = 0; i < z.size(); ++i) {
    sig[i] = sigmoid(z[i]);
    soft[i] = std::exp(z[i] - zmax) / sum;
  }
  const auto order = [](const auto& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
    return idx;
  };
  CHECK(order(z) == order(sig));
  CHECK(order(z) == order(soft));
}

TEST_CASE("grad_check: analytic gradients agree with finite differences", "[model]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    const auto m = test::random_model(6, 4, 3, 200 + trial);
    const auto ex = random_example(6, 3, 1 + trial % 2, rng);
    CHECK(grad_check(m, ex, LossKind::softmax) < 1e-4);
    CHECK(grad_check(m, ex, LossKind::sigmoid) < 1e-4);
  }
}

TEST_CASE("grad_check: deterministic; zero input gives zero embedding gradient", "[model]") {
  std::mt19937_64 rng(9);
  const auto m = test::random_model(6, 4, 3, 7);
  const auto ex = random_example(6, 3, 1, rng);
  CHECK(grad_check(m, ex) == grad_check(m, ex));

  LabeledExample zero{{{}, {}, 6}, {1}};
  Gradients<float> g(m);
  accumulate_gradient<float>(m, zero, LossKind::softmax, g);
  CHECK(std::all_of(g.dE.flat().begin(), g.dE.flat().end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("train: noise-free planted data reaches P@1 >= 0.99", "[model]") {
  const auto ds = generate_synthetic({16, 64, 512, 1, 0.0, 3});
  const auto result = train(ds, {32, 20, 1.0, 32, 1, LossKind::softmax});
  REQUIRE(result.epochs.size() == 20);
  CHECK(result.epochs.back().train_p1 >= 0.99);
  CHECK(train_precision_at_1(result.model, ds) >= 0.99);
}

TEST_CASE("train: lr = 0 leaves parameters at their initial values", "[model]") {
  const auto ds = generate_synthetic({8, 32, 64, 2, 0.1, 3});
  const auto result = train(ds, {8, 3, 0.0, 16, 5, LossKind::softmax});
  CHECK(result.model == init_model(32, 8, 8, 5));
  CHECK(result.epochs[0].loss == result.epochs[2].loss);
}

TEST_CASE("train: a single example is overfit", "[model]") {
  SparseDataset ds;
  ds.input_dim = 10;
  ds.num_classes = 6;
  ds.examples.push_back({{{1, 4, 7}, {1.0f, 0.5f, 2.0f}, 10}, {4}});
  const auto result = train(ds, {8, 200, 0.1, 1, 3, LossKind::softmax});
  const auto q = embed(result.model, ds.examples[0].features);
  CHECK(argmax<float>(full_logits<float>(result.model, q)) == 4);
}

TEST_CASE("train: deterministic given the seed; sigmoid loss trains too", "[model]") {
  const auto ds = generate_synthetic({8, 32, 96, 2, 0.2, 6});
  const TrainConfig cfg{8, 4, 0.5, 8, 2, LossKind::sigmoid};
  const auto a = train(ds, cfg), b = train(ds, cfg);
  CHECK(a.model == b.model);
  CHECK(a.epochs.back().loss < a.epochs.front().loss);
}

TEST_CASE("train: divergence is a numeric error", "[model]") {
  const auto ds = generate_synthetic({8, 32, 64, 1, 0.0, 3});
  try {
    train(ds, {8, 5, 1e30, 8, 1, LossKind::softmax});
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
  }
}

TEST_CASE("model file round trip and corruption", "[model]") {
  test::TempDir dir;
  const auto m = test::random_model(7, 5, 11, 3);
  save_model(m, dir.file("m.bin"));
  CHECK(load_model(dir.file("m.bin")) == m);

  auto bytes = test::slurp(dir.file("m.bin"));
  const auto write = [&](const std::string& b) {
    std::ofstream(dir.file("bad.bin"), std::ios::binary) << b;
    return dir.file("bad.bin");
  };
  const auto expect_data_error = [&](const std::string& b, const std::string& part) {
    try {
      load_model(write(b));
      FAIL("expected a data error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::data);
      CHECK(std::string(e.what()).find(part) != std::string::npos);
    }
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_data_error(bad_magic, "bad magic");
  auto bad_version = bytes;
  const std::uint32_t v999 = 999;
  std::memcpy(bad_version.data() + 4, &v999, 4);
  expect_data_error(bad_version, "unsupported version");
  expect_data_error(bytes.substr(0, bytes.size() - 3), "truncated");
}
