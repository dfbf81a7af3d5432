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

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

namespace lss {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

/// Error category; maps one-to-one onto CLI exit codes.
enum class ErrorKind { usage = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string_view what) { throw Error(kind, std::string(what)); }

/// Throws when ok is false. Messages built by concatenation are evaluated
/// eagerly, so hot paths test first and call fail() instead.
inline void require(bool ok, ErrorKind kind, std::string_view what) {
  if (!ok) fail(kind, what);
}

using NeuronId = std::uint32_t;
using ClassId = std::uint32_t;
using FeatureId = std::uint32_t;

/// Dense row-major matrix. Rows are exposed as spans.
template <std::floating_point Real>
class Matrix {
 public:
  using value_type = Real;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = Real(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<Real> flat() { return data_; }
  std::span<const Real> flat() const { return data_; }

  template <std::floating_point Other>
  Matrix<Other> cast() const {
    Matrix<Other> out(rows_, cols_);
    std::transform(data_.begin(), data_.end(), out.flat().begin(),
                   [](Real v) { return static_cast<Other>(v); });
    return out;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

/// Float inner product with eight independent accumulators so the loop
/// vectorizes without reassociation flags. Summation order is fixed.
inline float dot_f32(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

/// Inner product used for every logit and projection. Float goes through
/// dot_f32; other types accumulate in their own precision.
template <std::floating_point Real>
inline Real inner(std::span<const Real> a, std::span<const Real> b) {
  if constexpr (std::is_same_v<Real, float>) {
    return dot_f32(a.data(), b.data(), a.size());
  } else {
    Real s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
}

/// Pairwise (cascade) summation; fixed reduction order for any input.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_mean(std::span<const double> v) {
  return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

inline bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Thread count from LSS_THREADS, falling back to the machine's core count.
inline unsigned default_threads() {
  if (const char* env = std::getenv("LSS_THREADS"); env != nullptr && *env != '\0') {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs body(begin, end) over [0, n) split into contiguous chunks.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    if (begin == end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& th : pool) th.join();
}

namespace io {

/// Little-endian binary writer over a byte buffer.
class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f32s(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }
  void u32s(std::span<const std::uint32_t> v) { bytes(v.data(), v.size_bytes()); }

  const std::vector<char>& buffer() const { return buf_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::usage, "cannot open for writing: " + path);
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    require(static_cast<bool>(out), ErrorKind::data, "write failed: " + path);
  }

 private:
  std::vector<char> buf_;
};

/// Bounds-checked little-endian reader; truncation is a data error.
class Reader {
 public:
  explicit Reader(std::vector<char> buf, std::string origin = "buffer")
      : buf_(std::move(buf)), origin_(std::move(origin)) {}

  static Reader open(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::usage, "cannot open: " + path);
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(buf), path);
  }

  void bytes(void* p, std::size_t n) {
    require(n <= remaining(), ErrorKind::data, origin_ + ": truncated file");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    bytes(got.data(), got.size());
    require(got == m, ErrorKind::data, origin_ + ": bad magic (expected " + std::string(m) + ")");
  }
  void expect_version(std::uint32_t supported) {
    const std::uint32_t v = u32();
    require(v == supported, ErrorKind::data,
            origin_ + ": unsupported version " + std::to_string(v));
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  /// Reads count floats after checking the count against what is left.
  void f32s(std::span<float> out) {
    require(out.size() <= remaining() / sizeof(float), ErrorKind::data, origin_ + ": truncated file");
    bytes(out.data(), out.size_bytes());
  }
  void u32s(std::span<std::uint32_t> out) {
    require(out.size() <= remaining() / sizeof(std::uint32_t), ErrorKind::data,
            origin_ + ": truncated file");
    bytes(out.data(), out.size_bytes());
  }

  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::string& origin() const { return origin_; }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::string origin_;
};

}  // namespace io
}  // namespace lss
