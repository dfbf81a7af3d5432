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

#include "lss/simhash.hpp"

namespace lss {

/// Deduplicated neuron ids, ascending.
struct RetrievedSet {
  std::vector<NeuronId> ids;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
  bool contains(NeuronId id) const { return std::binary_search(ids.begin(), ids.end(), id); }
  bool operator==(const RetrievedSet&) const = default;
};

/// Per-query working memory for the bucket union. One per thread.
struct QueryScratch {
  std::vector<std::uint32_t> stamp;
  std::uint32_t epoch = 0;
  std::vector<HashKey> keys;

  void prepare(std::size_t m, std::size_t tables) {
    if (stamp.size() != m) {
      stamp.assign(m, 0);
      epoch = 0;
    }
    keys.resize(tables);
    if (++epoch == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      epoch = 1;
    }
  }
};

/// L tables of 2^K buckets holding neuron ids. Storage is CSR per table:
/// offsets[l][key] .. offsets[l][key+1] index into that table's id block,
/// and ids inside a bucket are ascending. Immutable once built.
class HashIndex {
 public:
  HashIndex() = default;

  const Family& family() const noexcept { return family_; }
  std::size_t neuron_count() const noexcept { return neurons_; }
  std::size_t bits() const noexcept { return family_.bits; }
  std::size_t tables() const noexcept { return family_.tables; }
  std::size_t buckets() const noexcept { return family_.buckets(); }

  std::span<const NeuronId> bucket(std::size_t table, HashKey key) const {
    const auto* off = offsets_.data() + table * (buckets() + 1);
    const auto* base = ids_.data() + table * neurons_;
    return {base + off[key], base + off[key + 1]};
  }

  /// Union of the L buckets addressed by [q, 0], written ascending into out.
  void query(std::span<const float> q, QueryScratch& scratch, std::vector<NeuronId>& out) const {
    out.clear();
    scratch.prepare(neurons_, tables());
    hash_into<float>(family_, q, 0.0f, scratch.keys);
    for (std::size_t l = 0; l < tables(); ++l) {
      for (NeuronId id : bucket(l, scratch.keys[l])) {
        if (scratch.stamp[id] != scratch.epoch) {
          scratch.stamp[id] = scratch.epoch;
          out.push_back(id);
        }
      }
    }
    std::sort(out.begin(), out.end());
  }

  RetrievedSet query(std::span<const float> q) const {
    QueryScratch scratch;
    RetrievedSet s;
    query(q, scratch, s.ids);
    return s;
  }

  bool operator==(const HashIndex&) const = default;

  friend HashIndex build(Family family, const Matrix<float>& W, std::span<const float> b, unsigned threads);
  friend void write_index(io::Writer& w, const HashIndex& index);
  friend HashIndex read_index(io::Reader& r);

 private:
  Family family_;
  std::size_t neurons_ = 0;
  std::vector<std::uint32_t> offsets_;  // L * (2^K + 1)
  std::vector<NeuronId> ids_;           // L * m
};

/// Inserts every neuron [w_i, b_i] into one bucket per table.
inline HashIndex build(Family family, const Matrix<float>& W, std::span<const float> b, unsigned threads = 1) {
  require(W.cols() + 1 == family.width(), ErrorKind::data,
          "build: neuron width " + std::to_string(W.cols() + 1) + " != family width " +
              std::to_string(family.width()));
  require(b.size() == W.rows(), ErrorKind::data, "build: bias length != neuron count");
  require(W.rows() <= std::numeric_limits<NeuronId>::max(), ErrorKind::data, "build: too many neurons");
  const std::size_t m = W.rows(), L = family.tables, nb = family.buckets();

  std::vector<HashKey> keys(m * L);
  parallel_for(m, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      hash_into<float>(family, W.row(i), b[i], std::span<HashKey>(keys.data() + i * L, L));
    }
  });

  HashIndex index;
  index.neurons_ = m;
  index.offsets_.assign(L * (nb + 1), 0);
  index.ids_.resize(L * m);
  for (std::size_t l = 0; l < L; ++l) {
    auto* off = index.offsets_.data() + l * (nb + 1);
    for (std::size_t i = 0; i < m; ++i) ++off[keys[i * L + l] + 1];
    for (std::size_t k = 0; k < nb; ++k) off[k + 1] += off[k];
    std::vector<std::uint32_t> cursor(off, off + nb);
    auto* base = index.ids_.data() + l * m;
    for (std::size_t i = 0; i < m; ++i) base[cursor[keys[i * L + l]]++] = static_cast<NeuronId>(i);
  }
  index.family_ = std::move(family);
  return index;
}

inline RetrievedSet query(const HashIndex& index, std::span<const float> q) { return index.query(q); }

/// Fresh index over the same neurons under new_family; the input is untouched.
inline HashIndex rebuild(const HashIndex& index, Family new_family, const Matrix<float>& W,
                         std::span<const float> b, unsigned threads = 1) {
  require(new_family.bits == index.bits() && new_family.tables == index.tables() &&
              new_family.width() == index.family().width(),
          ErrorKind::data, "rebuild: family shape differs from the index");
  require(W.rows() == index.neuron_count(), ErrorKind::data, "rebuild: neuron count differs from the index");
  return build(std::move(new_family), W, b, threads);
}

struct TableStats {
  std::size_t max = 0;
  double mean = 0.0;
  double variance = 0.0;  // population variance over all 2^K buckets
};

struct BucketStats {
  std::vector<TableStats> tables;
  /// Bucket-size histogram over all tables: bin 0 counts empty buckets,
  /// bin i >= 1 counts sizes in [2^(i-1), 2^i).
  std::vector<std::size_t> histogram;
};

inline BucketStats bucket_stats(const HashIndex& index) {
  BucketStats out;
  const std::size_t nb = index.buckets();
  for (std::size_t l = 0; l < index.tables(); ++l) {
    std::vector<double> sizes(nb);
    TableStats t;
    for (std::size_t k = 0; k < nb; ++k) {
      const std::size_t s = index.bucket(l, static_cast<HashKey>(k)).size();
      sizes[k] = static_cast<double>(s);
      t.max = std::max(t.max, s);
      const std::size_t bin = s == 0 ? 0 : static_cast<std::size_t>(std::bit_width(s));
      if (out.histogram.size() <= bin) out.histogram.resize(bin + 1, 0);
      ++out.histogram[bin];
    }
    t.mean = static_cast<double>(index.neuron_count()) / static_cast<double>(nb);
    for (auto& s : sizes) s = (s - t.mean) * (s - t.mean);
    t.variance = pairwise_mean(sizes);
    out.tables.push_back(t);
  }
  return out;
}

inline constexpr std::uint32_t kIndexVersion = 1;

inline void write_index(io::Writer& w, const HashIndex& index) {
  w.magic("WOLT");
  w.u32(kIndexVersion);
  w.u64(index.bits());
  w.u64(index.tables());
  w.u64(index.neuron_count());
  write_family(w, index.family_);
  const std::size_t nb = index.buckets();
  for (std::size_t l = 0; l < index.tables(); ++l) {
    const auto* off = index.offsets_.data() + l * (nb + 1);
    for (std::size_t k = 0; k < nb; ++k) w.u32(off[k + 1] - off[k]);
    w.u32s(std::span<const NeuronId>(index.ids_.data() + l * index.neuron_count(), index.neuron_count()));
  }
}

/// Reads an index and checks that every table partitions [0, m) with
/// ascending ids per bucket.
inline HashIndex read_index(io::Reader& r) {
  r.expect_magic("WOLT");
  r.expect_version(kIndexVersion);
  const auto K = r.u64(), L = r.u64(), m = r.u64();
  require(K >= 1 && K <= kMaxBits && L >= 1, ErrorKind::data, r.origin() + ": invalid index shape");
  require(m <= std::numeric_limits<NeuronId>::max(), ErrorKind::data, r.origin() + ": neuron count too large");
  HashIndex index;
  index.family_ = read_family(r);
  require(index.family_.bits == K && index.family_.tables == L, ErrorKind::data,
          r.origin() + ": embedded family shape disagrees with index header");
  index.neurons_ = m;
  const std::size_t nb = std::size_t{1} << K;
  require(L * (nb + m) <= r.remaining() / sizeof(std::uint32_t), ErrorKind::data, r.origin() + ": truncated file");
  index.offsets_.assign(L * (nb + 1), 0);
  index.ids_.resize(L * m);
  std::vector<char> seen(m);
  for (std::size_t l = 0; l < L; ++l) {
    auto* off = index.offsets_.data() + l * (nb + 1);
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < nb; ++k) {
      total += r.u32();
      require(total <= m, ErrorKind::data, r.origin() + ": bucket lengths exceed neuron count");
      off[k + 1] = static_cast<std::uint32_t>(total);
    }
    require(total == m, ErrorKind::data, r.origin() + ": bucket lengths do not sum to neuron count");
    auto ids = std::span<NeuronId>(index.ids_.data() + l * m, m);
    r.u32s(ids);
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t k = 0; k < nb; ++k) {
      for (std::uint32_t p = off[k]; p < off[k + 1]; ++p) {
        require(ids[p] < m && !seen[ids[p]], ErrorKind::data, r.origin() + ": table is not a partition of neuron ids");
        require(p == off[k] || ids[p - 1] < ids[p], ErrorKind::data, r.origin() + ": bucket ids not ascending");
        seen[ids[p]] = 1;
      }
    }
  }
  require(r.remaining() == 0, ErrorKind::data, r.origin() + ": trailing bytes after index");
  return index;
}

inline void save_index(const HashIndex& index, const std::string& path) {
  io::Writer w;
  write_index(w, index);
  w.save(path);
}

inline HashIndex load_index(const std::string& path) {
  auto r = io::Reader::open(path);
  return read_index(r);
}

}  // namespace lss
