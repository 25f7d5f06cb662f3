// Copyright 2026 The qmal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qmal/basis.hpp"
#include "qmal/common.hpp"

namespace qmal {

struct DensityEntry {
  std::uint64_t row = 0;
  std::uint64_t col = 0;
  cplx value;
};

// Hermitian density over a MAL basis. Only row <= col is stored, sorted.
struct MALDensity {
  std::shared_ptr<const BasisIndex> basis;
  std::vector<DensityEntry> entries;
  double prune_threshold = 0.0;

  int n_photons() const { return basis->n_photons(); }

  cplx at(std::uint64_t i, std::uint64_t j) const {
    const bool swap = i > j;
    if (swap) std::swap(i, j);
    auto it = std::lower_bound(entries.begin(), entries.end(), std::make_pair(i, j),
                               [](const DensityEntry& e, const std::pair<std::uint64_t, std::uint64_t>& k) {
                                 return std::make_pair(e.row, e.col) < k;
                               });
    if (it == entries.end() || it->row != i || it->col != j) return 0.0;
    return swap ? std::conj(it->value) : it->value;
  }

  cplx at(const Mal& a, const Mal& b) const {
    auto i = basis->find(a);
    auto j = basis->find(b);
    if (!i || !j) return 0.0;
    return at(*i, *j);
  }

  double trace() const {
    double t = 0.0;
    for (const auto& e : entries)
      if (e.row == e.col) t += e.value.real();
    return t;
  }

  CMatrix to_dense() const {
    const auto d = static_cast<Eigen::Index>(basis->dim());
    CMatrix m = CMatrix::Zero(d, d);
    for (const auto& e : entries) {
      m(e.row, e.col) = e.value;
      m(e.col, e.row) = std::conj(e.value);
    }
    return m;
  }

  MALDensity scaled(double f) const {
    MALDensity out = *this;
    for (auto& e : out.entries) e.value *= f;
    return out;
  }
};

// Collects contributions into the upper triangle.
class DensityAccumulator {
 public:
  // Raw addition of the full-matrix element (i, j); the mirrored element is implied.
  void add(std::uint64_t i, std::uint64_t j, cplx w) {
    if (i <= j) map_[{i, j}] += w;
    else map_[{j, i}] += std::conj(w);
  }

  // Contribution w at (i', j') generated from a stored source entry. A
  // diagonal source is closed under transposition, so only one half is kept;
  // an off-diagonal source also stands for its mirrored partner.
  void add_image(bool diagonal_source, std::uint64_t i, std::uint64_t j, cplx w) {
    if (diagonal_source) {
      if (i <= j) map_[{i, j}] += w;
      return;
    }
    if (i < j) map_[{i, j}] += w;
    else if (i > j) map_[{j, i}] += std::conj(w);
    else map_[{i, i}] += 2.0 * w.real();
  }

  MALDensity finish(std::shared_ptr<const BasisIndex> basis, double prune = 0.0) {
    MALDensity out;
    out.basis = std::move(basis);
    out.prune_threshold = prune;
    out.entries.reserve(map_.size());
    for (const auto& [k, v] : map_) {
      cplx value = k.first == k.second ? cplx(v.real(), 0.0) : v;
      if (std::abs(value) > prune) out.entries.push_back({k.first, k.second, value});
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const DensityEntry& a, const DensityEntry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    map_.clear();
    return out;
  }

  std::size_t size() const { return map_.size(); }

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& k) const {
      return std::hash<std::uint64_t>()(k.first * 0x9E3779B97F4A7C15ULL + k.second);
    }
  };
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, cplx, PairHash> map_;
};

inline MALDensity init_pure(const Mal& mal, std::shared_ptr<const BasisIndex> basis) {
  const std::uint64_t i = basis->index_of(mal);
  MALDensity out;
  out.basis = std::move(basis);
  out.entries.push_back({i, i, 1.0});
  return out;
}

// Re-expresses mu in another basis after mapping every MAL through `f`.
// `f` must be injective on the support of mu.
inline MALDensity remap(const MALDensity& mu, std::shared_ptr<const BasisIndex> target,
                        const std::function<void(Mal&)>& f = {}) {
  DensityAccumulator acc;
  Mal a, b;
  for (const auto& e : mu.entries) {
    mu.basis->decode(e.row, a);
    mu.basis->decode(e.col, b);
    if (f) {
      f(a);
      f(b);
    }
    auto i = target->find(a);
    auto j = target->find(b);
    require(i && j, ErrorCode::BasisTooSmall, "state support escapes target basis");
    acc.add(*i, *j, e.value);
  }
  return acc.finish(std::move(target), mu.prune_threshold);
}

// Dense or sparse Hermitian matrix over the (M+1)^N external tensor basis.
// Keys are mixed-radix with photon 0 most significant.
struct ExternalDensity {
  int n_photons = 0;
  int n_modes = 0;
  std::map<std::pair<std::uint64_t, std::uint64_t>, cplx> entries;

  std::uint64_t key(const Mal& m) const {
    std::uint64_t k = 0;
    for (int x : m) k = k * static_cast<std::uint64_t>(n_modes + 1) + static_cast<std::uint64_t>(x);
    return k;
  }
  Mal mal_of(std::uint64_t k) const {
    Mal m(n_photons);
    for (int p = n_photons - 1; p >= 0; --p) {
      m[p] = static_cast<int>(k % static_cast<std::uint64_t>(n_modes + 1));
      k /= static_cast<std::uint64_t>(n_modes + 1);
    }
    return m;
  }
  cplx at(const Mal& a, const Mal& b) const {
    auto it = entries.find({key(a), key(b)});
    return it == entries.end() ? cplx(0.0) : it->second;
  }
  void add(const Mal& a, const Mal& b, cplx w) { entries[{key(a), key(b)}] += w; }
  double trace() const {
    double t = 0.0;
    for (const auto& [k, v] : entries)
      if (k.first == k.second) t += v.real();
    return t;
  }
  double purity_trace() const {
    double t = 0.0;
    for (const auto& [k, v] : entries) t += std::norm(v);
    return t;
  }
  // Dense matrix over the keys that actually occur, in ascending key order.
  std::pair<std::vector<std::uint64_t>, CMatrix> compact() const {
    std::vector<std::uint64_t> keys;
    for (const auto& [k, v] : entries) {
      keys.push_back(k.first);
      keys.push_back(k.second);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::map<std::uint64_t, Eigen::Index> pos;
    for (std::size_t i = 0; i < keys.size(); ++i) pos[keys[i]] = static_cast<Eigen::Index>(i);
    CMatrix m = CMatrix::Zero(keys.size(), keys.size());
    for (const auto& [k, v] : entries) m(pos[k.first], pos[k.second]) += v;
    return {keys, m};
  }
};

// Tr(rho_ref rho) with both operands scaled to unit trace.
inline double fidelity(const ExternalDensity& ref, const ExternalDensity& rho,
                       double tol = kValidationTol) {
  require(ref.n_photons == rho.n_photons && ref.n_modes == rho.n_modes, ErrorCode::BasisMismatch,
          "external densities use different bases");
  const double tr_ref = ref.trace();
  const double tr_rho = rho.trace();
  require(tr_ref > tol && tr_rho > tol, ErrorCode::ZeroProbabilityMass, "empty density");
  require(std::abs(ref.purity_trace() - tr_ref * tr_ref) <= tol * std::max(1.0, tr_ref * tr_ref),
          ErrorCode::RefNotPure, "reference density is not rank one");
  cplx f = 0.0;
  for (const auto& [k, v] : ref.entries) {
    auto it = rho.entries.find({k.second, k.first});
    if (it != rho.entries.end()) f += v * it->second;
  }
  return f.real() / (tr_ref * tr_rho);
}

struct EncodedQubit {
  Eigen::Matrix2cd rho;
  double bloch_length = 0.0;
  bool over_length = false;
};

inline EncodedQubit encoded_density(double x, double y, double z, double tol = kValidationTol) {
  for (double v : {x, y, z})
    require(v >= -1.0 - tol && v <= 1.0 + tol, ErrorCode::OutOfRangeExpectation,
            "expectation " + std::to_string(v) + " outside [-1, 1]");
  EncodedQubit q;
  const cplx i(0.0, 1.0);
  q.rho << 1.0 + z, x - i * y, x + i * y, 1.0 - z;
  q.rho *= 0.5;
  q.bloch_length = std::sqrt(x * x + y * y + z * z);
  q.over_length = q.bloch_length > 1.0 + tol;
  return q;
}

using PatternTable = std::map<std::vector<int>, double>;

// Post-selected expectation over the weighted patterns.
inline double expectation(const PatternTable& probs, const PatternTable& weights,
                          double tol = kImpossibleHerald) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& [d, p] : probs) {
    auto it = weights.find(d);
    if (it == weights.end()) {
      require(std::abs(p) <= tol, ErrorCode::UnweightedPattern,
              "pattern " + pattern_key(d) + " has probability but no weight");
      continue;
    }
    num += it->second * p;
    den += p;
  }
  require(den > tol, ErrorCode::ZeroProbabilityMass, "no probability on weighted patterns");
  return num / den;
}

}  // namespace qmal
