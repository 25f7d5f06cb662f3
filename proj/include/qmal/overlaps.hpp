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
#include <bit>
#include <cmath>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "qmal/common.hpp"

namespace qmal {

// Validated matrix of internal-state overlaps S(i,j) = <phi_i|phi_j>.
struct GramMatrix {
  CMatrix entries;
  int rank = 0;
  double min_eigenvalue = 1.0;

  int n() const { return static_cast<int>(entries.rows()); }
  cplx operator()(int i, int j) const { return entries(i, j); }
};

inline GramMatrix validate_gram(const CMatrix& raw, double tol = kValidationTol) {
  require(raw.rows() == raw.cols(), ErrorCode::NonSquare, "gram matrix must be square");
  const Eigen::Index n = raw.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    require(std::abs(raw(i, i) - 1.0) <= tol, ErrorCode::BadDiagonal,
            "diagonal entry " + std::to_string(i) + " is not 1");
    for (Eigen::Index j = 0; j < n; ++j) {
      require(std::abs(raw(i, j) - std::conj(raw(j, i))) <= tol, ErrorCode::NonHermitian,
              "entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
      require(std::abs(raw(i, j)) <= 1.0 + tol, ErrorCode::OverUnitOverlap,
              "entry (" + std::to_string(i) + "," + std::to_string(j) + ") exceeds 1");
    }
  }
  GramMatrix g;
  g.entries = raw;
  for (Eigen::Index i = 0; i < n; ++i) {
    g.entries(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) g.entries(j, i) = std::conj(g.entries(i, j));
  }
  if (n == 0) return g;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g.entries, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  g.min_eigenvalue = ev.minCoeff();
  require(g.min_eigenvalue >= -tol, ErrorCode::NotPSD,
          "smallest eigenvalue " + std::to_string(g.min_eigenvalue));
  g.rank = static_cast<int>((ev.array() > tol).count());
  return g;
}

// Ryser formula, Gray-code ordered subsets.
inline cplx permanent(const CMatrix& a) {
  require(a.rows() == a.cols(), ErrorCode::NonSquare, "permanent of non-square matrix");
  const int n = static_cast<int>(a.rows());
  if (n == 0) return 1.0;
  if (n == 1) return a(0, 0);
  if (n == 2) return a(0, 0) * a(1, 1) + a(0, 1) * a(1, 0);
  require(n < 63, ErrorCode::DimensionOverflow, "permanent size");
  std::vector<cplx> rowsum(n, 0.0);
  cplx total = 0.0;
  std::uint64_t gray = 0;
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t k = 1; k < count; ++k) {
    const int col = std::countr_zero(k);
    const std::uint64_t bit = std::uint64_t{1} << col;
    gray ^= bit;
    const double sgn = (gray & bit) ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) rowsum[i] += sgn * a(i, col);
    cplx prod = 1.0;
    for (int i = 0; i < n; ++i) prod *= rowsum[i];
    total += (std::popcount(gray) & 1) ? -prod : prod;
  }
  return (n & 1) ? -total : total;
}

// Lower-triangular gamma with gamma * gamma^dagger = S.
struct OrthoCoefficients {
  CMatrix gamma;
  std::vector<int> pivots;  // columns with a nonzero diagonal
  int rank() const { return static_cast<int>(pivots.size()); }
};

inline OrthoCoefficients gram_schmidt(const GramMatrix& s, double tol = kValidationTol,
                                      double zero_tol = kIdentityTol) {
  const int n = s.n();
  OrthoCoefficients out;
  out.gamma = CMatrix::Zero(n, n);
  auto& g = out.gamma;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      if (g(j, j).real() == 0.0) continue;
      cplx acc = s(i, j);
      for (int k = 0; k < j; ++k) acc -= g(i, k) * std::conj(g(j, k));
      g(i, j) = acc / g(j, j).real();
    }
    double res = s(i, i).real();
    for (int k = 0; k < i; ++k) res -= std::norm(g(i, k));
    require(res >= -tol, ErrorCode::NumericalBreakdown,
            "negative residual norm " + std::to_string(res) + " at row " + std::to_string(i));
    if (res > zero_tol) {
      g(i, i) = std::sqrt(res);
      out.pivots.push_back(i);
    }
  }
  return out;
}

// Ordered photon labels (0-based) sharing one external mode.
using PhotonGroup = std::vector<int>;

namespace detail {

inline double invariance_count(const PhotonGroup& g, std::span<const int> internal) {
  if (internal.empty()) return 1.0;
  std::map<int, int> counts;
  for (int l : g) ++counts[internal[l]];
  double f = 1.0;
  for (const auto& [id, c] : counts)
    for (int k = 2; k <= c; ++k) f *= k;
  return f;
}

}  // namespace detail

// <S phi_A | S phi_B> for two equally sized photon groups. When `internal`
// is given, photons with equal internal ids count as one repeated state.
inline cplx group_overlap(const PhotonGroup& a, const PhotonGroup& b, const GramMatrix& s,
                          std::span<const int> internal = {}) {
  require(a.size() == b.size(), ErrorCode::SizeMismatch, "group sizes differ");
  const int k = static_cast<int>(a.size());
  if (k == 0) return 1.0;
  if (k == 1) return s(a[0], b[0]);
  CMatrix g(k, k);
  for (int x = 0; x < k; ++x)
    for (int y = 0; y < k; ++y) g(x, y) = s(a[x], b[y]);
  cplx p = permanent(g);
  if (!internal.empty())
    p /= std::sqrt(detail::invariance_count(a, internal) * detail::invariance_count(b, internal));
  return p;
}

// Memoized group_overlap for distinct-label groups encoded as bitmasks.
class OverlapCache {
 public:
  explicit OverlapCache(const GramMatrix& s) : s_(s) {}

  cplx operator()(std::uint64_t a, std::uint64_t b) {
    if (a == 0 && b == 0) return 1.0;
    if (std::popcount(a) == 1 && std::popcount(b) == 1)
      return s_(std::countr_zero(a), std::countr_zero(b));
    const Key key{a, b};
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    cplx v = group_overlap(labels(a), labels(b), s_);
    memo_.emplace(key, v);
    return v;
  }

  const GramMatrix& gram() const { return s_; }

 private:
  struct Key {
    std::uint64_t a, b;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<std::uint64_t>()(k.a * 0x9E3779B97F4A7C15ULL ^ k.b);
    }
  };
  static PhotonGroup labels(std::uint64_t m) {
    PhotonGroup g;
    while (m) {
      g.push_back(std::countr_zero(m));
      m &= m - 1;
    }
    return g;
  }

  const GramMatrix& s_;
  std::unordered_map<Key, cplx, KeyHash> memo_;
};

}  // namespace qmal
