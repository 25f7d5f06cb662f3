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
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <vector>

#include "qmal/basis.hpp"
#include "qmal/overlaps.hpp"
#include "qmal/state.hpp"

namespace qmal {

inline constexpr int kMaxResolvePhotons = 8;

namespace detail {

// Bitmask of photons per mode 0..n_modes.
inline void mode_masks(const Mal& mal, std::vector<std::uint64_t>& masks) {
  std::fill(masks.begin(), masks.end(), 0);
  for (std::size_t p = 0; p < mal.size(); ++p) masks[mal[p]] |= std::uint64_t{1} << p;
}

inline int resolve_modes(const MALDensity& mu, int n_modes) {
  return n_modes < 0 ? mu.basis->max_mode() : std::max(n_modes, mu.basis->max_mode());
}

}  // namespace detail

// P(d) over modes 0..M from the per-mode symmetrized overlaps. Slot 0 of
// each pattern counts removed photons.
inline PatternTable detection_probabilities(const MALDensity& mu, const GramMatrix& s,
                                            int n_modes = -1) {
  const int m = detail::resolve_modes(mu, n_modes);
  OverlapCache overlap(s);
  PatternTable out;
  Mal a, b;
  std::vector<std::uint64_t> ma(m + 1), mb(m + 1);
  std::vector<int> ca, cb;
  for (const auto& e : mu.entries) {
    mu.basis->decode(e.row, a);
    mu.basis->decode(e.col, b);
    ca = full_counts(a, m);
    if (e.row != e.col) {
      cb = full_counts(b, m);
      if (ca != cb) continue;
    }
    detail::mode_masks(a, ma);
    detail::mode_masks(b, mb);
    cplx ov = 1.0;
    for (int k = 1; k <= m && ov != 0.0; ++k) ov *= overlap(mb[k], ma[k]);
    const cplx term = e.value * ov;
    out[ca] += e.row == e.col ? term.real() : 2.0 * term.real();
  }
  return out;
}

inline double total_probability(const PatternTable& t) {
  double s = 0.0;
  for (const auto& [d, p] : t) s += p;
  return s;
}

// Sums a full table onto the listed modes.
inline PatternTable marginalize(const PatternTable& full, const std::vector<int>& modes) {
  PatternTable out;
  for (const auto& [d, p] : full) {
    std::vector<int> c(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k) c[k] = d[modes[k]];
    out[c] += p;
  }
  return out;
}

struct HeraldBranch {
  double probability = 0.0;
  MALDensity remainder;  // unnormalized
};

struct HeraldedMixture {
  std::vector<int> modes;
  std::map<std::vector<int>, HeraldBranch> branches;

  double total() const {
    double t = 0.0;
    for (const auto& [d, b] : branches) t += b.probability;
    return t;
  }
};

// Detects the modes in E. Detected photons move to mode 0. With `shrink`
// the remainder basis drops the detected modes.
inline HeraldedMixture trace_out_modes(const MALDensity& mu, const std::vector<int>& e_modes,
                                       const GramMatrix& s, bool shrink = true,
                                       int n_modes = -1,
                                       std::uint64_t dim_cap = default_dim_cap()) {
  const int m = detail::resolve_modes(mu, n_modes);
  for (int k : e_modes)
    require(k >= 1 && k <= m, ErrorCode::BadModes, "traced mode " + std::to_string(k));
  std::vector<char> in_e(m + 1, 0);
  for (int k : e_modes) in_e[k] = 1;

  auto allowed = mu.basis->allowed_modes();
  for (auto& set : allowed.sets) {
    bool hit = false;
    std::vector<int> kept;
    for (int x : set) {
      if (x <= m && in_e[x]) {
        hit = true;
        if (!shrink) kept.push_back(x);
      } else {
        kept.push_back(x);
      }
    }
    if (hit && (kept.empty() || kept.front() != 0)) kept.insert(kept.begin(), 0);
    set = kept;
  }
  auto target = std::make_shared<const BasisIndex>(allowed, dim_cap);

  OverlapCache overlap(s);
  std::map<std::vector<int>, DensityAccumulator> acc;
  Mal a, b;
  std::vector<std::uint64_t> ma(m + 1), mb(m + 1);
  for (const auto& e : mu.entries) {
    mu.basis->decode(e.row, a);
    mu.basis->decode(e.col, b);
    detail::mode_masks(a, ma);
    detail::mode_masks(b, mb);
    std::vector<int> d(e_modes.size());
    bool same = true;
    for (std::size_t k = 0; k < e_modes.size(); ++k) {
      d[k] = std::popcount(ma[e_modes[k]]);
      if (std::popcount(mb[e_modes[k]]) != d[k]) same = false;
    }
    if (!same) continue;
    cplx w = e.value;
    for (int k : e_modes) w *= overlap(mb[k], ma[k]);
    if (w == 0.0) continue;
    for (auto& x : a)
      if (x <= m && in_e[x]) x = 0;
    for (auto& x : b)
      if (x <= m && in_e[x]) x = 0;
    acc[d].add_image(e.row == e.col, target->index_of(a), target->index_of(b), w);
  }

  HeraldedMixture mix;
  mix.modes = e_modes;
  for (auto& [d, a_acc] : acc) {
    HeraldBranch br;
    br.remainder = a_acc.finish(target, mu.prune_threshold);
    br.probability = total_probability(detection_probabilities(br.remainder, s, m));
    mix.branches.emplace(d, std::move(br));
  }
  return mix;
}

struct PostSelected {
  double probability = 0.0;
  MALDensity state;
};

inline PostSelected postselect(const HeraldedMixture& mix, const std::vector<int>& herald,
                               double tol = kImpossibleHerald) {
  require(herald.size() == mix.modes.size(), ErrorCode::SizeMismatch, "herald arity");
  auto it = mix.branches.find(herald);
  require(it != mix.branches.end() && it->second.probability >= tol, ErrorCode::HeraldImpossible,
          "herald " + pattern_key(herald) + " has vanishing probability");
  return {it->second.probability, it->second.remainder.scaled(1.0 / it->second.probability)};
}

// Symmetrizes and traces out internal states. Photons in physical modes fill
// the leading tuple positions in label order; removed photons trail as zeros.
inline ExternalDensity resolve_interference(const MALDensity& mu, const GramMatrix& s,
                                            int n_modes = -1) {
  const int n = mu.n_photons();
  require(n <= kMaxResolvePhotons, ErrorCode::DimensionOverflow,
          "full resolution limited to " + std::to_string(kMaxResolvePhotons) + " photons");
  ExternalDensity rho;
  rho.n_photons = n;
  rho.n_modes = detail::resolve_modes(mu, n_modes);

  std::vector<std::vector<std::vector<int>>> perms(n + 1);
  std::vector<double> inv_fact(n + 1, 1.0);
  for (int k = 0; k <= n; ++k) {
    std::vector<int> p(k);
    std::iota(p.begin(), p.end(), 0);
    do perms[k].push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    for (int f = 2; f <= k; ++f) inv_fact[k] /= f;
  }

  Mal a, b, ket(n), bra(n);
  std::vector<int> ra, rb;
  auto active = [](const Mal& m, std::vector<int>& labels) {
    labels.clear();
    for (std::size_t p = 0; p < m.size(); ++p)
      if (m[p] != 0) labels.push_back(static_cast<int>(p));
  };
  auto emit = [&](const Mal& x, const Mal& y, cplx value) {
    active(x, ra);
    active(y, rb);
    if (ra.size() != rb.size()) return;
    const int k = static_cast<int>(ra.size());
    std::fill(ket.begin(), ket.end(), 0);
    std::fill(bra.begin(), bra.end(), 0);
    for (const auto& al : perms[k]) {
      for (int q = 0; q < k; ++q) ket[q] = x[ra[al[q]]];
      for (const auto& be : perms[k]) {
        cplx w = value * inv_fact[k];
        for (int q = 0; q < k && w != 0.0; ++q) {
          bra[q] = y[rb[be[q]]];
          w *= s(rb[be[q]], ra[al[q]]);
        }
        if (w == 0.0) continue;
        for (int q = 0; q < k; ++q) bra[q] = y[rb[be[q]]];
        rho.add(ket, bra, w);
      }
    }
  };
  for (const auto& e : mu.entries) {
    mu.basis->decode(e.row, a);
    mu.basis->decode(e.col, b);
    emit(a, b, e.value);
    if (e.row != e.col) emit(b, a, std::conj(e.value));
  }
  for (auto it = rho.entries.begin(); it != rho.entries.end();) {
    if (it->second == 0.0) it = rho.entries.erase(it);
    else ++it;
  }
  return rho;
}

}  // namespace qmal
