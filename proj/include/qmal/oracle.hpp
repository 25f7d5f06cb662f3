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

// Brute-force first-quantization reference. Every particle carries an
// external slot and an internal coordinate vector; the symmetrizer is the
// explicit sum over all N! permutations. Loss couples the target mode to a
// fresh loss slot, so the global state stays pure and partial traces happen
// only at readout.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "qmal/circuit.hpp"
#include "qmal/overlaps.hpp"
#include "qmal/state.hpp"

namespace qmal::oracle {

inline constexpr std::uint64_t kDenseCap = std::uint64_t{1} << 20;

struct DenseFirstQuantState {
  int n_photons = 0;
  int n_modes = 0;  // physical modes; slot j < n_modes is mode j + 1
  int n_slots = 0;  // physical plus loss slots
  int rank = 0;     // internal coordinate dimension
  int loss_used = 0;
  Eigen::VectorXcd psi;

  int single_dim() const { return n_slots * rank; }
  bool is_loss_slot(int slot) const { return slot >= n_modes; }
};

namespace detail {

inline std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

inline std::vector<std::vector<int>> all_permutations(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

inline void decode(std::uint64_t idx, int n, int d, std::vector<int>& out) {
  out.resize(n);
  for (int q = n - 1; q >= 0; --q) {
    out[q] = static_cast<int>(idx % static_cast<std::uint64_t>(d));
    idx /= static_cast<std::uint64_t>(d);
  }
}

inline std::uint64_t encode(const std::vector<int>& t, int d) {
  std::uint64_t idx = 0;
  for (int x : t) idx = idx * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(x);
  return idx;
}

}  // namespace detail

// Coordinates of each photon's internal state: conj of the gram-schmidt row,
// restricted to the pivot columns, so <v_p|v_q> = S(p,q).
inline std::vector<Eigen::VectorXcd> internal_vectors(const GramMatrix& s) {
  const auto gs = gram_schmidt(s);
  std::vector<Eigen::VectorXcd> out;
  for (int p = 0; p < s.n(); ++p) {
    Eigen::VectorXcd v(std::max(1, gs.rank()));
    v.setZero();
    for (int k = 0; k < gs.rank(); ++k) v(k) = std::conj(gs.gamma(p, gs.pivots[k]));
    out.push_back(v);
  }
  return out;
}

// Explicit symmetrizer sum_{sigma} P_sigma applied to a vector, times `scale`.
inline Eigen::VectorXcd permutation_sum(const Eigen::VectorXcd& v, int n, int d, double scale) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
  const auto perms = detail::all_permutations(n);
  std::vector<int> t, u(n);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) == 0.0) continue;
    detail::decode(static_cast<std::uint64_t>(i), n, d, t);
    for (const auto& s : perms) {
      for (int q = 0; q < n; ++q) u[s[q]] = t[q];
      out(static_cast<Eigen::Index>(detail::encode(u, d))) += v(i);
    }
  }
  return out * scale;
}

// |I| for a product basis vector: factorials of repeated single-particle states.
inline double invariance_count(const std::vector<int>& tuple) {
  std::map<int, int> c;
  for (int x : tuple) ++c[x];
  double f = 1.0;
  for (const auto& [k, n] : c) f *= detail::factorial(n);
  return f;
}

// Normalized symmetrization of a product basis vector.
inline Eigen::VectorXcd symmetrize_basis_vector(const std::vector<int>& tuple, int d) {
  const int n = static_cast<int>(tuple.size());
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(detail::ipow(d, n)));
  e(static_cast<Eigen::Index>(detail::encode(tuple, d))) = 1.0;
  return permutation_sum(e, n, d, 1.0 / std::sqrt(detail::factorial(n) * invariance_count(tuple)));
}

// Linear extension of the symmetrizer with the normalization fixed by `tuple`'s |I|.
inline Eigen::VectorXcd apply_symmetrizer(const Eigen::VectorXcd& v, int n, int d, double inv_count) {
  return permutation_sum(v, n, d, 1.0 / std::sqrt(detail::factorial(n) * inv_count));
}

// Photons with labels 0..N-1 in physical modes `modes` (1-based), symmetrized
// with 1/sqrt(N!). Not renormalized: bunched inputs keep their overlap weight.
inline DenseFirstQuantState prepare(const GramMatrix& s, const std::vector<int>& modes, int n_modes,
                                    int n_loss_slots, std::uint64_t cap = kDenseCap) {
  DenseFirstQuantState st;
  st.n_photons = static_cast<int>(modes.size());
  st.n_modes = n_modes;
  st.n_slots = n_modes + n_loss_slots;
  const auto vecs = internal_vectors(s);
  st.rank = static_cast<int>(vecs.front().size());
  const int d = st.single_dim();
  const int n = st.n_photons;
  std::uint64_t dim = 1;
  for (int q = 0; q < n; ++q) {
    require(dim <= cap / static_cast<std::uint64_t>(d), ErrorCode::DenseCapExceeded,
            "dense state larger than " + std::to_string(cap));
    dim *= static_cast<std::uint64_t>(d);
  }
  st.psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim));
  const auto perms = detail::all_permutations(n);
  std::vector<int> t(n);
  for (const auto& sigma : perms) {
    // particle position q holds photon sigma[q]
    std::function<void(int, std::uint64_t, cplx)> rec = [&](int q, std::uint64_t idx, cplx amp) {
      if (q == n) {
        st.psi(static_cast<Eigen::Index>(idx)) += amp;
        return;
      }
      const int p = sigma[q];
      const int slot = modes[p] - 1;
      for (int k = 0; k < st.rank; ++k) {
        const cplx c = vecs[p](k);
        if (c == 0.0) continue;
        rec(q + 1, idx * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(slot * st.rank + k), amp * c);
      }
    };
    rec(0, 0, 1.0);
  }
  st.psi /= std::sqrt(detail::factorial(n));
  return st;
}

// Applies (u_ext (x) I_internal) to every particle. `u_ext` acts on slots.
inline void apply_single(DenseFirstQuantState& st, const CMatrix& u_ext) {
  const int d = st.single_dim();
  const int r = st.rank;
  const int n = st.n_photons;
  for (int q = 0; q < n; ++q) {
    const std::uint64_t inner = detail::ipow(d, n - q - 1);
    const std::uint64_t outer = detail::ipow(d, q);
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(st.psi.size());
    for (std::uint64_t a = 0; a < outer; ++a) {
      for (int s = 0; s < d; ++s) {
        const int slot = s / r, k = s % r;
        for (std::uint64_t b = 0; b < inner; ++b) {
          const cplx v = st.psi(static_cast<Eigen::Index>((a * d + s) * inner + b));
          if (v == 0.0) continue;
          for (int t = 0; t < st.n_slots; ++t) {
            const cplx u = u_ext(t, slot);
            if (u == 0.0) continue;
            next(static_cast<Eigen::Index>((a * d + static_cast<std::uint64_t>(t * r + k)) * inner + b)) += u * v;
          }
        }
      }
    }
    st.psi = std::move(next);
  }
}

// Slot-space matrix of a single-photon unitary (mode 0 row/column dropped).
inline CMatrix slot_matrix(const SinglePhotonUnitary& u, const DenseFirstQuantState& st) {
  CMatrix m = CMatrix::Identity(st.n_slots, st.n_slots);
  for (int a = 1; a <= u.n_modes; ++a)
    for (int b = 1; b <= u.n_modes; ++b) m(b - 1, a - 1) = u.matrix(a, b);
  return m;
}

// Couples physical `mode` to the next unused loss slot with transmission eta.
inline void oracle_apply_loss(DenseFirstQuantState& st, int mode, double eta) {
  require(st.n_modes + st.loss_used < st.n_slots, ErrorCode::DenseCapExceeded, "no free loss slot");
  const int a = mode - 1;
  const int l = st.n_modes + st.loss_used++;
  CMatrix m = CMatrix::Identity(st.n_slots, st.n_slots);
  const double t = std::sqrt(eta), r = std::sqrt(1.0 - eta);
  m(a, a) = t;
  m(l, a) = r;
  m(a, l) = -r;
  m(l, l) = t;
  apply_single(st, m);
}

// Pattern over modes 0..M, slot 0 counting photons in loss slots.
inline std::vector<int> slot_pattern(const DenseFirstQuantState& st, const std::vector<int>& particles) {
  std::vector<int> c(st.n_modes + 1, 0);
  for (int s : particles) {
    const int slot = s / st.rank;
    ++c[st.is_loss_slot(slot) ? 0 : slot + 1];
  }
  return c;
}

// Diagonal sums over external tuples.
inline PatternTable pattern_probabilities(const DenseFirstQuantState& st) {
  PatternTable out;
  std::vector<int> t;
  for (Eigen::Index i = 0; i < st.psi.size(); ++i) {
    const double w = std::norm(st.psi(i));
    if (w == 0.0) continue;
    detail::decode(static_cast<std::uint64_t>(i), st.n_photons, st.single_dim(), t);
    out[slot_pattern(st, t)] += w;
  }
  return out;
}

// Number-resolving projectors over orthogonalized internal labels: each
// occupation configuration contributes N!/prod(n!) |psi(representative)|^2.
inline PatternTable povm_probabilities(const DenseFirstQuantState& st) {
  PatternTable out;
  const int n = st.n_photons, d = st.single_dim();
  std::vector<int> t(n, 0);
  std::function<void(int, int)> rec = [&](int q, int lo) {
    if (q == n) {
      const double w = std::norm(st.psi(static_cast<Eigen::Index>(detail::encode(t, d))));
      if (w == 0.0) return;
      out[slot_pattern(st, t)] += detail::factorial(n) / invariance_count(t) * w;
      return;
    }
    for (int s = lo; s < d; ++s) {
      t[q] = s;
      rec(q + 1, s);
    }
  };
  rec(0, 0);
  return out;
}

inline double povm_probability(const DenseFirstQuantState& st, const std::vector<int>& pattern) {
  const auto t = povm_probabilities(st);
  auto it = t.find(pattern);
  return it == t.end() ? 0.0 : it->second;
}

// Reduced external density with the canonical layout: particles outside the
// sink slots first, sink particles traced and written as trailing zeros.
// `accept` filters the traced sink configuration (slot list).
inline ExternalDensity reduced_external(const DenseFirstQuantState& st, const std::vector<char>& sink,
                                        const std::function<bool(const std::vector<int>&)>& accept) {
  const int n = st.n_photons, d = st.single_dim(), r = st.rank;
  ExternalDensity rho;
  rho.n_photons = n;
  rho.n_modes = st.n_modes;
  std::vector<int> keep_slots, sink_slots;
  for (int s = 0; s < st.n_slots; ++s) (sink[s] ? sink_slots : keep_slots).push_back(s);
  for (int k = 0; k <= n; ++k) {
    const int a = n - k;
    const double binom = detail::factorial(n) / (detail::factorial(a) * detail::factorial(k));
    // sink configurations
    std::vector<std::vector<int>> zs;
    {
      std::vector<int> z(k);
      std::function<void(int)> rec = [&](int q) {
        if (q == k) {
          std::vector<int> slots(k);
          for (int i = 0; i < k; ++i) slots[i] = z[i] / r;
          if (accept(slots)) zs.push_back(z);
          return;
        }
        for (int s : sink_slots)
          for (int i = 0; i < r; ++i) {
            z[q] = s * r + i;
            rec(q + 1);
          }
      };
      rec(0);
    }
    if (zs.empty()) continue;
    const std::uint64_t n_ext = detail::ipow(keep_slots.size(), a);
    const std::uint64_t n_int = detail::ipow(r, a);
    std::vector<int> xe, xi, full(n);
    Eigen::VectorXcd col(static_cast<Eigen::Index>(n_ext));
    CMatrix block = CMatrix::Zero(static_cast<Eigen::Index>(n_ext), static_cast<Eigen::Index>(n_ext));
    for (const auto& z : zs) {
      for (int i = 0; i < k; ++i) full[a + i] = z[i];
      for (std::uint64_t ii = 0; ii < n_int; ++ii) {
        detail::decode(ii, a, r, xi);
        for (std::uint64_t xx = 0; xx < n_ext; ++xx) {
          detail::decode(xx, a, static_cast<int>(keep_slots.size()), xe);
          for (int q = 0; q < a; ++q) full[q] = keep_slots[xe[q]] * r + xi[q];
          col(static_cast<Eigen::Index>(xx)) = st.psi(static_cast<Eigen::Index>(detail::encode(full, d)));
        }
        block += col * col.adjoint();
      }
    }
    block *= binom;
    Mal ket(n, 0), bra(n, 0);
    for (std::uint64_t x = 0; x < n_ext; ++x) {
      detail::decode(x, a, static_cast<int>(keep_slots.size()), xe);
      for (int q = 0; q < a; ++q) ket[q] = keep_slots[xe[q]] + 1;
      for (std::uint64_t y = 0; y < n_ext; ++y) {
        const cplx v = block(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
        if (std::abs(v) == 0.0) continue;
        detail::decode(y, a, static_cast<int>(keep_slots.size()), xe);
        for (int q = 0; q < a; ++q) bra[q] = keep_slots[xe[q]] + 1;
        rho.add(ket, bra, v);
      }
    }
  }
  return rho;
}

// Reduced state of the non-sink particles over (slot, internal) tuples for a
// fixed active count; rows index encode(tuple, single_dim).
inline std::pair<std::vector<std::uint64_t>, CMatrix> reduced_block(const DenseFirstQuantState& st,
                                                                    const std::vector<char>& sink,
                                                                    int n_active) {
  const int n = st.n_photons, d = st.single_dim(), r = st.rank;
  const int k = n - n_active;
  const double binom = detail::factorial(n) / (detail::factorial(n_active) * detail::factorial(k));
  std::vector<int> keep, drop;
  for (int s = 0; s < d; ++s) (sink[s / r] ? drop : keep).push_back(s);
  std::vector<std::uint64_t> rows;
  std::vector<int> t;
  for (std::uint64_t x = 0; x < detail::ipow(keep.size(), n_active); ++x) {
    detail::decode(x, n_active, static_cast<int>(keep.size()), t);
    for (auto& v : t) v = keep[v];
    rows.push_back(detail::encode(t, d));
  }
  CMatrix a = CMatrix::Zero(static_cast<Eigen::Index>(rows.size()),
                            static_cast<Eigen::Index>(detail::ipow(drop.size(), k)));
  std::vector<int> z;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::uint64_t c = 0; c < static_cast<std::uint64_t>(a.cols()); ++c) {
      detail::decode(c, k, static_cast<int>(drop.size()), z);
      std::uint64_t idx = rows[i];
      for (int v : z) idx = idx * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(drop[v]);
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = st.psi(static_cast<Eigen::Index>(idx));
    }
  }
  return {rows, binom * a * a.adjoint()};
}

struct OracleBranch {
  double probability = 0.0;
  PatternTable patterns;  // conditional, detected photons counted in slot 0
  ExternalDensity density;
};

struct OracleResult {
  std::map<std::vector<std::vector<int>>, OracleBranch> branches;
  double herald_probability = 0.0;
};

struct OracleOptions {
  bool want_density = true;
  std::uint64_t cap = kDenseCap;
};

// Runs a lowered circuit densely. Injections are placed at the start, and
// detections are read out at the end; both are exact because injected modes
// are fresh and detected modes are never touched again.
inline OracleResult oracle_run_lowered(const LoweredCircuit& lc, const OracleOptions& opt = {}) {
  std::vector<int> modes(lc.n_photons, 0);
  int n_loss = 0;
  std::vector<const op::Detect*> detects;
  for (const auto& o : lc.ops) {
    if (o.kind == LoweredOp::Kind::Inject) modes[o.photon] = o.mode;
    if (o.kind == LoweredOp::Kind::Loss) ++n_loss;
    if (o.kind == LoweredOp::Kind::Detect) detects.push_back(&o.detect);
  }
  auto st = prepare(lc.gram, modes, lc.n_modes, n_loss, opt.cap);
  for (const auto& o : lc.ops) {
    if (o.kind == LoweredOp::Kind::Unitary) apply_single(st, slot_matrix(o.unitary, st));
    else if (o.kind == LoweredOp::Kind::Loss) oracle_apply_loss(st, o.mode, o.eta);
  }

  std::vector<char> detected(lc.n_modes + 1, 0);
  for (const auto* d : detects)
    for (int m : d->modes) detected[m] = 1;
  auto record_of = [&](const std::vector<int>& full) {
    std::vector<std::vector<int>> rec;
    for (const auto* d : detects) {
      std::vector<int> c;
      for (int m : d->modes) c.push_back(full[m]);
      rec.push_back(c);
    }
    return rec;
  };
  auto kept = [&](const std::vector<std::vector<int>>& rec) {
    for (std::size_t k = 0; k < detects.size(); ++k) {
      const auto& h = detects[k]->heralds;
      if (!h.empty() && std::find(h.begin(), h.end(), rec[k]) == h.end()) return false;
    }
    return true;
  };

  OracleResult res;
  for (const auto& [full, p] : pattern_probabilities(st)) {
    const auto rec = record_of(full);
    if (!kept(rec)) continue;
    auto moved = full;
    for (int m = 1; m <= lc.n_modes; ++m)
      if (detected[m]) {
        moved[0] += moved[m];
        moved[m] = 0;
      }
    auto& br = res.branches[rec];
    br.probability += p;
    br.patterns[moved] += p;
  }
  for (auto it = res.branches.begin(); it != res.branches.end();) {
    if (it->second.probability < kImpossibleHerald) {
      it = res.branches.erase(it);
      continue;
    }
    for (auto& [d, p] : it->second.patterns) p /= it->second.probability;
    res.herald_probability += it->second.probability;
    ++it;
  }

  if (opt.want_density) {
    std::vector<char> sink(st.n_slots, 0);
    for (int s = 0; s < st.n_slots; ++s) sink[s] = st.is_loss_slot(s) || detected[s + 1];
    for (auto& [rec, br] : res.branches) {
      const auto target = rec;
      br.density = reduced_external(st, sink, [&](const std::vector<int>& slots) {
        std::vector<int> full(lc.n_modes + 1, 0);
        for (int s : slots)
          if (!st.is_loss_slot(s)) ++full[s + 1];
        return record_of(full) == target;
      });
      for (auto& [k, v] : br.density.entries) v /= br.probability;
    }
  }
  return res;
}

inline OracleResult oracle_run(const CircuitIR& c, const OracleOptions& opt = {}) {
  return oracle_run_lowered(lower(c), opt);
}

// ---------------------------------------------------------------------------
// Second-quantized loss on one external mode with orthogonalized internal
// labels. Occupation vectors index the orthonormal internal basis.

using FockVector = std::map<std::vector<int>, cplx>;
using FockDensity = std::map<std::pair<std::vector<int>, std::vector<int>>, cplx>;

// a^dagger(phi) for phi with coordinates v in the orthonormal basis.
inline FockVector create(const FockVector& in, const Eigen::VectorXcd& v) {
  FockVector out;
  for (const auto& [occ, amp] : in) {
    for (int j = 0; j < static_cast<int>(v.size()); ++j) {
      if (v(j) == 0.0) continue;
      auto o = occ;
      ++o[j];
      out[o] += amp * v(j) * std::sqrt(static_cast<double>(o[j]));
    }
  }
  return out;
}

inline FockVector annihilate(const FockVector& in, int j) {
  FockVector out;
  for (const auto& [occ, amp] : in) {
    if (occ[j] == 0) continue;
    auto o = occ;
    --o[j];
    out[o] += amp * std::sqrt(static_cast<double>(occ[j]));
  }
  return out;
}

// Normalized a^dagger(phi_1)...a^dagger(phi_N)|vac>.
inline FockVector creation_state(const std::vector<Eigen::VectorXcd>& vecs) {
  const int r = static_cast<int>(vecs.front().size());
  FockVector s{{std::vector<int>(r, 0), 1.0}};
  for (const auto& v : vecs) s = create(s, v);
  double norm = 0.0;
  for (const auto& [o, a] : s) norm += std::norm(a);
  for (auto& [o, a] : s) a /= std::sqrt(norm);
  return s;
}

// All occupation vectors over r labels with total exactly n.
inline std::vector<std::vector<int>> occupations(int r, int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> o(r, 0);
  std::function<void(int, int)> rec = [&](int j, int left) {
    if (j == r - 1) {
      o[j] = left;
      out.push_back(o);
      return;
    }
    for (int x = left; x >= 0; --x) {
      o[j] = x;
      rec(j + 1, left - x);
    }
  };
  rec(0, n);
  return out;
}

// K_n = eta^{(N-n)/2} (1-eta)^{n/2} prod_j a_j^{n_j} / sqrt(n_j!) applied to |psi><psi|.
inline FockDensity kraus_loss(const FockVector& psi, int n_photons, double eta) {
  const int r = static_cast<int>(psi.begin()->first.size());
  FockDensity out;
  for (int lost = 0; lost <= n_photons; ++lost) {
    for (const auto& nv : occupations(r, lost)) {
      FockVector k = psi;
      double scale = std::pow(eta, 0.5 * (n_photons - lost)) * std::pow(1.0 - eta, 0.5 * lost);
      for (int j = 0; j < r; ++j) {
        for (int x = 0; x < nv[j]; ++x) k = annihilate(k, j);
        scale /= std::sqrt(detail::factorial(nv[j]));
      }
      for (const auto& [a, va] : k)
        for (const auto& [b, vb] : k) out[{a, b}] += scale * scale * va * std::conj(vb);
    }
  }
  return out;
}

// max |sum_n K_n^dagger K_n - I| over the Fock space with at most `max_photons`.
inline double kraus_completeness_defect(int r, int max_photons, double eta) {
  std::vector<std::vector<int>> basis;
  for (int n = 0; n <= max_photons; ++n)
    for (const auto& o : occupations(r, n)) basis.push_back(o);
  std::map<std::vector<int>, Eigen::Index> pos;
  for (std::size_t i = 0; i < basis.size(); ++i) pos[basis[i]] = static_cast<Eigen::Index>(i);
  const auto dim = static_cast<Eigen::Index>(basis.size());
  CMatrix total = CMatrix::Zero(dim, dim);
  for (int n_total = 0; n_total <= max_photons; ++n_total) {
    for (int lost = 0; lost <= n_total; ++lost) {
      for (const auto& nv : occupations(r, lost)) {
        CMatrix k = CMatrix::Zero(dim, dim);
        for (const auto& o : occupations(r, n_total)) {
          FockVector v{{o, 1.0}};
          double scale = std::pow(eta, 0.5 * (n_total - lost)) * std::pow(1.0 - eta, 0.5 * lost);
          for (int j = 0; j < r; ++j) {
            for (int x = 0; x < nv[j]; ++x) v = annihilate(v, j);
            scale /= std::sqrt(detail::factorial(nv[j]));
          }
          for (const auto& [out, amp] : v) k(pos[out], pos[o]) += scale * amp;
        }
        total += k.adjoint() * k;
      }
    }
  }
  return (total - CMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff();
}

// Converts the oracle's reduced first-quantized block (all survivors in one
// physical mode) to occupation-number form.
inline FockDensity to_fock(const std::vector<std::uint64_t>& rows, const CMatrix& block, int n_active,
                           int single_dim, int rank) {
  FockDensity out;
  std::vector<int> t;
  auto occ_of = [&](std::uint64_t idx) {
    detail::decode(idx, n_active, single_dim, t);
    std::vector<int> o(rank, 0);
    for (int s : t) ++o[s % rank];
    return o;
  };
  auto canonical = [&](std::uint64_t idx) {
    detail::decode(idx, n_active, single_dim, t);
    return std::is_sorted(t.begin(), t.end());
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!canonical(rows[i])) continue;
    const auto oi = occ_of(rows[i]);
    double wi = detail::factorial(n_active);
    for (int x : oi) wi /= detail::factorial(x);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (!canonical(rows[j])) continue;
      const auto oj = occ_of(rows[j]);
      double wj = detail::factorial(n_active);
      for (int x : oj) wj /= detail::factorial(x);
      const cplx v = block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (v != 0.0) out[{oi, oj}] += std::sqrt(wi * wj) * v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Main pipeline versus oracle.

struct Discrepancy {
  double probability = 0.0;
  double patterns = 0.0;
  double density = 0.0;
  double max() const { return std::max({probability, patterns, density}); }
};

inline double table_diff(const PatternTable& a, const PatternTable& b) {
  double m = 0.0;
  for (const auto& [d, p] : a) {
    auto it = b.find(d);
    m = std::max(m, std::abs(p - (it == b.end() ? 0.0 : it->second)));
  }
  for (const auto& [d, p] : b)
    if (!a.count(d)) m = std::max(m, std::abs(p));
  return m;
}

inline double density_diff(const ExternalDensity& a, const ExternalDensity& b) {
  double m = 0.0;
  for (const auto& [k, v] : a.entries) {
    auto it = b.entries.find(k);
    m = std::max(m, std::abs(v - (it == b.entries.end() ? cplx(0.0) : it->second)));
  }
  for (const auto& [k, v] : b.entries)
    if (!a.entries.count(k)) m = std::max(m, std::abs(v));
  return m;
}

inline Discrepancy compare(const SimulationResult& main, const OracleResult& ref) {
  Discrepancy d;
  std::map<std::vector<std::vector<int>>, const BranchResult*> mb;
  for (const auto& b : main.branches) mb[b.record] = &b;
  for (const auto& [rec, ob] : ref.branches) {
    auto it = mb.find(rec);
    if (it == mb.end()) {
      d.probability = std::max(d.probability, ob.probability);
      continue;
    }
    d.probability = std::max(d.probability, std::abs(ob.probability - it->second->probability));
    d.patterns = std::max(d.patterns, table_diff(ob.patterns, it->second->patterns));
    if (it->second->density) d.density = std::max(d.density, density_diff(ob.density, *it->second->density));
  }
  for (const auto& [rec, b] : mb)
    if (!ref.branches.count(rec)) d.probability = std::max(d.probability, b->probability);
  return d;
}

}  // namespace qmal::oracle
