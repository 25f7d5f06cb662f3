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
#include <memory>
#include <set>
#include <variant>
#include <vector>

#include "qmal/basis.hpp"
#include "qmal/overlaps.hpp"
#include "qmal/state.hpp"

namespace qmal {

// (M+1)x(M+1) matrix over modes 0..M; row m holds the image of mode m.
// Row and column 0 are the identity.
struct SinglePhotonUnitary {
  int n_modes = 0;
  CMatrix matrix;
  std::vector<int> support;  // modes where the matrix differs from identity
};

namespace component {
struct BeamSplitter {
  double theta;
  int m1, m2;
};
struct Phase {
  double phi;
  int mode;
};
struct Swap {
  int m1, m2;
};
// Local matrix acting on `modes` in the listed order.
struct Custom {
  std::vector<int> modes;
  CMatrix matrix;
};
}  // namespace component

using ComponentSpec =
    std::variant<component::BeamSplitter, component::Phase, component::Swap, component::Custom>;

namespace detail {

inline void check_modes(const std::vector<int>& modes, int n_modes) {
  std::set<int> seen;
  for (int m : modes) {
    require(m >= 1 && m <= n_modes, ErrorCode::BadModes, "mode " + std::to_string(m) + " out of range");
    require(seen.insert(m).second, ErrorCode::BadModes, "repeated mode " + std::to_string(m));
  }
}

inline SinglePhotonUnitary embed(int n_modes, const std::vector<int>& modes, const CMatrix& local) {
  SinglePhotonUnitary u;
  u.n_modes = n_modes;
  u.matrix = CMatrix::Identity(n_modes + 1, n_modes + 1);
  for (std::size_t a = 0; a < modes.size(); ++a)
    for (std::size_t b = 0; b < modes.size(); ++b) u.matrix(modes[a], modes[b]) = local(a, b);
  for (int m : modes) {
    bool identity = true;
    for (int k = 0; k <= n_modes; ++k) {
      const cplx expect = k == m ? 1.0 : 0.0;
      if (u.matrix(k, m) != expect || u.matrix(m, k) != expect) identity = false;
    }
    if (!identity) u.support.push_back(m);
  }
  std::sort(u.support.begin(), u.support.end());
  return u;
}

}  // namespace detail

inline SinglePhotonUnitary make_component(const ComponentSpec& spec, int n_modes) {
  using namespace component;
  if (auto* bs = std::get_if<BeamSplitter>(&spec)) {
    detail::check_modes({bs->m1, bs->m2}, n_modes);
    const double c = std::cos(bs->theta), s = std::sin(bs->theta);
    CMatrix l(2, 2);
    l << c, s, -s, c;
    return detail::embed(n_modes, {bs->m1, bs->m2}, l);
  }
  if (auto* ph = std::get_if<Phase>(&spec)) {
    detail::check_modes({ph->mode}, n_modes);
    CMatrix l(1, 1);
    l(0, 0) = std::polar(1.0, ph->phi);
    return detail::embed(n_modes, {ph->mode}, l);
  }
  if (auto* sw = std::get_if<Swap>(&spec)) {
    detail::check_modes({sw->m1, sw->m2}, n_modes);
    CMatrix l(2, 2);
    l << 0, 1, 1, 0;
    return detail::embed(n_modes, {sw->m1, sw->m2}, l);
  }
  const auto& cu = std::get<Custom>(spec);
  detail::check_modes(cu.modes, n_modes);
  const auto k = static_cast<Eigen::Index>(cu.modes.size());
  require(cu.matrix.rows() == k && cu.matrix.cols() == k, ErrorCode::BadModes,
          "custom matrix size does not match its mode list");
  const double dev = (cu.matrix.adjoint() * cu.matrix - CMatrix::Identity(k, k)).cwiseAbs().maxCoeff();
  require(dev <= kIdentityTol, ErrorCode::NonUnitaryCustom,
          "custom matrix deviates from unitary by " + std::to_string(dev));
  return detail::embed(n_modes, cu.modes, cu.matrix);
}

struct EvolveOptions {
  bool auto_expand = true;
  std::uint64_t dim_cap = default_dim_cap();
};

namespace detail {

// Adds every image mode reachable from a photon's allowed set; rebases if needed.
inline MALDensity ensure_closed(const MALDensity& mu, const std::vector<std::set<int>>& extra,
                                const EvolveOptions& opt) {
  auto allowed = mu.basis->allowed_modes();
  bool grow = false;
  for (int p = 0; p < mu.n_photons(); ++p) {
    for (int m : extra[p]) {
      if (!allowed.contains(p, m)) {
        allowed.sets[p].push_back(m);
        std::sort(allowed.sets[p].begin(), allowed.sets[p].end());
        grow = true;
      }
    }
  }
  if (!grow) return mu;
  require(opt.auto_expand, ErrorCode::BasisTooSmall, "component support escapes the allowed modes");
  auto basis = std::make_shared<const BasisIndex>(allowed, opt.dim_cap);
  return remap(mu, basis);
}

}  // namespace detail

// mu -> U mu U^dagger with U the N-fold tensor power of u, one photon at a time.
inline MALDensity apply_unitary(const MALDensity& mu, const SinglePhotonUnitary& u,
                                const EvolveOptions& opt = {}) {
  const int n = mu.n_photons();
  std::vector<std::set<int>> extra(n);
  for (int p = 0; p < n; ++p) {
    for (int m : mu.basis->allowed(p)) {
      if (m > u.n_modes || !std::binary_search(u.support.begin(), u.support.end(), m)) continue;
      for (int t : u.support)
        if (u.matrix(m, t) != 0.0) extra[p].insert(t);
    }
  }
  MALDensity cur = detail::ensure_closed(mu, extra, opt);
  const BasisIndex& basis = *cur.basis;

  // Images per mode, restricted to the support.
  std::vector<std::vector<std::pair<int, cplx>>> images(basis.max_mode() + 1);
  for (int m = 0; m <= basis.max_mode(); ++m) {
    if (m > u.n_modes || !std::binary_search(u.support.begin(), u.support.end(), m)) {
      images[m] = {{m, 1.0}};
      continue;
    }
    for (int t : u.support)
      if (u.matrix(m, t) != 0.0) images[m].push_back({t, u.matrix(m, t)});
  }

  for (int p = 0; p < n; ++p) {
    bool touched = false;
    for (int m : basis.allowed(p))
      if (images[m].size() != 1 || images[m][0].first != m || images[m][0].second != 1.0) touched = true;
    if (!touched) continue;
    DensityAccumulator acc;
    const std::uint64_t stride = basis.stride(p);
    for (const auto& e : cur.entries) {
      const int a = basis.mode_at(e.row, p);
      const int b = basis.mode_at(e.col, p);
      const std::uint64_t row0 = e.row - static_cast<std::uint64_t>(basis.position(p, a)) * stride;
      const std::uint64_t col0 = e.col - static_cast<std::uint64_t>(basis.position(p, b)) * stride;
      const bool diag = e.row == e.col;
      for (const auto& [ta, ua] : images[a]) {
        const std::uint64_t i = row0 + static_cast<std::uint64_t>(basis.position(p, ta)) * stride;
        for (const auto& [tb, ub] : images[b]) {
          const std::uint64_t j = col0 + static_cast<std::uint64_t>(basis.position(p, tb)) * stride;
          acc.add_image(diag, i, j, e.value * ua * std::conj(ub));
        }
      }
    }
    cur = acc.finish(cur.basis, cur.prune_threshold);
  }
  return cur;
}

struct LossElement {
  int mode = 1;
  double eta = 1.0;  // transmission probability
};

namespace detail {

// All size-n subsets of `items` in lexicographic order, as bitmasks over labels.
inline std::vector<std::uint64_t> subsets_of_size(const std::vector<int>& items, int n) {
  std::vector<std::uint64_t> out;
  std::vector<int> idx(n);
  for (int k = 0; k < n; ++k) idx[k] = k;
  const int total = static_cast<int>(items.size());
  if (n > total) return out;
  while (true) {
    std::uint64_t mask = 0;
    for (int k : idx) mask |= std::uint64_t{1} << items[k];
    out.push_back(mask);
    int k = n - 1;
    while (k >= 0 && idx[k] == total - n + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (int r = k + 1; r < n; ++r) idx[r] = idx[r - 1] + 1;
  }
  return out;
}

}  // namespace detail

// Loss channel on one external mode; lost photons move to mode 0. Only
// equal lost counts on bra and ket are paired.
inline MALDensity apply_loss(const MALDensity& mu, const LossElement& loss, const GramMatrix& s,
                             const EvolveOptions& opt = {}) {
  require(loss.eta >= 0.0 && loss.eta <= 1.0, ErrorCode::InvalidIR, "eta outside [0, 1]");
  const int n = mu.n_photons();
  require(s.n() >= n, ErrorCode::SizeMismatch, "gram matrix smaller than photon count");
  std::vector<std::set<int>> extra(n);
  for (int p = 0; p < n; ++p)
    if (mu.basis->allowed_modes().contains(p, loss.mode)) extra[p].insert(0);
  MALDensity cur = detail::ensure_closed(mu, extra, opt);
  if (loss.eta == 1.0) return cur;
  const BasisIndex& basis = *cur.basis;
  OverlapCache overlap(s);
  DensityAccumulator acc;
  Mal a, b;
  std::vector<int> ta, tb;
  for (const auto& e : cur.entries) {
    basis.decode(e.row, a);
    basis.decode(e.col, b);
    ta.clear();
    tb.clear();
    for (int p = 0; p < n; ++p) {
      if (a[p] == loss.mode) ta.push_back(p);
      if (b[p] == loss.mode) tb.push_back(p);
    }
    const bool diag = e.row == e.col;
    const int nmax = static_cast<int>(std::min(ta.size(), tb.size()));
    const double half = 0.5 * static_cast<double>(ta.size() + tb.size());
    for (int k = 0; k <= nmax; ++k) {
      const double w = std::pow(loss.eta, half - k) * std::pow(1.0 - loss.eta, k);
      if (w == 0.0) continue;
      const auto la = detail::subsets_of_size(ta, k);
      const auto lb = detail::subsets_of_size(tb, k);
      for (std::uint64_t ma : la) {
        std::uint64_t i = e.row;
        for (int p : ta)
          if (ma >> p & 1)
            i -= static_cast<std::uint64_t>(basis.position(p, loss.mode) - basis.position(p, 0)) *
                 basis.stride(p);
        for (std::uint64_t mb : lb) {
          std::uint64_t j = e.col;
          for (int p : tb)
            if (mb >> p & 1)
              j -= static_cast<std::uint64_t>(basis.position(p, loss.mode) - basis.position(p, 0)) *
                   basis.stride(p);
          const cplx ov = overlap(mb, ma);
          if (ov == 0.0) continue;
          acc.add_image(diag, i, j, e.value * w * ov);
        }
      }
    }
  }
  return acc.finish(cur.basis, cur.prune_threshold);
}

}  // namespace qmal
