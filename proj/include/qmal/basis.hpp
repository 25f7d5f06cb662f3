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
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qmal/common.hpp"

namespace qmal {

// Entry p is the external mode of photon p; 0 holds lost or detected photons.
using Mal = std::vector<int>;

inline std::uint64_t default_dim_cap() {
  if (const char* env = std::getenv("QMAL_DIM_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return v;
  }
  return std::uint64_t{1} << 26;
}

struct AllowedModes {
  std::vector<std::vector<int>> sets;

  static AllowedModes uniform(int n_photons, int n_modes, bool with_zero) {
    AllowedModes a;
    std::vector<int> s;
    for (int m = with_zero ? 0 : 1; m <= n_modes; ++m) s.push_back(m);
    a.sets.assign(n_photons, s);
    return a;
  }
  int n_photons() const { return static_cast<int>(sets.size()); }
  bool contains(int photon, int mode) const {
    return std::binary_search(sets[photon].begin(), sets[photon].end(), mode);
  }
};

class BasisIndex {
 public:
  BasisIndex() = default;

  BasisIndex(const AllowedModes& allowed, std::uint64_t cap) {
    const int n = allowed.n_photons();
    sets_.resize(n);
    pos_.resize(n);
    stride_.assign(n, 1);
    for (int p = 0; p < n; ++p) {
      std::set<int> s(allowed.sets[p].begin(), allowed.sets[p].end());
      require(!s.empty(), ErrorCode::EmptyAllowedSet, "photon " + std::to_string(p + 1));
      require(*s.begin() >= 0, ErrorCode::BadModes, "negative mode");
      sets_[p].assign(s.begin(), s.end());
      max_mode_ = std::max(max_mode_, sets_[p].back());
    }
    dim_ = 1;
    for (int p = n - 1; p >= 0; --p) {
      stride_[p] = dim_;
      const std::uint64_t k = sets_[p].size();
      require(dim_ <= cap / k, ErrorCode::DimensionOverflow,
              "basis dimension exceeds cap " + std::to_string(cap));
      dim_ *= k;
    }
    for (int p = 0; p < n; ++p) {
      pos_[p].assign(max_mode_ + 1, -1);
      for (std::size_t k = 0; k < sets_[p].size(); ++k) pos_[p][sets_[p][k]] = static_cast<int>(k);
    }
  }

  std::uint64_t dim() const { return dim_; }
  int n_photons() const { return static_cast<int>(sets_.size()); }
  int max_mode() const { return max_mode_; }
  const std::vector<int>& allowed(int p) const { return sets_[p]; }
  AllowedModes allowed_modes() const { return AllowedModes{sets_}; }
  std::uint64_t stride(int p) const { return stride_[p]; }

  // Position of `mode` in photon p's allowed list, or -1.
  int position(int p, int mode) const {
    return (mode >= 0 && mode <= max_mode_) ? pos_[p][mode] : -1;
  }
  int digit(std::uint64_t index, int p) const {
    return static_cast<int>((index / stride_[p]) % sets_[p].size());
  }
  int mode_at(std::uint64_t index, int p) const { return sets_[p][digit(index, p)]; }

  std::optional<std::uint64_t> find(const Mal& mal) const {
    if (static_cast<int>(mal.size()) != n_photons()) return std::nullopt;
    std::uint64_t idx = 0;
    for (int p = 0; p < n_photons(); ++p) {
      const int k = position(p, mal[p]);
      if (k < 0) return std::nullopt;
      idx += static_cast<std::uint64_t>(k) * stride_[p];
    }
    return idx;
  }

  std::uint64_t index_of(const Mal& mal) const {
    auto idx = find(mal);
    require(idx.has_value(), ErrorCode::NotInBasis, "mode assignment list not representable");
    return *idx;
  }

  void decode(std::uint64_t index, Mal& out) const {
    out.resize(n_photons());
    for (int p = 0; p < n_photons(); ++p) out[p] = mode_at(index, p);
  }
  Mal mal_of(std::uint64_t index) const {
    Mal m;
    decode(index, m);
    return m;
  }

  bool operator==(const BasisIndex& o) const { return sets_ == o.sets_; }

 private:
  std::vector<std::vector<int>> sets_;
  std::vector<std::vector<int>> pos_;
  std::vector<std::uint64_t> stride_;
  std::uint64_t dim_ = 1;
  int max_mode_ = 0;
};

inline BasisIndex build_basis(const AllowedModes& allowed, std::uint64_t cap = default_dim_cap()) {
  return BasisIndex(allowed, cap);
}

// Occupation counts over a declared list of modes.
struct DetectionPattern {
  std::vector<int> modes;
  std::vector<int> counts;

  int total() const {
    int t = 0;
    for (int c : counts) t += c;
    return t;
  }
  bool operator==(const DetectionPattern&) const = default;
  auto operator<=>(const DetectionPattern&) const = default;
};

inline std::string pattern_key(const std::vector<int>& counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(counts[i]);
  }
  return s;
}

inline DetectionPattern pattern_of(const Mal& mal, const std::vector<int>& modes) {
  DetectionPattern d{modes, std::vector<int>(modes.size(), 0)};
  for (int m : mal) {
    if (m == 0) continue;
    for (std::size_t k = 0; k < modes.size(); ++k)
      if (modes[k] == m) ++d.counts[k];
  }
  return d;
}

// Counts over modes 0..n_modes; slot 0 counts removed photons.
inline std::vector<int> full_counts(const Mal& mal, int n_modes) {
  std::vector<int> c(n_modes + 1, 0);
  for (int m : mal) ++c[m];
  return c;
}

}  // namespace qmal
