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

// Ready-made circuits.

#include <numbers>
#include <optional>
#include <vector>

#include "qmal/circuit.hpp"

namespace qmal::library {

inline constexpr double kBalanced = std::numbers::pi / 4;

inline op::Unitary bs(int a, int b, double theta = kBalanced, std::optional<double> eta = {}) {
  return op::Unitary{component::BeamSplitter{theta, a, b}, eta};
}

inline GramSpec gram_matrix(const CMatrix& m) {
  GramSpec g;
  g.kind = GramSpec::Kind::Matrix;
  g.matrix = m;
  return g;
}

inline GramSpec uniform_visibility(double v) {
  GramSpec g;
  g.kind = GramSpec::Kind::UniformVisibility;
  g.visibility = v;
  return g;
}

inline GramSpec normal_visibility(double mean, double variance, std::uint64_t seed) {
  GramSpec g;
  g.kind = GramSpec::Kind::Normal;
  g.mean = mean;
  g.variance = variance;
  g.seed = seed;
  return g;
}

// Two photons with overlap s on a balanced splitter, both outputs detected.
inline CircuitIR hom(cplx s) {
  CircuitIR c;
  c.modes = 2;
  CMatrix g(2, 2);
  g << 1.0, s, std::conj(s), 1.0;
  c.gram = gram_matrix(g);
  c.ops = {op::Inject{1, 0}, op::Inject{2, 1}, bs(1, 2), op::Detect{{1, 2}, {}}};
  return c;
}

// 2k photons in modes 1..2k, each split against mode i + 2k, then a two-layer
// network on the detector modes 2k+1..4k. Detectors keep every outcome.
inline CircuitIR ghz_generator(int k, const GramSpec& gram, std::optional<double> eta = {}) {
  CircuitIR c;
  c.modes = 4 * k;
  c.gram = gram;
  for (int i = 1; i <= 2 * k; ++i) c.ops.push_back(op::Inject{i, -1});
  for (int i = 1; i <= 2 * k; ++i) c.ops.push_back(bs(i, i + 2 * k, kBalanced, eta));
  const int d = 2 * k;
  for (int i = 1; i <= k; ++i) c.ops.push_back(bs(d + i, d + 2 * k + 1 - i, kBalanced, eta));
  for (int i = 1; i <= k; ++i) {
    const int a = d + 2 * i - 1, b = d + 2 * i;
    c.ops.push_back(i % 2 ? bs(a, b, kBalanced, eta) : bs(b, a, kBalanced, eta));
  }
  std::vector<int> det;
  for (int m = d + 1; m <= 4 * k; ++m) det.push_back(m);
  c.ops.push_back(op::Detect{det, {}});
  return c;
}

// Heralds that leave one photon in each dual-rail pair.
inline std::vector<std::vector<int>> bell_heralds() {
  return {{1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}, {1, 0, 0, 1}, {0, 1, 1, 0}};
}

// Dual-rail qubits on modes (1,2) and (3,4); detectors on 5..8.
inline CircuitIR bell_generator(const GramSpec& gram, std::optional<double> eta = {}) {
  CircuitIR c = ghz_generator(2, gram, eta);
  std::get<op::Detect>(c.ops.back()).heralds = bell_heralds();
  return c;
}

}  // namespace qmal::library
