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


#include <gtest/gtest.h>

#include "qmal/basis.hpp"
#include "qmal/state.hpp"
#include "test_support.hpp"

namespace qmal {
namespace {

TEST(Basis, TwoPhotonsTwoModes) {
  const auto b = build_basis(AllowedModes::uniform(2, 2, false));
  ASSERT_EQ(b.dim(), 4u);
  const std::vector<Mal> want{{1, 1}, {1, 2}, {2, 1}, {2, 2}};
  for (std::uint64_t i = 0; i < 4; ++i) EXPECT_EQ(b.mal_of(i), want[i]);
}

TEST(Basis, BellRestriction) {
  AllowedModes a;
  for (int p = 1; p <= 4; ++p) a.sets.push_back({p, 5, 6, 7, 8});
  EXPECT_EQ(build_basis(a).dim(), 625u);
}

TEST(Basis, RoundTripOnRaggedSets) {
  AllowedModes a{{{0, 3}, {1, 2, 4}, {2}, {0, 1, 2, 3}}};
  const auto b = build_basis(a);
  EXPECT_EQ(b.dim(), 2u * 3u * 1u * 4u);
  for (std::uint64_t i = 0; i < b.dim(); ++i) EXPECT_EQ(b.index_of(b.mal_of(i)), i);
  EXPECT_FALSE(b.find({3, 3, 2, 0}).has_value());
}

TEST(Basis, DimensionCap) {
  EXPECT_THROW(build_basis(AllowedModes::uniform(4, 9, true), 1000), Error);
  try {
    build_basis(AllowedModes::uniform(4, 9, true), 1000);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionOverflow);
  }
}

TEST(Basis, EmptySetRejected) {
  try {
    build_basis(AllowedModes{{{1}, {}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyAllowedSet);
  }
}

TEST(PatternOf, Examples) {
  EXPECT_EQ(pattern_of({1, 2}, {1, 2}).counts, (std::vector<int>{1, 1}));
  EXPECT_EQ(pattern_of({1, 1}, {1, 2}).counts, (std::vector<int>{2, 0}));
  EXPECT_EQ(pattern_of({1, 0, 2}, {2}).counts, (std::vector<int>{1}));
  EXPECT_EQ(pattern_of({1, 0, 3}, {2}).counts, (std::vector<int>{0}));
  EXPECT_EQ(full_counts({1, 0, 2, 2}, 3), (std::vector<int>{1, 1, 2, 0}));
}

TEST(PatternOf, PermutationsShareAPattern) {
  const auto b = build_basis(AllowedModes::uniform(3, 3, true));
  std::map<std::vector<int>, int> groups;
  for (std::uint64_t i = 0; i < b.dim(); ++i) ++groups[full_counts(b.mal_of(i), 3)];
  int total = 0;
  for (const auto& [d, n] : groups) {
    double multinomial = 6.0;
    for (int c : d)
      for (int k = 2; k <= c; ++k) multinomial /= k;
    EXPECT_EQ(n, static_cast<int>(multinomial));
    total += n;
  }
  EXPECT_EQ(total, 64);
}

TEST(State, InitPure) {
  auto b = std::make_shared<const BasisIndex>(AllowedModes::uniform(2, 2, false), 1 << 20);
  const auto mu = init_pure({1, 2}, b);
  EXPECT_EQ(mu.at(Mal{1, 2}, Mal{1, 2}), cplx(1.0));
  EXPECT_DOUBLE_EQ(mu.trace(), 1.0);
  EXPECT_THROW(init_pure({0, 2}, b), Error);
}

TEST(State, BellInputLayout) {
  AllowedModes a;
  for (int p = 1; p <= 4; ++p) a.sets.push_back({p, 5, 6, 7, 8});
  auto b = std::make_shared<const BasisIndex>(a, 1 << 20);
  const auto mu = init_pure({1, 2, 3, 4}, b);
  ASSERT_EQ(mu.entries.size(), 1u);
  EXPECT_EQ(mu.entries[0].row, mu.entries[0].col);
  EXPECT_EQ(mu.entries[0].value, cplx(1.0));
}

TEST(State, AccumulatorKeepsHermitianHalf) {
  DensityAccumulator acc;
  acc.add(2, 1, cplx(0.5, 0.25));
  acc.add(1, 1, 0.3);
  acc.add_image(false, 3, 3, cplx(0.1, 0.7));
  auto b = std::make_shared<const BasisIndex>(AllowedModes::uniform(2, 2, false), 1 << 20);
  const auto mu = acc.finish(b);
  EXPECT_EQ(mu.at(1, 2), cplx(0.5, -0.25));
  EXPECT_EQ(mu.at(2, 1), cplx(0.5, 0.25));
  EXPECT_DOUBLE_EQ(mu.at(3, 3).real(), 0.2);
  const CMatrix d = mu.to_dense();
  EXPECT_EQ((d - d.adjoint()).cwiseAbs().maxCoeff(), 0.0);
}

ExternalDensity pure_external(int n_photons, int n_modes, const std::vector<std::pair<Mal, cplx>>& amps) {
  ExternalDensity r;
  r.n_photons = n_photons;
  r.n_modes = n_modes;
  for (const auto& [a, x] : amps)
    for (const auto& [b, y] : amps) r.add(a, b, x * std::conj(y));
  return r;
}

TEST(Fidelity, PureAndOrthogonal) {
  const double h = 1.0 / std::sqrt(2.0);
  const auto p = pure_external(1, 2, {{{1}, h}, {{2}, h}});
  const auto m = pure_external(1, 2, {{{1}, h}, {{2}, -h}});
  EXPECT_NEAR(fidelity(p, p), 1.0, 1e-15);
  EXPECT_NEAR(fidelity(p, m), 0.0, 1e-15);
  EXPECT_NEAR(fidelity(p, p), fidelity(p, p), 0.0);
}

TEST(Fidelity, MixedReferenceRejected) {
  auto mixed = pure_external(1, 2, {{{1}, 1.0}});
  mixed.add({2}, {2}, 1.0);
  try {
    fidelity(mixed, mixed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RefNotPure);
  }
}

TEST(Fidelity, InvariantUnderRelabelling) {
  // Swapping mode names 1 <-> 2 in both operands leaves the trace unchanged.
  const auto ref = pure_external(1, 2, {{{1}, 0.6}, {{2}, cplx(0.0, 0.8)}});
  auto rho = pure_external(1, 2, {{{1}, 0.8}, {{2}, 0.6}});
  rho.add({1}, {1}, 0.5);
  const auto ref2 = pure_external(1, 2, {{{2}, 0.6}, {{1}, cplx(0.0, 0.8)}});
  auto rho2 = pure_external(1, 2, {{{2}, 0.8}, {{1}, 0.6}});
  rho2.add({2}, {2}, 0.5);
  EXPECT_NEAR(fidelity(ref, rho), fidelity(ref2, rho2), 1e-15);
}

TEST(EncodedDensity, Examples) {
  const auto plus = encoded_density(1, 0, 0);
  EXPECT_LT((plus.rho - Eigen::Matrix2cd::Constant(0.5)).cwiseAbs().maxCoeff(), 1e-15);
  const auto zero = encoded_density(0, 0, 1);
  EXPECT_EQ(zero.rho(0, 0), cplx(1.0));
  EXPECT_EQ(zero.rho(1, 1), cplx(0.0));
  const auto half = encoded_density(0.5, 0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(half.rho);
  EXPECT_NEAR(es.eigenvalues()(0), 0.25, 1e-15);
  EXPECT_NEAR(es.eigenvalues()(1), 0.75, 1e-15);
  EXPECT_FALSE(half.over_length);
  EXPECT_TRUE(encoded_density(1, 1, 0).over_length);
  EXPECT_THROW(encoded_density(1.5, 0, 0), Error);
}

TEST(Expectation, Examples) {
  PatternTable probs{{{1, 0}, 0.5}, {{0, 1}, 0.5}};
  PatternTable w{{{1, 0}, 1.0}, {{0, 1}, -1.0}};
  EXPECT_DOUBLE_EQ(expectation(probs, w), 0.0);
  EXPECT_DOUBLE_EQ(expectation({{{1, 0}, 1.0}}, {{{1, 0}, 1.0}}), 1.0);
  try {
    expectation({{{2, 0}, 0.5}}, w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnweightedPattern);
  }
}

}  // namespace
}  // namespace qmal
