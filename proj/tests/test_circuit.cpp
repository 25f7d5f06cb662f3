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

#include "qmal/io.hpp"
#include "test_support.hpp"

namespace qmal {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidIR;
}

TEST(Connectivity, BellPhotonsReachFiveModes) {
  const auto a = connectivity(library::bell_generator(library::uniform_visibility(1.0)));
  ASSERT_EQ(a.n_photons(), 4);
  for (int p = 0; p < 4; ++p) {
    // Detection exposes mode 0 on top of the five external modes.
    std::vector<int> want{0, p + 1, 5, 6, 7, 8};
    EXPECT_EQ(a.sets[p], want);
  }
}

TEST(Connectivity, CascadeExample) {
  const auto a = connectivity(testing::cascade_circuit(library::uniform_visibility(0.5)));
  std::vector<int> sizes;
  for (const auto& s : a.sets) sizes.push_back(static_cast<int>(std::count_if(s.begin(), s.end(), [](int m) { return m > 0; })));
  EXPECT_EQ(sizes, (std::vector<int>{4, 4, 3, 2}));
}

TEST(Connectivity, NoComponents) {
  CircuitIR c;
  c.modes = 3;
  c.ops = {op::Inject{1, -1}, op::Inject{3, -1}};
  const auto a = connectivity(c);
  EXPECT_EQ(a.sets, (std::vector<std::vector<int>>{{1}, {3}}));
}

TEST(Run, HongOuMandel) {
  for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto t = run(library::hom(s)).pattern_table();
    const double p11 = t.count({1, 1}) ? t.at({1, 1}) : 0.0;
    EXPECT_NEAR(p11, (1 - s * s) / 2, 1e-12);
  }
}

TEST(Run, IdealBellGenerator) {
  auto c = library::bell_generator(library::uniform_visibility(1.0));
  c.want_fidelity = true;
  const auto r = run(c);
  EXPECT_NEAR(r.herald_probability, 3.0 / 16.0, 1e-12);
  EXPECT_EQ(r.branches.size(), 6u);
  EXPECT_EQ(r.peak_dimension, 625u);
  ASSERT_TRUE(r.mean_fidelity.has_value());
  EXPECT_NEAR(*r.mean_fidelity, 1.0, 1e-12);
}

TEST(Run, HeraldImpossible) {
  auto c = library::hom(1.0);
  std::get<op::Detect>(c.ops.back()).heralds = {{1, 1}};
  EXPECT_EQ(code_of([&] { run(c); }), ErrorCode::HeraldImpossible);
}

TEST(Run, InvalidCircuitsRejected) {
  auto reuse = library::hom(0.0);
  reuse.ops.push_back(library::bs(1, 2));
  EXPECT_EQ(code_of([&] { run(reuse); }), ErrorCode::InvalidIR);

  CircuitIR late;
  late.modes = 2;
  late.ops = {op::Inject{1, -1}, library::bs(1, 2), op::Inject{2, -1}};
  EXPECT_EQ(code_of([&] { run(late); }), ErrorCode::InvalidIR);
}

TEST(Run, RestrictionMatchesUnrestricted) {
  const auto c = testing::cascade_circuit(library::uniform_visibility(0.7));
  RunOptions full;
  full.restrict_basis = false;
  const auto a = run(c);
  const auto b = run(c, full);
  EXPECT_LT(oracle::table_diff(a.pattern_table(), b.pattern_table()), 1e-12);
  EXPECT_LT(a.peak_dimension, b.peak_dimension);
}

TEST(Run, EncodedMeasurement) {
  auto c = library::bell_generator(library::uniform_visibility(1.0));
  Measurement zz;
  zz.name = "ZZ";
  zz.modes = {1, 2, 3, 4};
  zz.weights = {{{1, 0, 1, 0}, 1.0}, {{0, 1, 0, 1}, 1.0}, {{1, 0, 0, 1}, -1.0}, {{0, 1, 1, 0}, -1.0}};
  c.measure.push_back(zz);
  // Heralds that leave one photon per rail pair (1,2), (3,4).
  std::get<op::Detect>(c.ops.back()).heralds = {{1, 1, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}};
  for (const auto& b : run(c).branches) EXPECT_NEAR(std::abs(b.expectations.at("ZZ")), 1.0, 1e-12);
}

TEST(SpaceReport, TwoPhotonsTwoModes) {
  const auto r = space_report(library::hom(0.0));
  EXPECT_EQ(r.fock, 10);
  EXPECT_EQ(r.unsymmetrized, 16);
  EXPECT_EQ(r.mal, 4);
}

TEST(SpaceReport, BellGenerator) {
  const auto r = space_report(library::bell_generator(library::uniform_visibility(1.0)));
  EXPECT_EQ(r.fock, 52360);
  EXPECT_EQ(r.mal, 4096);
  EXPECT_EQ(r.restricted, 625);
  EXPECT_EQ(r.peak, 625);
}

TEST(SpaceReport, LargeCountsAreExact) {
  EXPECT_EQ(fock_dimension(32, 64), binomial(2079, 32));
  EXPECT_EQ(product_dimension({1, 2, 2, 3, 4}), 48);
  EXPECT_EQ(binomial(109, 10).str(), "42634215112710");
}

TEST(Lower, NormalGramIsSeeded) {
  auto c = library::bell_generator(library::normal_visibility(0.9, 0.01, 42));
  const auto a = lower(c);
  const auto b = lower(c);
  EXPECT_EQ((a.gram.entries - b.gram.entries).cwiseAbs().maxCoeff(), 0.0);
  c.gram.seed = 43;
  EXPECT_GT((lower(c).gram.entries - a.gram.entries).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(a.gram.entries.diagonal().real().minCoeff(), 1.0, 0.0);
}

TEST(Lower, IdealIgnoresLoss) {
  auto c = library::bell_generator(library::uniform_visibility(0.5), 0.9);
  const auto lc = lower(c, LowerOptions{true});
  for (const auto& o : lc.ops) EXPECT_NE(o.kind, LoweredOp::Kind::Loss);
  EXPECT_NEAR((lc.gram.entries - CMatrix::Ones(4, 4)).cwiseAbs().maxCoeff(), 0.0, 0.0);
}

}  // namespace
}  // namespace qmal
