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

#include "test_support.hpp"

namespace qmal {
namespace {

using testing::Rng;

// Distinguishable photons do not interfere with each other, so each one
// lands independently with probability |U(m, t)|^2 for the composed U.
PatternTable classical_patterns(const CircuitIR& c) {
  const int m = c.modes;
  CMatrix total = CMatrix::Identity(m + 1, m + 1);
  for (const auto& o : c.ops)
    if (auto* u = std::get_if<op::Unitary>(&o)) total = total * make_component(u->spec, m).matrix;
  std::vector<std::vector<double>> dist;
  for (const auto& o : c.ops)
    if (auto* in = std::get_if<op::Inject>(&o)) {
      dist.emplace_back(m + 1, 0.0);
      for (int t = 0; t <= m; ++t) dist.back()[t] = std::norm(total(in->mode, t));
    }
  PatternTable out{{std::vector<int>(m + 1, 0), 1.0}};
  for (const auto& d : dist) {
    PatternTable next;
    for (const auto& [pat, p] : out)
      for (int t = 0; t <= m; ++t) {
        if (d[t] == 0.0) continue;
        auto q = pat;
        ++q[t];
        next[q] += p * d[t];
      }
    out = next;
  }
  return out;
}

TEST(Properties, OracleAgreesOnRandomCircuits) {
  Rng rng(2024);
  for (int t = 0; t < 60; ++t) {
    const auto c = testing::random_circuit(rng);
    RunOptions o;
    o.want_density = true;
    const auto d = oracle::compare(run(c, o), oracle::oracle_run(c));
    EXPECT_LT(d.max(), 1e-10) << "instance " << t;
  }
}

TEST(Properties, DistinguishablePhotonsPropagateClassically) {
  Rng rng(77);
  for (int t = 0; t < 30; ++t) {
    testing::RandomCircuitOptions ro;
    ro.max_losses = 0;
    ro.detect = false;
    auto c = testing::random_circuit(rng, ro);
    c.gram = library::gram_matrix(CMatrix::Identity(c.n_photons(), c.n_photons()));
    const auto want = classical_patterns(c);
    EXPECT_LT(oracle::table_diff(run(c).pattern_table(), want), 1e-12);
    auto st = oracle::oracle_run(c);
    EXPECT_LT(oracle::table_diff(st.branches.begin()->second.patterns, want), 1e-12);
  }
}

TEST(Properties, ProbabilitiesSumToOne) {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto c = testing::random_circuit(rng);
    const auto r = run(c);
    EXPECT_NEAR(r.herald_probability, 1.0, 1e-10);
    for (const auto& b : r.branches) EXPECT_NEAR(total_probability(b.patterns), 1.0, 1e-10);
  }
}

TEST(Properties, StoredDensitiesStayHermitianAndPsd) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto c = testing::random_circuit(rng);
    RunOptions o;
    o.want_density = true;
    for (const auto& b : run(c, o).branches) {
      const CMatrix d = b.state.to_dense();
      EXPECT_EQ((d - d.adjoint()).cwiseAbs().maxCoeff(), 0.0);
      const auto [keys, rho] = b.density->compact();
      Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
    }
  }
}

TEST(Properties, LossLimitsMatchOracle) {
  // Identity and all-ones Grams bracket the loss map.
  Rng rng(14);
  for (int t = 0; t < 10; ++t) {
    testing::RandomCircuitOptions ro;
    ro.detect = false;
    auto c = testing::random_circuit(rng, ro);
    for (int m = 1; m <= c.modes; ++m) c.ops.push_back(op::Loss{m, testing::uniform(rng)});
    const int n = c.n_photons();
    for (const CMatrix& g : {CMatrix(CMatrix::Identity(n, n)), CMatrix(CMatrix::Ones(n, n))}) {
      c.gram = library::gram_matrix(g);
      RunOptions o;
      o.want_density = true;
      EXPECT_LT(oracle::compare(run(c, o), oracle::oracle_run(c)).max(), 1e-10);
    }
  }
}

TEST(Properties, CascadeLayoutsAgree) {
  Rng rng(15);
  for (int t = 0; t < 5; ++t) {
    const auto c = testing::cascade_circuit(library::gram_matrix(testing::random_gram(rng, 4, 1 + t % 4)));
    const auto ref = run(c).pattern_table();
    for (bool restrict_basis : {true, false})
      for (bool ignore : {true, false}) {
        RunOptions o;
        o.restrict_basis = restrict_basis;
        o.ignore_stages = ignore;
        EXPECT_LT(oracle::table_diff(run(c, o).pattern_table(), ref), 1e-10);
      }
    RunOptions o;
    o.want_density = true;
    EXPECT_LT(oracle::compare(run(c, o), oracle::oracle_run(c)).max(), 1e-10);
  }
}

TEST(Properties, PruningOnlyDropsTinyEntries) {
  Rng rng(16);
  const auto c = testing::random_circuit(rng);
  RunOptions o;
  o.prune_threshold = 1e-14;
  EXPECT_LT(oracle::table_diff(run(c, o).pattern_table(), run(c).pattern_table()), 1e-12);
}

}  // namespace
}  // namespace qmal
