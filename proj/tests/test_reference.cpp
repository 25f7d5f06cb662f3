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


// Values frozen from the independent permanent-based reference in
// reference/bell_fock.py.

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace qmal {
namespace {

TEST(Reference, BellHeraldProbabilityByVisibility) {
  const std::vector<std::pair<double, double>> frozen{
      {1.0, 0.187500000000000}, {0.9, 0.196875000000002}, {0.5, 0.234375000000002}, {0.0, 0.281250000000000}};
  for (const auto& [v, p] : frozen) {
    const auto r = run(library::bell_generator(library::uniform_visibility(v)));
    EXPECT_NEAR(r.herald_probability, p, 1e-12) << "V = " << v;
  }
}

TEST(Reference, PartialVisibilityBellMatchesOracle) {
  const auto c = library::bell_generator(library::uniform_visibility(0.9));
  RunOptions o;
  o.want_density = true;
  o.want_fidelity = true;
  const auto r = run(c, o);
  ASSERT_TRUE(r.mean_fidelity.has_value());
  EXPECT_GT(*r.mean_fidelity, 0.0);
  EXPECT_LT(*r.mean_fidelity, 1.0);
  EXPECT_LT(oracle::compare(r, oracle::oracle_run(c)).max(), 1e-10);
}

}  // namespace
}  // namespace qmal
