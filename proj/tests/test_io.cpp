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

namespace qmal {
namespace {

constexpr const char* kHom = R"({
  "modes": 2,
  "gram": {"matrix": [[1, 0.5], [0.5, 1]]},
  "ops": [
    {"inject": {"mode": 1, "internal": 1}},
    {"inject": {"mode": 2, "internal": 2}},
    {"bs": {"modes": [1, 2], "theta": 0.7853981633974483}},
    {"detect": {"modes": [1, 2]}}
  ]
})";

ErrorCode parse_code(const std::string& text, std::string* what = nullptr) {
  try {
    parse_circuit(text);
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.code();
  }
  ADD_FAILURE() << "parsed without error";
  return ErrorCode::InvalidIR;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

TEST(Parse, MinimalHom) {
  const auto c = parse_circuit(kHom);
  ASSERT_EQ(c.ops.size(), 4u);
  EXPECT_TRUE(std::holds_alternative<op::Inject>(c.ops[0]));
  EXPECT_TRUE(std::holds_alternative<op::Inject>(c.ops[1]));
  EXPECT_TRUE(std::holds_alternative<op::Unitary>(c.ops[2]));
  EXPECT_TRUE(std::holds_alternative<op::Detect>(c.ops[3]));
  EXPECT_EQ(std::get<op::Inject>(c.ops[1]).internal, 1);
  EXPECT_EQ(c.n_photons(), 2);
}

TEST(Parse, DetectOutOfRange) {
  EXPECT_EQ(parse_code(replace(kHom, "\"modes\": [1, 2]}}\n", "\"modes\": [1, 3]}}\n")),
            ErrorCode::SemanticError);
}

TEST(Parse, NonPsdGram) {
  std::string what;
  EXPECT_EQ(parse_code(replace(kHom, "[[1, 0.5], [0.5, 1]]", "[[1, 1.2], [1.2, 1]]"), &what),
            ErrorCode::SemanticError);
  EXPECT_NE(what.find("gram"), std::string::npos);
}

TEST(Parse, SyntaxErrorsCarryALine) {
  std::string what;
  EXPECT_EQ(parse_code(replace(kHom, "\"theta\": 0.78", "\"theta\": ,0.78"), &what), ErrorCode::SyntaxError);
  EXPECT_NE(what.find("line 7"), std::string::npos) << what;
  EXPECT_EQ(parse_code(replace(kHom, "\"bs\"", "\"mirror\"")), ErrorCode::SyntaxError);
  EXPECT_EQ(parse_code(replace(kHom, "\"theta\"", "\"angle\"")), ErrorCode::SyntaxError);
  EXPECT_EQ(parse_code(replace(kHom, "\"mode\": 1,", "\"mode\": 1.5,")), ErrorCode::SyntaxError);
}

TEST(Parse, HeraldForms) {
  const auto one = parse_circuit(replace(kHom, "\"modes\": [1, 2]}}\n", "\"modes\": [1, 2], \"herald\": [1, 1]}}\n"));
  EXPECT_EQ(std::get<op::Detect>(one.ops[3]).heralds, (std::vector<std::vector<int>>{{1, 1}}));
  const auto many =
      parse_circuit(replace(kHom, "\"modes\": [1, 2]}}\n", "\"modes\": [1, 2], \"herald\": [[2, 0], [0, 2]]}}\n"));
  EXPECT_EQ(std::get<op::Detect>(many.ops[3]).heralds.size(), 2u);
  EXPECT_EQ(parse_code(replace(kHom, "\"modes\": [1, 2]}}\n", "\"modes\": [1, 2], \"herald\": [1]}}\n")),
            ErrorCode::SemanticError);
}

TEST(Parse, AllOpKinds) {
  const auto c = parse_circuit(R"({
    "modes": 3,
    "gram": {"normal": {"mean": 0.9, "variance": 0.001, "seed": 3}},
    "loss_noise": {"variance": 0.0001, "seed": 5},
    "ops": [
      {"inject": {"mode": 1}}, {"inject": {"mode": 2}},
      {"phase": {"mode": 1, "phi": 0.2}},
      {"swap": {"modes": [2, 3]}},
      {"custom": {"modes": [1, 2], "matrix": [[0, 1], [1, 0]]}},
      {"bs": {"modes": [1, 3], "theta": 0.3, "eta": 0.9}},
      {"loss": {"mode": 2, "eta": 0.8}},
      {"detect": {"modes": [3]}},
      {"stage": {}}
    ],
    "measure": [{"name": "Z", "modes": [1, 2], "weights": {"1,0": 1, "0,1": -1}}],
    "outputs": {"density": true, "fidelity": "ideal"}
  })");
  EXPECT_EQ(c.ops.size(), 9u);
  EXPECT_EQ(c.gram.kind, GramSpec::Kind::Normal);
  ASSERT_TRUE(c.loss_noise.has_value());
  EXPECT_EQ(c.loss_noise->seed, 5u);
  ASSERT_EQ(c.measure.size(), 1u);
  EXPECT_EQ(c.measure[0].weights.at({0, 1}), -1.0);
  EXPECT_TRUE(c.want_density);
  EXPECT_TRUE(c.want_fidelity);
}

TEST(Output, StableAndComplete) {
  const auto c = parse_circuit(kHom);
  RunMetadata meta;
  meta.input_digest = "abc";
  const auto r1 = run(c, meta.options);
  const auto r2 = run(c, meta.options);
  const std::string a = dump_json(result_json(r1, c, space_report(c), meta));
  const std::string b = dump_json(result_json(r2, c, space_report(c), meta));
  EXPECT_EQ(a, b);
  const auto j = json::parse(a);
  EXPECT_EQ(j["metadata"]["version"], kVersion);
  EXPECT_EQ(j["metadata"]["input_digest"], "abc");
  for (const char* k : {"seed", "tolerances", "prune_threshold", "peak_dimension"})
    EXPECT_TRUE(j["metadata"].contains(k)) << k;
  EXPECT_DOUBLE_EQ(j["patterns"]["1,1"].get<double>(), 0.375);
  EXPECT_EQ(j["report"]["fock"], "10");
}

TEST(Output, SortedKeysAndFullPrecision) {
  const json j = {{"b", 0.1}, {"a", 1.0 / 3.0}};
  EXPECT_EQ(dump_json(j), "{\n  \"a\": 0.33333333333333331,\n  \"b\": 0.10000000000000001\n}\n");
}

TEST(Output, DensityTriples) {
  ExternalDensity rho;
  rho.n_photons = 1;
  rho.n_modes = 2;
  rho.add({1}, {1}, 0.5);
  rho.add({2}, {1}, cplx(0.0, 0.5));
  const auto j = density_json(rho);
  EXPECT_EQ(j["basis"], json::parse("[[1],[2]]"));
  EXPECT_EQ(j["row"].size(), 2u);
}

}  // namespace
}  // namespace qmal
