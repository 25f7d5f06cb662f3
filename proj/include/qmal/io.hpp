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

// Circuit files (JSON) and result serialization.

#include <cstdio>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qmal/circuit.hpp"

namespace qmal {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

[[noreturn]] inline void syntax(const std::string& where, const std::string& why) {
  throw Error(ErrorCode::SyntaxError, where + ": " + why);
}

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) syntax(where, std::string("missing field '") + key + "'");
  return obj.at(key);
}

inline int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) syntax(where, "expected an integer");
  return v.get<int>();
}

inline double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) syntax(where, "expected a number");
  return v.get<double>();
}

inline std::vector<int> as_int_list(const json& v, const std::string& where) {
  if (!v.is_array()) syntax(where, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_int(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline cplx as_complex(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  syntax(where, "expected a number or [re, im]");
}

inline CMatrix as_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) syntax(where, "expected a non-empty matrix");
  const auto n = static_cast<Eigen::Index>(v.size());
  Eigen::Index cols = -1;
  CMatrix m;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array()) syntax(where, "matrix rows must be arrays");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(n, cols);
    }
    if (static_cast<Eigen::Index>(row.size()) != cols) syntax(where, "ragged matrix");
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = as_complex(row[static_cast<std::size_t>(j)], where);
  }
  return m;
}

inline std::vector<int> parse_pattern_key(const std::string& key, const std::string& where) {
  std::vector<int> out;
  std::stringstream ss(key);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      syntax(where, "bad pattern key '" + key + "'");
    }
  }
  return out;
}

inline void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) syntax(where, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* x : keys) ok = ok || k == x;
    if (!ok) syntax(where, "unknown field '" + k + "'");
  }
}

inline int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

}  // namespace detail

inline CircuitIR circuit_from_json(const json& j) {
  using namespace detail;
  CircuitIR c;
  only_keys(j, {"modes", "gram", "ops", "loss_noise", "measure", "outputs"}, "circuit");
  c.modes = as_int(field(j, "modes", "circuit"), "modes");

  const auto& g = field(j, "gram", "circuit");
  only_keys(g, {"matrix", "uniform_visibility", "normal"}, "gram");
  if (g.size() != 1) syntax("gram", "expected exactly one of matrix, uniform_visibility, normal");
  if (g.contains("matrix")) {
    c.gram.kind = GramSpec::Kind::Matrix;
    c.gram.matrix = as_matrix(g["matrix"], "gram.matrix");
  } else if (g.contains("uniform_visibility")) {
    c.gram.kind = GramSpec::Kind::UniformVisibility;
    c.gram.visibility = as_number(g["uniform_visibility"], "gram.uniform_visibility");
  } else {
    const auto& nrm = g["normal"];
    only_keys(nrm, {"mean", "variance", "seed"}, "gram.normal");
    c.gram.kind = GramSpec::Kind::Normal;
    c.gram.mean = as_number(field(nrm, "mean", "gram.normal"), "gram.normal.mean");
    c.gram.variance = as_number(field(nrm, "variance", "gram.normal"), "gram.normal.variance");
    c.gram.seed = static_cast<std::uint64_t>(as_int(field(nrm, "seed", "gram.normal"), "gram.normal.seed"));
  }

  if (j.contains("loss_noise")) {
    const auto& ln = j["loss_noise"];
    only_keys(ln, {"variance", "seed"}, "loss_noise");
    LossNoise noise;
    noise.variance = as_number(field(ln, "variance", "loss_noise"), "loss_noise.variance");
    noise.seed = static_cast<std::uint64_t>(as_int(field(ln, "seed", "loss_noise"), "loss_noise.seed"));
    c.loss_noise = noise;
  }

  const auto& ops = field(j, "ops", "circuit");
  if (!ops.is_array()) syntax("ops", "expected an array");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string at = "ops[" + std::to_string(i) + "]";
    const auto& o = ops[i];
    if (!o.is_object() || o.size() != 1) syntax(at, "expected an object with one tag");
    const std::string tag = o.begin().key();
    const auto& body = o.begin().value();
    const std::string w = at + "." + tag;
    if (tag == "inject") {
      only_keys(body, {"mode", "internal"}, w);
      op::Inject in;
      in.mode = as_int(field(body, "mode", w), w + ".mode");
      if (body.contains("internal")) in.internal = as_int(body["internal"], w + ".internal") - 1;
      if (body.contains("internal") && in.internal < 0) syntax(w + ".internal", "indices start at 1");
      c.ops.push_back(in);
    } else if (tag == "bs") {
      only_keys(body, {"modes", "theta", "eta"}, w);
      const auto m = as_int_list(field(body, "modes", w), w + ".modes");
      if (m.size() != 2) syntax(w + ".modes", "a beam splitter takes two modes");
      op::Unitary u{component::BeamSplitter{as_number(field(body, "theta", w), w + ".theta"), m[0], m[1]}, {}};
      if (body.contains("eta")) u.eta = as_number(body["eta"], w + ".eta");
      c.ops.push_back(u);
    } else if (tag == "phase") {
      only_keys(body, {"mode", "phi"}, w);
      c.ops.push_back(op::Unitary{component::Phase{as_number(field(body, "phi", w), w + ".phi"),
                                                   as_int(field(body, "mode", w), w + ".mode")},
                                  {}});
    } else if (tag == "swap") {
      only_keys(body, {"modes"}, w);
      const auto m = as_int_list(field(body, "modes", w), w + ".modes");
      if (m.size() != 2) syntax(w + ".modes", "a swap takes two modes");
      c.ops.push_back(op::Unitary{component::Swap{m[0], m[1]}, {}});
    } else if (tag == "custom") {
      only_keys(body, {"modes", "matrix"}, w);
      c.ops.push_back(op::Unitary{component::Custom{as_int_list(field(body, "modes", w), w + ".modes"),
                                                    as_matrix(field(body, "matrix", w), w + ".matrix")},
                                  {}});
    } else if (tag == "loss") {
      only_keys(body, {"mode", "eta"}, w);
      c.ops.push_back(op::Loss{as_int(field(body, "mode", w), w + ".mode"),
                               as_number(field(body, "eta", w), w + ".eta")});
    } else if (tag == "detect") {
      only_keys(body, {"modes", "herald"}, w);
      op::Detect d;
      d.modes = as_int_list(field(body, "modes", w), w + ".modes");
      if (body.contains("herald")) {
        const auto& h = body["herald"];
        if (!h.is_array()) syntax(w + ".herald", "expected a pattern or a list of patterns");
        if (!h.empty() && h[0].is_array()) {
          for (std::size_t k = 0; k < h.size(); ++k)
            d.heralds.push_back(as_int_list(h[k], w + ".herald[" + std::to_string(k) + "]"));
        } else {
          d.heralds.push_back(as_int_list(h, w + ".herald"));
        }
      }
      c.ops.push_back(d);
    } else if (tag == "stage") {
      only_keys(body, {}, w);
      c.ops.push_back(op::Stage{});
    } else {
      syntax(at, "unknown op '" + tag + "'");
    }
  }

  if (j.contains("measure")) {
    const auto& ms = j["measure"];
    if (!ms.is_array()) syntax("measure", "expected an array");
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string w = "measure[" + std::to_string(i) + "]";
      only_keys(ms[i], {"name", "modes", "weights"}, w);
      Measurement m;
      const auto& name = field(ms[i], "name", w);
      if (!name.is_string()) syntax(w + ".name", "expected a string");
      m.name = name.get<std::string>();
      m.modes = as_int_list(field(ms[i], "modes", w), w + ".modes");
      const auto& wt = field(ms[i], "weights", w);
      if (!wt.is_object()) syntax(w + ".weights", "expected an object");
      for (const auto& [k, v] : wt.items())
        m.weights[parse_pattern_key(k, w + ".weights")] = as_number(v, w + ".weights." + k);
      c.measure.push_back(m);
    }
  }

  if (j.contains("outputs")) {
    const auto& o = j["outputs"];
    only_keys(o, {"density", "fidelity"}, "outputs");
    if (o.contains("density")) {
      if (!o["density"].is_boolean()) syntax("outputs.density", "expected a boolean");
      c.want_density = o["density"].get<bool>();
    }
    if (o.contains("fidelity")) {
      const auto& f = o["fidelity"];
      if (f.is_boolean()) c.want_fidelity = f.get<bool>();
      else if (f.is_string() && f.get<std::string>() == "ideal") c.want_fidelity = true;
      else syntax("outputs.fidelity", "expected \"ideal\" or a boolean");
    }
  }
  return c;
}

// Parses and validates a circuit file.
inline CircuitIR parse_circuit(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SyntaxError,
                "line " + std::to_string(detail::line_of(text, e.byte)) + ": malformed JSON");
  }
  CircuitIR c = circuit_from_json(j);
  validate_circuit(c, ErrorCode::SemanticError);
  try {
    DrawInfo info;
    (void)validate_gram(gram_entries(c, info));
  } catch (const Error& e) {
    throw Error(ErrorCode::SemanticError, std::string("gram: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Output.

// Serializes with sorted keys and %.17g numbers.
inline void dump_json(const json& j, std::string& out, int indent = 2, int depth = 0) {
  auto pad = [&](int d) { out.append(static_cast<std::size_t>(indent * d), ' '); };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        pad(depth + 1);
        out += json(k).dump();
        out += ": ";
        dump_json(v, out, indent, depth + 1);
      }
      out += "\n";
      pad(depth);
      out += "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalar = true;
      for (const auto& v : j) scalar = scalar && !v.is_structured();
      if (scalar) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_json(j[i], out, indent, depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        pad(depth + 1);
        dump_json(j[i], out, indent, depth + 1);
      }
      out += "\n";
      pad(depth);
      out += "]";
      return;
    }
    case json::value_t::number_float: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", j.get<double>());
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

inline std::string dump_json(const json& j) {
  std::string s;
  dump_json(j, s);
  s += "\n";
  return s;
}

inline std::string big_string(const BigInt& v) { return v.str(); }

inline json report_json(const SpaceReport& r) {
  json j;
  j["photons"] = r.n_photons;
  j["modes"] = r.n_modes;
  j["fock"] = big_string(r.fock);
  j["unsymmetrized"] = big_string(r.unsymmetrized);
  j["mal"] = big_string(r.mal);
  j["mal_with_zero"] = big_string(r.mal_with_zero);
  j["restricted"] = big_string(r.restricted);
  j["physical_modes_per_photon"] = r.physical_modes;
  json stages = json::array();
  for (const auto& d : r.stage_dims) stages.push_back(big_string(d));
  j["stage_dimensions"] = stages;
  j["peak"] = big_string(r.peak);
  return j;
}

inline json density_json(const ExternalDensity& rho) {
  const auto [keys, m] = rho.compact();
  json basis = json::array();
  for (auto k : keys) basis.push_back(rho.mal_of(k));
  json row = json::array(), col = json::array(), re = json::array(), im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (m(i, k) == 0.0) continue;
      row.push_back(i);
      col.push_back(k);
      re.push_back(m(i, k).real());
      im.push_back(m(i, k).imag());
    }
  }
  return json{{"basis", basis}, {"row", row}, {"col", col}, {"re", re}, {"im", im}};
}

struct RunMetadata {
  std::string input_digest;
  RunOptions options;
};

inline json result_json(const SimulationResult& res, const CircuitIR& c, const SpaceReport& report,
                        const RunMetadata& meta) {
  json j;
  json patterns = json::object();
  for (const auto& b : res.branches) {
    if (res.has_detectors) {
      patterns[record_key(b.record)] = patterns.value(record_key(b.record), 0.0) + b.probability;
    }
  }
  if (!res.has_detectors) {
    for (const auto& [d, p] : res.pattern_table()) patterns[pattern_key(d)] = p;
  }
  j["patterns"] = patterns;

  json modes = json::array();
  if (res.has_detectors) {
    for (const auto& o : c.ops)
      if (auto* d = std::get_if<op::Detect>(&o)) modes.push_back(d->modes);
  } else {
    for (int m = 0; m <= res.n_modes; ++m) modes.push_back(m);
  }
  j["pattern_modes"] = modes;

  json branches = json::array();
  for (const auto& b : res.branches) {
    json bj;
    bj["record"] = record_key(b.record);
    bj["probability"] = b.probability;
    json pt = json::object();
    for (const auto& [d, p] : b.patterns) pt[pattern_key(d)] = p;
    bj["patterns"] = pt;
    if (b.fidelity) bj["fidelity"] = *b.fidelity;
    if (!b.expectations.empty()) bj["expectations"] = b.expectations;
    if (b.density && meta.options.want_density) bj["density"] = density_json(*b.density);
    branches.push_back(bj);
  }
  j["branches"] = branches;
  j["herald_probability"] = res.herald_probability;
  if (res.mean_fidelity) j["mean_fidelity"] = *res.mean_fidelity;
  j["report"] = report_json(report);

  json md;
  md["version"] = kVersion;
  md["input_digest"] = meta.input_digest;
  json seed = json::object();
  seed["gram"] = c.gram.kind == GramSpec::Kind::Normal ? json(c.gram.seed) : json(nullptr);
  seed["loss"] = c.loss_noise ? json(c.loss_noise->seed) : json(nullptr);
  md["seed"] = seed;
  md["tolerances"] = {{"validation", kValidationTol}, {"identity", kIdentityTol}, {"herald", kImpossibleHerald}};
  md["prune_threshold"] = meta.options.prune_threshold;
  md["peak_dimension"] = res.peak_dimension;
  md["restricted_basis"] = meta.options.restrict_basis;
  md["gram_rank"] = res.gram.rank;
  md["gram_redraws"] = res.draws.gram_redraws;
  md["gram_clipped"] = res.draws.gram_clipped;
  md["eta_clipped"] = res.draws.eta_clipped;
  j["metadata"] = md;
  return j;
}

}  // namespace qmal
