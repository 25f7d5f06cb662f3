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
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "qmal/basis.hpp"
#include "qmal/evolve.hpp"
#include "qmal/overlaps.hpp"
#include "qmal/resolve.hpp"
#include "qmal/state.hpp"

namespace qmal {

using BigInt = boost::multiprecision::cpp_int;

namespace op {
struct Inject {
  int mode = 1;
  int internal = -1;  // 0-based index into the gram specification; -1 = label order
};
struct Unitary {
  ComponentSpec spec;
  std::optional<double> eta;  // beam splitter followed by loss on both outputs
};
struct Loss {
  int mode = 1;
  double eta = 1.0;
};
struct Detect {
  std::vector<int> modes;
  std::vector<std::vector<int>> heralds;  // empty keeps every outcome
};
struct Stage {};
}  // namespace op

using Op = std::variant<op::Inject, op::Unitary, op::Loss, op::Detect, op::Stage>;

struct GramSpec {
  enum class Kind { Matrix, UniformVisibility, Normal };
  Kind kind = Kind::UniformVisibility;
  CMatrix matrix;
  double visibility = 1.0;
  double mean = 1.0;
  double variance = 0.0;
  std::uint64_t seed = 0;
};

struct LossNoise {
  double variance = 0.0;
  std::uint64_t seed = 0;
};

struct Measurement {
  std::string name;
  std::vector<int> modes;
  PatternTable weights;
};

struct CircuitIR {
  int modes = 0;
  GramSpec gram;
  std::vector<Op> ops;
  std::optional<LossNoise> loss_noise;
  std::vector<Measurement> measure;
  bool want_density = false;
  bool want_fidelity = false;

  int n_photons() const {
    int n = 0;
    for (const auto& o : ops) n += std::holds_alternative<op::Inject>(o);
    return n;
  }
};

// ---------------------------------------------------------------------------
// Lowering: draws random parameters and expands the photon-level gram.

struct LoweredOp {
  enum class Kind { Inject, Unitary, Loss, Detect, Stage };
  Kind kind;
  int photon = -1;  // Inject
  int mode = 0;     // Inject, Loss
  double eta = 1.0;
  SinglePhotonUnitary unitary;
  op::Detect detect;
  int source = -1;  // index of the originating IR op
};

struct DrawInfo {
  int gram_redraws = 0;
  int gram_clipped = 0;
  int eta_clipped = 0;
};

struct LoweredCircuit {
  int n_modes = 0;
  int n_photons = 0;
  GramMatrix gram;  // photon level
  std::vector<int> internal;
  std::vector<LoweredOp> ops;
  DrawInfo draws;
};

namespace detail {

inline void ir_check(bool ok, ErrorCode code, int index, const std::string& why) {
  if (!ok) throw Error(code, (index >= 0 ? "op " + std::to_string(index) + ": " : "") + why);
}

inline std::vector<int> component_modes(const ComponentSpec& spec) {
  using namespace component;
  if (auto* b = std::get_if<BeamSplitter>(&spec)) return {b->m1, b->m2};
  if (auto* p = std::get_if<Phase>(&spec)) return {p->mode};
  if (auto* s = std::get_if<Swap>(&spec)) return {s->m1, s->m2};
  return std::get<Custom>(spec).modes;
}

inline int internal_count(const CircuitIR& c) {
  return c.gram.kind == GramSpec::Kind::Matrix ? static_cast<int>(c.gram.matrix.rows()) : c.n_photons();
}

}  // namespace detail

// Referential checks. Throws `code` (SemanticError from the parser,
// InvalidIR from run).
inline void validate_circuit(const CircuitIR& c, ErrorCode code = ErrorCode::InvalidIR) {
  using detail::ir_check;
  ir_check(c.modes >= 1, code, -1, "modes must be positive");
  ir_check(c.n_photons() >= 1, code, -1, "circuit injects no photons");
  ir_check(c.n_photons() <= 62, code, -1, "too many photons");
  const int k = detail::internal_count(c);
  if (c.gram.kind == GramSpec::Kind::UniformVisibility)
    ir_check(c.gram.visibility >= 0.0 && c.gram.visibility <= 1.0, code, -1, "visibility outside [0, 1]");
  if (c.gram.kind == GramSpec::Kind::Normal)
    ir_check(c.gram.variance >= 0.0, code, -1, "negative variance");
  if (c.loss_noise) ir_check(c.loss_noise->variance >= 0.0, code, -1, "negative loss variance");

  std::set<int> detected;
  std::vector<std::set<int>> reach;  // possible physical modes per injected photon
  std::set<int> touched_in_stage;
  auto in_range = [&](int m) { return m >= 1 && m <= c.modes; };
  for (std::size_t i = 0; i < c.ops.size(); ++i) {
    const int idx = static_cast<int>(i);
    const auto& o = c.ops[i];
    if (auto* in = std::get_if<op::Inject>(&o)) {
      ir_check(in_range(in->mode), code, idx, "inject mode out of range");
      ir_check(!detected.count(in->mode), code, idx, "inject into a detected mode");
      ir_check(!touched_in_stage.count(in->mode), code, idx,
               "inject mode is used earlier in the same stage");
      for (const auto& r : reach)
        ir_check(!r.count(in->mode), code, idx, "inject mode may already hold a photon");
      const int internal = in->internal < 0 ? static_cast<int>(reach.size()) : in->internal;
      ir_check(internal >= 0 && internal < k, code, idx, "internal index out of range");
      reach.push_back({in->mode});
    } else if (auto* u = std::get_if<op::Unitary>(&o)) {
      const auto modes = detail::component_modes(u->spec);
      std::set<int> seen;
      for (int m : modes) {
        ir_check(in_range(m), code, idx, "component mode out of range");
        ir_check(!detected.count(m), code, idx, "component uses a detected mode");
        ir_check(seen.insert(m).second, code, idx, "repeated component mode");
        touched_in_stage.insert(m);
      }
      if (u->eta) {
        ir_check(std::holds_alternative<component::BeamSplitter>(u->spec), code, idx,
                 "eta is only accepted on beam splitters");
        ir_check(*u->eta >= 0.0 && *u->eta <= 1.0, code, idx, "eta outside [0, 1]");
      }
      try {
        (void)make_component(u->spec, c.modes);
      } catch (const Error& e) {
        throw Error(code, "op " + std::to_string(idx) + ": " + e.what());
      }
      for (auto& r : reach) {
        bool hit = false;
        for (int m : modes) hit = hit || r.count(m);
        if (hit) r.insert(modes.begin(), modes.end());
      }
    } else if (auto* l = std::get_if<op::Loss>(&o)) {
      ir_check(in_range(l->mode), code, idx, "loss mode out of range");
      ir_check(!detected.count(l->mode), code, idx, "loss on a detected mode");
      ir_check(l->eta >= 0.0 && l->eta <= 1.0, code, idx, "eta outside [0, 1]");
      touched_in_stage.insert(l->mode);
    } else if (auto* d = std::get_if<op::Detect>(&o)) {
      ir_check(!d->modes.empty(), code, idx, "detector group is empty");
      std::set<int> seen;
      for (int m : d->modes) {
        ir_check(in_range(m), code, idx, "detect mode out of range");
        ir_check(!detected.count(m), code, idx, "mode detected twice");
        ir_check(seen.insert(m).second, code, idx, "repeated detect mode");
        touched_in_stage.insert(m);
      }
      for (const auto& h : d->heralds) {
        ir_check(h.size() == d->modes.size(), code, idx, "herald arity differs from detector count");
        for (int x : h) ir_check(x >= 0, code, idx, "negative herald count");
      }
      detected.insert(d->modes.begin(), d->modes.end());
      for (auto& r : reach)
        for (int m : d->modes) r.erase(m);
    } else {
      touched_in_stage.clear();
    }
  }
  for (const auto& m : c.measure) {
    ir_check(!m.modes.empty(), code, -1, "measurement '" + m.name + "' lists no modes");
    for (int x : m.modes) {
      ir_check(in_range(x), code, -1, "measurement mode out of range");
      ir_check(!detected.count(x), code, -1, "measurement mode was already detected");
    }
    for (const auto& [d, w] : m.weights)
      ir_check(d.size() == m.modes.size(), code, -1, "measurement pattern arity");
  }
}

namespace detail {

inline CMatrix draw_normal_gram(int k, double mean, double variance, std::uint64_t seed, DrawInfo& info) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(mean, std::sqrt(variance));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    CMatrix g = CMatrix::Identity(k, k);
    int clipped = 0;
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        double v = variance > 0.0 ? dist(rng) : mean;
        if (v < 0.0 || v > 1.0) {
          ++clipped;
          v = std::clamp(v, 0.0, 1.0);
        }
        g(i, j) = g(j, i) = std::sqrt(v);
      }
    }
    try {
      (void)validate_gram(g);
      info.gram_clipped = clipped;
      return g;
    } catch (const Error&) {
      ++info.gram_redraws;
    }
  }
  throw Error(ErrorCode::NotPSD, "no positive semidefinite draw in 1000 attempts");
}

}  // namespace detail

inline CMatrix gram_entries(const CircuitIR& c, DrawInfo& info) {
  const int k = detail::internal_count(c);
  switch (c.gram.kind) {
    case GramSpec::Kind::Matrix:
      return c.gram.matrix;
    case GramSpec::Kind::UniformVisibility: {
      CMatrix g = CMatrix::Constant(k, k, std::sqrt(c.gram.visibility));
      g.diagonal().setOnes();
      return g;
    }
    case GramSpec::Kind::Normal:
      return detail::draw_normal_gram(k, c.gram.mean, c.gram.variance, c.gram.seed, info);
  }
  return {};
}

struct LowerOptions {
  bool ideal = false;  // identical photons, no loss
};

inline LoweredCircuit lower(const CircuitIR& c, const LowerOptions& opt = {}) {
  validate_circuit(c);
  LoweredCircuit out;
  out.n_modes = c.modes;
  out.n_photons = c.n_photons();
  const int k = detail::internal_count(c);
  CMatrix g = opt.ideal ? CMatrix::Ones(k, k) : gram_entries(c, out.draws);
  const GramMatrix internal_gram = validate_gram(g);

  std::optional<std::mt19937_64> eta_rng;
  std::normal_distribution<double> eta_noise(0.0, 1.0);
  if (c.loss_noise && c.loss_noise->variance > 0.0) eta_rng.emplace(c.loss_noise->seed);
  auto draw_eta = [&](double mean) {
    if (opt.ideal) return 1.0;
    if (!eta_rng) return mean;
    double v = mean + std::sqrt(c.loss_noise->variance) * eta_noise(*eta_rng);
    if (v < 0.0 || v > 1.0) {
      ++out.draws.eta_clipped;
      v = std::clamp(v, 0.0, 1.0);
    }
    return v;
  };

  for (std::size_t i = 0; i < c.ops.size(); ++i) {
    const auto& o = c.ops[i];
    LoweredOp lo;
    lo.source = static_cast<int>(i);
    if (auto* in = std::get_if<op::Inject>(&o)) {
      lo.kind = LoweredOp::Kind::Inject;
      lo.photon = static_cast<int>(out.internal.size());
      lo.mode = in->mode;
      out.internal.push_back(in->internal < 0 ? lo.photon : in->internal);
      out.ops.push_back(lo);
    } else if (auto* u = std::get_if<op::Unitary>(&o)) {
      lo.kind = LoweredOp::Kind::Unitary;
      lo.unitary = make_component(u->spec, c.modes);
      out.ops.push_back(lo);
      if (u->eta) {
        const double eta = draw_eta(*u->eta);
        for (int m : detail::component_modes(u->spec)) {
          LoweredOp lm;
          lm.kind = LoweredOp::Kind::Loss;
          lm.mode = m;
          lm.eta = eta;
          lm.source = lo.source;
          if (eta < 1.0) out.ops.push_back(lm);
        }
      }
    } else if (auto* l = std::get_if<op::Loss>(&o)) {
      lo.kind = LoweredOp::Kind::Loss;
      lo.mode = l->mode;
      lo.eta = draw_eta(l->eta);
      if (lo.eta < 1.0) out.ops.push_back(lo);
    } else if (auto* d = std::get_if<op::Detect>(&o)) {
      lo.kind = LoweredOp::Kind::Detect;
      lo.detect = *d;
      out.ops.push_back(lo);
    } else {
      lo.kind = LoweredOp::Kind::Stage;
      out.ops.push_back(lo);
    }
  }

  const int n = out.n_photons;
  CMatrix s(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) s(p, q) = internal_gram(out.internal[p], out.internal[q]);
  out.gram = validate_gram(s);
  return out;
}

// ---------------------------------------------------------------------------
// Connectivity and stage planning.

struct StagePlan {
  std::vector<std::vector<int>> allowed;  // per photon, basis at stage start
  std::vector<int> injected;              // photons injected in this stage
  std::vector<LoweredOp> ops;             // non-inject ops
};

struct CircuitPlan {
  std::vector<StagePlan> stages;
  std::vector<std::set<int>> reach;  // whole-circuit union per photon, 0 on exposure
};

inline CircuitPlan plan_stages(const LoweredCircuit& lc, bool ignore_stages = false) {
  CircuitPlan plan;
  const int n = lc.n_photons;
  plan.reach.assign(n, {});
  plan.stages.emplace_back();
  for (const auto& o : lc.ops) {
    if (o.kind == LoweredOp::Kind::Stage) {
      if (!ignore_stages) plan.stages.emplace_back();
    } else if (o.kind == LoweredOp::Kind::Inject) {
      plan.stages.back().injected.push_back(o.photon);
    } else {
      plan.stages.back().ops.push_back(o);
    }
  }
  std::vector<std::set<int>> pos(n, std::set<int>{0});
  std::vector<int> inject_mode(n, 0);
  for (const auto& o : lc.ops)
    if (o.kind == LoweredOp::Kind::Inject) inject_mode[o.photon] = o.mode;
  for (auto& st : plan.stages) {
    for (int p : st.injected) pos[p] = {inject_mode[p]};
    std::vector<std::set<int>> allowed = pos;
    for (const auto& o : st.ops) {
      for (int p = 0; p < n; ++p) {
        auto& cur = pos[p];
        if (o.kind == LoweredOp::Kind::Unitary) {
          std::set<int> add;
          for (int m : cur) {
            if (!std::binary_search(o.unitary.support.begin(), o.unitary.support.end(), m)) continue;
            for (int t : o.unitary.support)
              if (o.unitary.matrix(m, t) != 0.0) add.insert(t);
          }
          cur.insert(add.begin(), add.end());
          allowed[p].insert(add.begin(), add.end());
        } else if (o.kind == LoweredOp::Kind::Loss) {
          if (cur.count(o.mode)) {
            cur.insert(0);
            allowed[p].insert(0);
          }
        } else if (o.kind == LoweredOp::Kind::Detect) {
          bool hit = false;
          for (int m : o.detect.modes) hit = cur.erase(m) > 0 || hit;
          if (hit) cur.insert(0);
        }
      }
    }
    st.allowed.resize(n);
    for (int p = 0; p < n; ++p) {
      st.allowed[p].assign(allowed[p].begin(), allowed[p].end());
      for (int m : allowed[p]) plan.reach[p].insert(m);
      if (pos[p].count(0) && inject_mode[p] != 0) plan.reach[p].insert(0);
    }
  }
  return plan;
}

// Per-photon reachable modes over the whole circuit, injections hoisted.
inline AllowedModes connectivity(const CircuitIR& c) {
  const auto lc = lower(c, LowerOptions{true});
  auto plan = plan_stages(lc, true);
  AllowedModes a;
  for (const auto& r : plan.reach) a.sets.emplace_back(r.begin(), r.end());
  // Loss exposure is invisible in the ideal lowering; add it here.
  std::vector<std::set<int>> pos(lc.n_photons);
  for (const auto& o : lc.ops)
    if (o.kind == LoweredOp::Kind::Inject) pos[o.photon] = {o.mode};
  for (const auto& o : c.ops) {
    if (auto* u = std::get_if<op::Unitary>(&o)) {
      const auto modes = detail::component_modes(u->spec);
      for (std::size_t p = 0; p < pos.size(); ++p) {
        bool hit = false;
        for (int m : modes) hit = hit || pos[p].count(m);
        if (!hit) continue;
        pos[p].insert(modes.begin(), modes.end());
        if (u->eta && *u->eta < 1.0) a.sets[p].push_back(0);
      }
    } else if (auto* l = std::get_if<op::Loss>(&o)) {
      for (std::size_t p = 0; p < pos.size(); ++p)
        if (pos[p].count(l->mode) && l->eta < 1.0) a.sets[p].push_back(0);
    }
  }
  for (auto& s : a.sets) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return a;
}

// ---------------------------------------------------------------------------
// Space sizes.

inline BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  BigInt r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline BigInt fock_dimension(int n_photons, int n_modes) {
  return binomial(n_photons + n_photons * n_modes - 1, n_photons);
}

inline BigInt power(BigInt base, int e) {
  BigInt r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

inline BigInt mal_dimension(int n_photons, int n_modes) { return power(n_modes, n_photons); }

inline BigInt unsymmetrized_dimension(int n_photons, int n_modes) {
  return power(BigInt(n_photons) * n_modes, n_photons);
}

inline BigInt product_dimension(const std::vector<int>& counts) {
  BigInt r = 1;
  for (int c : counts) r *= c;
  return r;
}

struct SpaceReport {
  int n_photons = 0;
  int n_modes = 0;
  BigInt fock;
  BigInt unsymmetrized;
  BigInt mal;
  BigInt mal_with_zero;
  BigInt restricted;
  std::vector<int> physical_modes;  // per photon, mode 0 excluded
  std::vector<BigInt> stage_dims;
  BigInt peak;
};

inline SpaceReport space_report(const CircuitIR& c) {
  SpaceReport r;
  r.n_photons = c.n_photons();
  r.n_modes = c.modes;
  r.fock = fock_dimension(r.n_photons, r.n_modes);
  r.unsymmetrized = unsymmetrized_dimension(r.n_photons, r.n_modes);
  r.mal = mal_dimension(r.n_photons, r.n_modes);
  r.mal_with_zero = mal_dimension(r.n_photons, r.n_modes + 1);
  const auto allowed = connectivity(c);
  for (const auto& s : allowed.sets)
    r.physical_modes.push_back(static_cast<int>(std::count_if(s.begin(), s.end(), [](int m) { return m != 0; })));
  r.restricted = product_dimension(r.physical_modes);
  const auto lc = lower(c);
  const auto plan = plan_stages(lc, false);
  r.peak = 0;
  for (const auto& st : plan.stages) {
    BigInt d = 1;
    for (const auto& s : st.allowed) d *= static_cast<int>(s.size());
    r.stage_dims.push_back(d);
    r.peak = std::max(r.peak, d);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Simulation driver.

struct RunOptions {
  bool restrict_basis = true;  // false: every photon may occupy modes 0..M
  bool ignore_stages = false;
  bool want_density = false;
  bool want_fidelity = false;
  double prune_threshold = 0.0;
  std::uint64_t dim_cap = default_dim_cap();
};

struct BranchResult {
  std::vector<std::vector<int>> record;  // one pattern per detect op
  double probability = 0.0;              // joint probability of the record
  MALDensity state;                      // normalized
  PatternTable patterns;                 // conditional, modes 0..M
  std::optional<ExternalDensity> density;
  std::optional<double> fidelity;
  std::map<std::string, double> expectations;
};

struct SimulationResult {
  int n_modes = 0;
  int n_photons = 0;
  GramMatrix gram;
  std::vector<BranchResult> branches;
  double herald_probability = 0.0;
  std::optional<double> mean_fidelity;
  std::uint64_t peak_dimension = 0;
  DrawInfo draws;
  bool has_detectors = false;

  // Record probabilities when the circuit detects, final patterns otherwise.
  PatternTable pattern_table() const {
    PatternTable t;
    for (const auto& b : branches) {
      if (has_detectors) {
        std::vector<int> flat;
        for (std::size_t k = 0; k < b.record.size(); ++k) {
          if (k) flat.push_back(-1);
          flat.insert(flat.end(), b.record[k].begin(), b.record[k].end());
        }
        t[flat] += b.probability;
      } else {
        for (const auto& [d, p] : b.patterns) t[d] += b.probability * p;
      }
    }
    return t;
  }
};

inline std::string record_key(const std::vector<std::vector<int>>& record) {
  std::string s;
  for (std::size_t k = 0; k < record.size(); ++k) {
    if (k) s += ';';
    s += pattern_key(record[k]);
  }
  return s;
}

namespace detail {

struct LiveBranch {
  std::vector<std::vector<int>> record;
  double probability;
  MALDensity mu;
};

inline std::vector<LiveBranch> evolve_branches(const LoweredCircuit& lc, const RunOptions& opt,
                                               std::uint64_t& peak) {
  const int n = lc.n_photons;
  const int m = lc.n_modes;
  const auto plan = plan_stages(lc, opt.ignore_stages);
  std::vector<int> inject_mode(n, 0);
  for (const auto& o : lc.ops)
    if (o.kind == LoweredOp::Kind::Inject) inject_mode[o.photon] = o.mode;

  EvolveOptions eo;
  eo.dim_cap = opt.dim_cap;
  auto start = std::make_shared<const BasisIndex>(AllowedModes{std::vector<std::vector<int>>(n, {0})},
                                                  opt.dim_cap);
  std::vector<LiveBranch> live;
  live.push_back({{}, 1.0, init_pure(Mal(n, 0), start)});
  live.back().mu.prune_threshold = opt.prune_threshold;
  peak = 1;

  for (const auto& st : plan.stages) {
    AllowedModes allowed = opt.restrict_basis ? AllowedModes{st.allowed}
                                              : AllowedModes::uniform(n, m, true);
    auto basis = std::make_shared<const BasisIndex>(allowed, opt.dim_cap);
    peak = std::max(peak, basis->dim());
    std::vector<char> fresh(n, 0);
    for (int p : st.injected) fresh[p] = 1;
    for (auto& b : live) {
      b.mu = remap(b.mu, basis, [&](Mal& x) {
        for (int p = 0; p < n; ++p)
          if (fresh[p]) x[p] = inject_mode[p];
      });
    }
    for (const auto& o : st.ops) {
      if (o.kind == LoweredOp::Kind::Unitary) {
        for (auto& b : live) b.mu = apply_unitary(b.mu, o.unitary, eo);
      } else if (o.kind == LoweredOp::Kind::Loss) {
        for (auto& b : live) b.mu = apply_loss(b.mu, LossElement{o.mode, o.eta}, lc.gram, eo);
      } else if (o.kind == LoweredOp::Kind::Detect) {
        std::vector<LiveBranch> next;
        for (auto& b : live) {
          auto mix = trace_out_modes(b.mu, o.detect.modes, lc.gram, opt.restrict_basis, m, opt.dim_cap);
          for (auto& [d, br] : mix.branches) {
            if (!o.detect.heralds.empty() &&
                std::find(o.detect.heralds.begin(), o.detect.heralds.end(), d) == o.detect.heralds.end())
              continue;
            if (br.probability < kImpossibleHerald) continue;
            LiveBranch child{b.record, b.probability * br.probability,
                             br.remainder.scaled(1.0 / br.probability)};
            child.record.push_back(d);
            next.push_back(std::move(child));
          }
        }
        require(!next.empty(), ErrorCode::HeraldImpossible, "no herald pattern can occur");
        live = std::move(next);
        for (const auto& b : live) peak = std::max(peak, b.mu.basis->dim());
      }
    }
  }
  return live;
}

}  // namespace detail

inline SimulationResult run_lowered(const LoweredCircuit& lc, const CircuitIR& c, const RunOptions& opt) {
  SimulationResult res;
  res.n_modes = lc.n_modes;
  res.n_photons = lc.n_photons;
  res.gram = lc.gram;
  res.draws = lc.draws;
  for (const auto& o : lc.ops) res.has_detectors = res.has_detectors || o.kind == LoweredOp::Kind::Detect;
  auto live = detail::evolve_branches(lc, opt, res.peak_dimension);
  for (auto& b : live) {
    BranchResult br;
    br.record = b.record;
    br.probability = b.probability;
    br.patterns = detection_probabilities(b.mu, lc.gram, lc.n_modes);
    for (const auto& meas : c.measure) {
      std::vector<int> slots(meas.modes.begin(), meas.modes.end());
      br.expectations[meas.name] = expectation(marginalize(br.patterns, slots), meas.weights);
    }
    if (opt.want_density || opt.want_fidelity)
      br.density = resolve_interference(b.mu, lc.gram, lc.n_modes);
    br.state = std::move(b.mu);
    res.herald_probability += br.probability;
    res.branches.push_back(std::move(br));
  }
  return res;
}

// Fidelity of every branch against the same circuit with identical photons
// and no loss. Branches absent from the ideal run score zero.
inline void attach_ideal_fidelity(SimulationResult& res, const CircuitIR& c, const RunOptions& opt) {
  RunOptions io = opt;
  io.want_density = true;
  io.want_fidelity = false;
  const auto ideal_lc = lower(c, LowerOptions{true});
  const auto ideal = run_lowered(ideal_lc, c, io);
  std::map<std::vector<std::vector<int>>, const BranchResult*> by_record;
  for (const auto& b : ideal.branches) by_record[b.record] = &b;
  double num = 0.0;
  double den = 0.0;
  for (auto& b : res.branches) {
    auto it = by_record.find(b.record);
    double f = 0.0;
    if (it != by_record.end() && b.density) f = fidelity(*it->second->density, *b.density);
    b.fidelity = f;
    num += b.probability * f;
    den += b.probability;
  }
  if (den > 0.0) res.mean_fidelity = num / den;
}

inline SimulationResult run(const CircuitIR& c, const RunOptions& opt = {}) {
  const auto lc = lower(c);
  RunOptions o = opt;
  o.want_density = o.want_density || c.want_density;
  o.want_fidelity = o.want_fidelity || c.want_fidelity;
  auto res = run_lowered(lc, c, o);
  if (o.want_fidelity) attach_ideal_fidelity(res, c, o);
  return res;
}

}  // namespace qmal
