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

// qmal command-line front end.
//
//   qmal run <circuit> [--output FILE] [--density] [--fidelity]
//   qmal probs <circuit>
//   qmal report <circuit>
//   qmal compare <circuit> [--tol 1e-8]
//   qmal sweep <circuit> --param visibility --grid 1,0.95,0.9 [--runs 10] [--jobs 4]

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "qmal/io.hpp"
#include "qmal/oracle.hpp"

namespace {

using namespace qmal;

enum Exit { kOk = 0, kUsage = 1, kParse = 2, kNumerical = 3, kCompare = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string input;
  std::string output;
  bool unrestricted = false;
  bool monolithic = false;
  bool density = false;
  bool fidelity = false;
  double prune = 0.0;
  std::uint64_t dim_cap = 0;
  std::optional<std::uint64_t> seed;
  double compare_tol = 1e-8;
  std::string param;
  std::string grid;
  int runs = 1;
  int jobs = 1;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

// Shortest text that round-trips.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void apply_seed(CircuitIR& c, std::uint64_t seed) {
  c.gram.seed = seed;
  if (c.loss_noise) c.loss_noise->seed = seed;
}

RunOptions options_of(const RunConfig& cfg) {
  RunOptions o;
  o.restrict_basis = !cfg.unrestricted;
  o.ignore_stages = cfg.monolithic;
  o.want_density = cfg.density;
  o.want_fidelity = cfg.fidelity;
  o.prune_threshold = cfg.prune;
  if (cfg.dim_cap) o.dim_cap = cfg.dim_cap;
  return o;
}

CircuitIR load(const RunConfig& cfg, std::string* digest = nullptr) {
  const std::string text = read_file(cfg.input);
  if (digest) *digest = sha256_hex(text);
  CircuitIR c = parse_circuit(text);
  if (cfg.seed) apply_seed(c, *cfg.seed);
  return c;
}

int cmd_run(const RunConfig& cfg) {
  RunMetadata meta;
  CircuitIR c = load(cfg, &meta.input_digest);
  meta.options = options_of(cfg);
  meta.options.want_density = meta.options.want_density || c.want_density;
  const auto res = run(c, meta.options);
  emit(dump_json(result_json(res, c, space_report(c), meta)), cfg.output);
  return kOk;
}

int cmd_probs(const RunConfig& cfg) {
  CircuitIR c = load(cfg);
  auto o = options_of(cfg);
  o.want_density = false;
  o.want_fidelity = false;
  c.want_density = c.want_fidelity = false;
  const auto res = run(c, o);
  std::string out = "pattern\tprobability\n";
  for (const auto& [d, p] : res.pattern_table()) {
    std::string key;
    if (res.has_detectors) {
      std::vector<std::vector<int>> rec(1);
      for (int x : d) {
        if (x < 0) rec.emplace_back();
        else rec.back().push_back(x);
      }
      key = record_key(rec);
    } else {
      key = pattern_key(d);
    }
    out += key + "\t" + fmt(p) + "\n";
  }
  emit(out, cfg.output);
  return kOk;
}

int cmd_report(const RunConfig& cfg) {
  const CircuitIR c = load(cfg);
  emit(dump_json(report_json(space_report(c))), cfg.output);
  return kOk;
}

int cmd_compare(const RunConfig& cfg) {
  const CircuitIR c = load(cfg);
  auto o = options_of(cfg);
  o.want_density = true;
  o.want_fidelity = false;
  const auto main = run(c, o);
  const auto ref = oracle::oracle_run(c);
  const auto d = oracle::compare(main, ref);
  std::ostringstream out;
  out << "branches\t" << main.branches.size() << "\n"
      << "probability\t" << fmt(d.probability) << "\n"
      << "patterns\t" << fmt(d.patterns) << "\n"
      << "density\t" << fmt(d.density) << "\n"
      << "max_abs_diff\t" << fmt(d.max()) << "\n";
  emit(out.str(), cfg.output);
  return d.max() > cfg.compare_tol ? kCompare : kOk;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> g;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw UsageError("bad grid value '" + item + "'");
    g.push_back(v);
  }
  if (g.empty()) throw UsageError("empty grid");
  return g;
}

// Sets the swept parameter on a copy of the circuit.
CircuitIR with_param(CircuitIR c, const std::string& param, double v) {
  if (param == "visibility") {
    if (c.gram.kind == GramSpec::Kind::Normal) c.gram.mean = v;
    else if (c.gram.kind == GramSpec::Kind::UniformVisibility) c.gram.visibility = v;
    else throw UsageError("visibility sweep needs a uniform or normal gram");
  } else if (param == "eta") {
    for (auto& o : c.ops) {
      if (auto* l = std::get_if<op::Loss>(&o)) l->eta = v;
      if (auto* u = std::get_if<op::Unitary>(&o); u && (u->eta || std::holds_alternative<component::BeamSplitter>(u->spec)))
        u->eta = v;
    }
  } else if (param == "variance") {
    if (c.gram.kind != GramSpec::Kind::Normal) throw UsageError("variance sweep needs a normal gram");
    c.gram.variance = v;
  } else if (param == "seed") {
    apply_seed(c, static_cast<std::uint64_t>(v));
  } else {
    throw UsageError("unknown sweep parameter '" + param + "'");
  }
  return c;
}

struct SweepPoint {
  double herald = 0.0;
  double herald_sd = 0.0;
  double fidelity = 0.0;
  double fidelity_sd = 0.0;
  std::uint64_t peak = 0;
  std::string error;
  int code = kOk;
};

SweepPoint sweep_point(const CircuitIR& base, const RunConfig& cfg, double v) {
  SweepPoint pt;
  std::vector<double> h, f;
  for (int r = 0; r < cfg.runs; ++r) {
    CircuitIR c = with_param(base, cfg.param, v);
    if (cfg.param != "seed") apply_seed(c, (cfg.seed ? *cfg.seed : c.gram.seed) + r);
    auto o = options_of(cfg);
    o.want_fidelity = true;
    const auto res = run(c, o);
    h.push_back(res.herald_probability);
    f.push_back(res.mean_fidelity.value_or(0.0));
    pt.peak = std::max(pt.peak, res.peak_dimension);
  }
  auto stats = [](const std::vector<double>& x, double& mean, double& sd) {
    mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    sd = 0.0;
    for (double v : x) sd += (v - mean) * (v - mean);
    sd = x.size() > 1 ? std::sqrt(sd / static_cast<double>(x.size() - 1)) : 0.0;
  };
  stats(h, pt.herald, pt.herald_sd);
  stats(f, pt.fidelity, pt.fidelity_sd);
  return pt;
}

int cmd_sweep(const RunConfig& cfg) {
  if (cfg.runs < 1) throw UsageError("--runs must be positive");
  if (cfg.param == "seed" && cfg.runs > 1) throw UsageError("--runs does not apply to a seed sweep");
  const auto grid = parse_grid(cfg.grid);
  const CircuitIR base = load(cfg);
  with_param(base, cfg.param, grid.front());  // reject bad parameters before spawning

  std::vector<SweepPoint> points(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < grid.size();) {
      try {
        points[i] = sweep_point(base, cfg, grid[i]);
      } catch (const Error& e) {
        points[i].error = e.what();
        points[i].code = e.code() == ErrorCode::SyntaxError || e.code() == ErrorCode::SemanticError ||
                                 e.code() == ErrorCode::InvalidIR
                             ? kParse
                             : kNumerical;
      }
    }
  };
  const int jobs = std::clamp(cfg.jobs, 1, static_cast<int>(grid.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string out = cfg.param + "\therald_probability\therald_sd\tfidelity\tfidelity_sd\tpeak_dimension\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (points[i].code != kOk) {
      std::cerr << "qmal: " << cfg.param << "=" << fmt(grid[i]) << ": " << points[i].error << "\n";
      return points[i].code;
    }
    const auto& p = points[i];
    out += fmt(grid[i]) + "\t" + fmt(p.herald) + "\t" + fmt(p.herald_sd) + "\t" + fmt(p.fidelity) + "\t" +
           fmt(p.fidelity_sd) + "\t" + std::to_string(p.peak) + "\n";
  }
  emit(out, cfg.output);
  return kOk;
}

void add_run_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("circuit", cfg.input, "circuit JSON file")->required();
  cmd->add_option("--output", cfg.output, "output file (default stdout)");
  cmd->add_flag("--unrestricted", cfg.unrestricted, "let every photon occupy every mode");
  cmd->add_flag("--monolithic", cfg.monolithic, "ignore stage markers");
  cmd->add_option("--prune", cfg.prune, "drop density entries below this magnitude")->check(CLI::NonNegativeNumber);
  cmd->add_option("--dim-cap", cfg.dim_cap, "basis dimension cap");
  cmd->add_option("--seed", cfg.seed, "override gram and loss seeds");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-optics simulator over mode assignment lists"};
  app.set_version_flag("--version", std::string(qmal::kVersion));
  app.require_subcommand(1);
  RunConfig cfg;

  auto* run_cmd = app.add_subcommand("run", "simulate and write the result JSON");
  add_run_flags(run_cmd, cfg);
  run_cmd->add_flag("--density", cfg.density, "include external densities");
  run_cmd->add_flag("--fidelity", cfg.fidelity, "score branches against the ideal circuit");

  auto* probs_cmd = app.add_subcommand("probs", "print the pattern table as TSV");
  add_run_flags(probs_cmd, cfg);

  auto* report_cmd = app.add_subcommand("report", "print the space report");
  report_cmd->add_option("circuit", cfg.input, "circuit JSON file")->required();
  report_cmd->add_option("--output", cfg.output, "output file (default stdout)");
  report_cmd->add_option("--seed", cfg.seed, "override gram and loss seeds");

  auto* compare_cmd = app.add_subcommand("compare", "check the simulator against the dense oracle");
  add_run_flags(compare_cmd, cfg);
  compare_cmd->add_option("--tol", cfg.compare_tol, "largest accepted discrepancy");

  auto* sweep_cmd = app.add_subcommand("sweep", "herald probability and fidelity over a parameter grid");
  add_run_flags(sweep_cmd, cfg);
  sweep_cmd->add_option("--param", cfg.param, "visibility, eta, variance or seed")->required();
  sweep_cmd->add_option("--grid", cfg.grid, "comma separated values")->required();
  sweep_cmd->add_option("--runs", cfg.runs, "random draws per point");
  sweep_cmd->add_option("--jobs", cfg.jobs, "concurrent points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(cfg);
    if (*probs_cmd) return cmd_probs(cfg);
    if (*report_cmd) return cmd_report(cfg);
    if (*compare_cmd) return cmd_compare(cfg);
    if (*sweep_cmd) return cmd_sweep(cfg);
  } catch (const UsageError& e) {
    std::cerr << "qmal: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "qmal: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::SyntaxError:
      case ErrorCode::SemanticError:
      case ErrorCode::InvalidIR:
        return kParse;
      default:
        return kNumerical;
    }
  } catch (const std::exception& e) {
    std::cerr << "qmal: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
