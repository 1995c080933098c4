// Command-line driver: simulations, CMP vs strict comparison, grid search,
// oracle certification and synthetic case generation.

#include "cmpsced/oracle.hpp"
#include "cmpsced/reporting.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace cmpsced;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitRefused = 3;

struct Common {
  std::string case_path;
  std::string mode = "cmp";
  DcaConfig cfg;
  std::string lmp_source = "final-subproblem";
  double load_scale = 1.0;
  double dt = 0.0;
  std::string out = "out";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

void add_dca_flags(CLI::App* app, Common& o) {
  app->add_option("--epsilon", o.cfg.epsilon, "surrogate transition width (MW)")->capture_default_str();
  app->add_option("--gamma-l", o.cfg.gamma_l, "weight on lines above zeta_n")->capture_default_str();
  app->add_option("--gamma-s", o.cfg.gamma_s, "weight on lines above zeta_l")->capture_default_str();
  app->add_option("--prox", o.cfg.prox_c, "proximal weight c")->capture_default_str();
  app->add_option("--tol-obj", o.cfg.tol_obj, "relative objective change to stop")->capture_default_str();
  app->add_option("--tol-x", o.cfg.tol_x, "flow change to stop (MW)")->capture_default_str();
  app->add_option("--max-iters", o.cfg.max_iters, "DCA iteration cap")->capture_default_str();
  app->add_option("--lmp-source", o.lmp_source, "final-subproblem or resolve")
      ->check(CLI::IsMember({"final-subproblem", "resolve"}))
      ->capture_default_str();
}

void add_case_flags(CLI::App* app, Common& o) {
  app->add_option("--load-scale", o.load_scale, "multiplier on every demand series")->capture_default_str();
  app->add_option("--dt", o.dt, "override period length (hours)");
}

Case read_case(const std::string& path, const Common& o) {
  if (!fs::exists(path)) {
    std::cerr << "error: case file not found: " << path << '\n';
    std::exit(kExitBadInput);
  }
  Case c;
  try {
    c = load_case(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << path << ": " << e.what() << '\n';
    std::exit(kExitBadInput);
  }
  if (o.dt != 0.0) {
    if (!(o.dt > 0.0)) {
      std::cerr << "error: --dt must be positive\n";
      std::exit(kExitBadInput);
    }
    c.dt = o.dt;
  }
  return c;
}

std::string money(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

int cmd_run(Common& o) {
  const Case c = read_case(o.case_path, o);
  o.cfg.lmp_source = parse_lmp_source(o.lmp_source);
  const SimulationResult r = simulate(c, parse_mode(o.mode), o.cfg, o.load_scale);
  write_run(o.out, r, c);
  const auto& s = r.summary;
  std::cout << "mode " << o.mode << "  total cost " << money(s.total_cost) << "  shed " << money(s.total_shed)
            << " MWh  zones (normal/lte/ste) " << zone_triple(s) << '\n';
  std::cout << "wrote " << (fs::path(o.out) / "period.csv").string() << " and "
            << (fs::path(o.out) / "lmp.csv").string() << '\n';
  return 0;
}

int cmd_compare(Common& o, const std::vector<std::string>& cases) {
  o.cfg.lmp_source = parse_lmp_source(o.lmp_source);
  std::vector<Case> loaded;
  for (const auto& p : cases) loaded.push_back(read_case(p, o));
  std::vector<ComparisonRow> rows(cases.size());
  parallel_for(cases.size(), o.jobs, [&](std::size_t i) {
    rows[i] = compare(fs::path(cases[i]).stem().string(), loaded[i], o.cfg, o.load_scale);
  });
  fs::create_directories(o.out);
  std::ofstream csv(fs::path(o.out) / "comparison.csv");
  write_comparison_csv(csv, rows);

  std::printf("%-16s %16s %16s %12s %12s %20s %20s\n", "scenario", "cmp cost", "strict cost", "cmp shed",
              "strict shed", "cmp zones", "strict zones");
  bool failed = false;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      std::printf("%-16s failed: %s\n", r.scenario.c_str(), r.error.c_str());
      failed = true;
      continue;
    }
    std::printf("%-16s %16s %16s %12s %12s %20s %20s\n", r.scenario.c_str(), money(r.cmp.total_cost).c_str(),
                money(r.strict.total_cost).c_str(), money(r.cmp.total_shed).c_str(),
                money(r.strict.total_shed).c_str(), zone_triple(r.cmp).c_str(), zone_triple(r.strict).c_str());
  }
  return failed ? kExitFailure : 0;
}

int cmd_grid(Common& o, GridSearchSpec spec) {
  const Case c = read_case(o.case_path, o);
  o.cfg.lmp_source = parse_lmp_source(o.lmp_source);
  const std::vector<GridRow> rows = grid_search(c, spec, o.cfg, o.load_scale, o.jobs);
  fs::create_directories(o.out);
  std::ofstream csv(fs::path(o.out) / "grid.csv");
  write_grid_csv(csv, rows);
  std::cout << rows.size() << " combinations written to " << (fs::path(o.out) / "grid.csv").string() << '\n';

  // Smallest vs largest epsilon at each gamma pair.
  const double e_lo = *std::min_element(spec.epsilon.begin(), spec.epsilon.end());
  const double e_hi = *std::max_element(spec.epsilon.begin(), spec.epsilon.end());
  int pairs = 0, holds = 0;
  for (double gl : spec.gamma_l) {
    for (double gs : spec.gamma_s) {
      const GridRow *lo = nullptr, *hi = nullptr;
      for (const auto& r : rows) {
        if (!r.ok || r.gamma_l != gl || r.gamma_s != gs) continue;
        if (r.epsilon == e_lo) lo = &r;
        if (r.epsilon == e_hi) hi = &r;
      }
      if (!lo || !hi || lo == hi) continue;
      ++pairs;
      if (lo->summary.total_cost >= hi->summary.total_cost &&
          lo->summary.normal_line_periods >= hi->summary.normal_line_periods) {
        ++holds;
      }
    }
  }
  if (pairs > 0) {
    std::cout << "epsilon " << e_lo << " vs " << e_hi << ": cost and normal-zone count no lower at the smaller "
              << "epsilon for " << holds << "/" << pairs << " gamma pairs\n";
  }
  for (const auto& r : rows) {
    if (!r.ok) return kExitFailure;
  }
  return 0;
}

int cmd_oracle(Common& o, int period) {
  const Case c = read_case(o.case_path, o);
  const Case scaled = o.load_scale == 1.0 ? c : scale_loads(c, o.load_scale);
  if (period < 0 || period >= scaled.horizon) {
    std::cerr << "error: --period out of range\n";
    return kExitBadInput;
  }
  const Observation obs = observe(scaled, period);
  const DispatchState state = fresh_state(scaled);
  OracleResult orc;
  try {
    orc = oracle_solve(scaled, period, obs, state, o.cfg);
  } catch (const OracleBudgetError& e) {
    std::cerr << "refusing: " << e.what() << '\n';
    return kExitRefused;
  }
  const DcaResult dca = dca_solve(scaled, period, obs, state, o.cfg);
  if (dca.status == DcaStatus::subproblem_error) {
    std::cerr << "error: DCA failed: " << dca.error << '\n';
    return kExitFailure;
  }
  const double d = dca.exact_objective();
  const double gap = (d - orc.objective) / std::max(1.0, std::abs(orc.objective));
  std::cout << "oracle optimum   " << money(orc.objective) << "  (" << orc.feasible_assignments
            << " feasible assignments)\n";
  std::cout << "DCA exact value  " << money(d) << "  (" << dca.num_subproblems() << " subproblems, "
            << to_string(dca.status) << ")\n";
  std::cout << "relative gap     " << gap << '\n';
  return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  const Case c = synthesize_case(spec);
  const fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_case(c, p);
  std::cout << "wrote " << out << ": " << c.buses.size() << " buses, " << c.lines.size() << " lines, "
            << c.generators.size() << " generators\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Security-constrained economic dispatch with emergency-zone cardinality penalties"};
  app.require_subcommand(1);
  Common o;

  auto* run = app.add_subcommand("run", "simulate every period of a case");
  run->add_option("--case", o.case_path, "case file")->required();
  run->add_option("--mode", o.mode, "cmp or strict")->check(CLI::IsMember({"cmp", "strict"}))->capture_default_str();
  run->add_option("--out", o.out, "output directory")->capture_default_str();
  add_dca_flags(run, o);
  add_case_flags(run, o);

  std::vector<std::string> cases;
  auto* cmp = app.add_subcommand("compare", "CMP against the strict model, one row per case");
  cmp->add_option("--case", cases, "case file (repeatable)")->required();
  cmp->add_option("--out", o.out, "output directory")->capture_default_str();
  cmp->add_option("--jobs", o.jobs, "parallel scenarios");
  add_dca_flags(cmp, o);
  add_case_flags(cmp, o);

  GridSearchSpec spec = GridSearchSpec::defaults();
  auto* grid = app.add_subcommand("grid-search", "sweep epsilon, gamma_l and gamma_s");
  grid->add_option("--case", o.case_path, "case file")->required();
  grid->add_option("--eps-values", spec.epsilon, "epsilon grid");
  grid->add_option("--gamma-l-values", spec.gamma_l, "gamma_l grid");
  grid->add_option("--gamma-s-values", spec.gamma_s, "gamma_s grid");
  grid->add_option("--out", o.out, "output directory")->capture_default_str();
  grid->add_option("--jobs", o.jobs, "parallel runs");
  add_dca_flags(grid, o);
  add_case_flags(grid, o);

  int period = 0;
  auto* orc = app.add_subcommand("oracle", "certify DCA against exhaustive zone enumeration");
  orc->add_option("--case", o.case_path, "case file")->required();
  orc->add_option("--period", period, "period index")->capture_default_str();
  add_dca_flags(orc, o);
  add_case_flags(orc, o);

  SynthSpec synth_spec;
  std::string synth_out;
  auto* syn = app.add_subcommand("synth", "write a random test network");
  syn->add_option("--out", synth_out, "case file to write")->required();
  syn->add_option("--seed", synth_spec.seed)->capture_default_str();
  syn->add_option("--buses", synth_spec.buses)->capture_default_str();
  syn->add_option("--lines", synth_spec.lines)->capture_default_str();
  syn->add_option("--generators", synth_spec.generators)->capture_default_str();
  syn->add_option("--renewables", synth_spec.renewables)->capture_default_str();
  syn->add_option("--loads", synth_spec.loads)->capture_default_str();
  syn->add_option("--horizon", synth_spec.horizon)->capture_default_str();
  syn->add_option("--dt", synth_spec.dt)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(o);
    if (*cmp) return cmd_compare(o, cases);
    if (*grid) return cmd_grid(o, spec);
    if (*orc) return cmd_oracle(o, period);
    if (*syn) return cmd_synth(synth_spec, synth_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
