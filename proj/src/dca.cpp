#include "cmpsced/dca.hpp"

#include "log.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmpsced {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

double scaled_excess(double f, double zeta, double eps) { return (std::abs(f) - zeta) / eps; }

Fragment period_fragment(const Case& c, int t, const Observation& obs, const DispatchState& state) {
  Fragment frag = build_base(c, t, obs);
  if (!state.prev_gen.empty()) apply_ramping(frag, c, state.prev_gen);
  apply_flow_caps(frag, effective_bounds(c, state.tau_l, state.tau_s).cap);
  return frag;
}

// Adds gamma * (b / eps - slope * f) with b >= |f| - zeta, b >= 0, for
// every line. b is the excess in MW; keeping it in MW rather than in units
// of eps keeps the rows well scaled when eps is small.
void add_zone_terms(Fragment& frag, const Case& c, const std::vector<double>& fk, double Line::*zeta,
                    double gamma, const DcaConfig& cfg) {
  ProgramBuilder& b = frag.builder;
  for (std::size_t l = 0; l < c.lines.size(); ++l) {
    const double z = c.lines[l].*zeta;
    const Index f = frag.vars.f(l);
    const Index excess = b.add_variable(0.0, kInf, gamma / cfg.epsilon);
    b.add_inequality({{f, 1.0}, {excess, -1.0}}, z);
    b.add_inequality({{f, -1.0}, {excess, -1.0}}, z);
    b.add_linear_cost(f, -gamma * h_subgradient(fk[l], z, cfg.epsilon));
  }
}

}  // namespace

double phi(double f, double zeta, double eps) {
  return std::clamp(scaled_excess(f, zeta, eps), 0.0, 1.0);
}

GhValue g_h_split(double f, double zeta, double eps) {
  const double t = scaled_excess(f, zeta, eps);
  return {std::max(t, 0.0), std::max(t - 1.0, 0.0)};
}

double h_subgradient(double f, double zeta, double eps) {
  if (f > zeta + eps) return 1.0 / eps;
  if (f < -(zeta + eps)) return -1.0 / eps;
  return 0.0;
}

std::string to_string(Zone z) {
  switch (z) {
    case Zone::normal: return "normal";
    case Zone::lte: return "lte";
    case Zone::ste: return "ste";
  }
  return "unknown";
}

Zone classify(double f, const Line& line) {
  const double a = std::abs(f);
  if (a > line.zeta_l + kZoneTolerance) return Zone::ste;
  if (a > line.zeta_n + kZoneTolerance) return Zone::lte;
  return Zone::normal;
}

ZoneSets exact_zone_sets(const std::vector<double>& flows, const Case& c) {
  if (flows.size() != c.lines.size()) throw std::invalid_argument("flows has wrong length");
  ZoneSets z;
  for (std::size_t l = 0; l < flows.size(); ++l) {
    const Zone k = classify(flows[l], c.lines[l]);
    if (k != Zone::normal) z.lte.push_back(l);
    if (k == Zone::ste) z.ste.push_back(l);
  }
  return z;
}

std::string to_string(LmpSource s) {
  return s == LmpSource::final_subproblem ? "final-subproblem" : "resolve";
}

LmpSource parse_lmp_source(const std::string& s) {
  if (s == "final-subproblem") return LmpSource::final_subproblem;
  if (s == "resolve") return LmpSource::resolve;
  throw std::invalid_argument("unknown LMP source '" + s + "'");
}

void DcaConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(gamma_l > 0.0) || !(gamma_s > 0.0)) throw std::invalid_argument("zone weights must be positive");
  if (!(prox_c >= 0.0)) throw std::invalid_argument("proximal weight must be nonnegative");
  if (!(tol_obj > 0.0) || !(tol_x > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
}

double zone_penalty(const std::vector<double>& flows, const Case& c, const DcaConfig& cfg) {
  const ZoneSets z = exact_zone_sets(flows, c);
  return cfg.gamma_l * static_cast<double>(z.lte.size()) + cfg.gamma_s * static_cast<double>(z.ste.size());
}

double approx_zone_penalty(const std::vector<double>& flows, const Case& c, const DcaConfig& cfg) {
  double sum = 0.0;
  for (std::size_t l = 0; l < flows.size(); ++l) {
    sum += cfg.gamma_l * phi(flows[l], c.lines[l].zeta_n, cfg.epsilon);
    sum += cfg.gamma_s * phi(flows[l], c.lines[l].zeta_l, cfg.epsilon);
  }
  return sum;
}

double exact_cmp_objective(const Case& c, const Observation& obs, const VariableMap& vars, const VectorXd& x,
                           const DcaConfig& cfg) {
  return operating_cost(c, obs, vars, x).total() + zone_penalty(flows(vars, x), c, cfg);
}

std::string to_string(DcaStatus s) {
  switch (s) {
    case DcaStatus::converged: return "converged";
    case DcaStatus::max_iters: return "max_iters";
    case DcaStatus::subproblem_error: return "subproblem_error";
  }
  return "unknown";
}

DcaResult dca_solve(const Case& c, int t, const Observation& obs, const DispatchState& state,
                    const DcaConfig& cfg) {
  cfg.validate();
  DcaResult res;
  const Fragment base = period_fragment(c, t, obs, state);
  res.vars = base.vars;

  auto record = [&](const VectorXd& x, const std::vector<double>& prev) {
    DcaIteration it;
    const std::vector<double> f = flows(res.vars, x);
    const double f1 = operating_cost(c, obs, res.vars, x).total();
    it.approx_objective = f1 + approx_zone_penalty(f, c, cfg);
    it.exact_objective = f1 + zone_penalty(f, c, cfg);
    for (std::size_t l = 0; l < f.size(); ++l) {
      it.flow_change = std::max(it.flow_change, std::abs(f[l] - (prev.empty() ? 0.0 : prev[l])));
    }
    if (prev.empty()) it.flow_change = 0.0;
    res.iterations.push_back(it);
    return f;
  };

  // Start from the cheapest dispatch under the current caps.
  const ConvexProgram start = base.builder.build();
  SolverSolution sol = solve(start, cfg.solver);
  if (!sol.ok()) {
    res.status = DcaStatus::subproblem_error;
    res.error = "initial LP " + to_string(sol.status);
    return res;
  }
  std::vector<double> fk = record(sol.x, {});
  res.x = sol.x;
  ConvexProgram last = start;
  SolverSolution last_sol = sol;
  detail::log().debug("period {} dca start: approx {:.6f} exact {:.6f}", t, res.iterations[0].approx_objective,
                res.iterations[0].exact_objective);

  res.status = DcaStatus::max_iters;
  for (int k = 0; k < cfg.max_iters; ++k) {
    Fragment frag = base;
    add_zone_terms(frag, c, fk, &Line::zeta_n, cfg.gamma_l, cfg);
    add_zone_terms(frag, c, fk, &Line::zeta_l, cfg.gamma_s, cfg);
    if (cfg.prox_c > 0.0) {
      for (std::size_t l = 0; l < fk.size(); ++l) {
        const Index f = frag.vars.f(l);
        frag.builder.add_quadratic(f, f, cfg.prox_c);
        frag.builder.add_linear_cost(f, -cfg.prox_c * fk[l]);
        frag.builder.add_constant_cost(0.5 * cfg.prox_c * fk[l] * fk[l]);
      }
    }
    ConvexProgram prog = frag.builder.build();
    sol = solve(prog, cfg.solver);
    if (!sol.ok()) {
      res.status = DcaStatus::subproblem_error;
      res.error = "subproblem " + std::to_string(k + 1) + " " +
                  to_string(sol.status);
      return res;
    }
    const double prev_obj = res.iterations.back().approx_objective;
    fk = record(sol.x, fk);
    res.x = sol.x.head(res.vars.end);
    last = std::move(prog);
    last_sol = std::move(sol);
    const DcaIteration& cur = res.iterations.back();
    detail::log().debug("period {} dca iter {}: approx {:.6f} exact {:.6f} df {:.3e}", t, k + 1, cur.approx_objective,
                  cur.exact_objective, cur.flow_change);
    if (std::abs(cur.approx_objective - prev_obj) <= cfg.tol_obj * std::max(1.0, std::abs(cur.approx_objective)) ||
        cur.flow_change <= cfg.tol_x) {
      res.status = DcaStatus::converged;
      break;
    }
  }

  res.flows = fk;
  res.generation = generation(res.vars, res.x);
  res.cost = operating_cost(c, obs, res.vars, res.x);

  if (cfg.lmp_source == LmpSource::final_subproblem) {
    res.lmp = lmps(c, last, last_sol);
  } else {
    // Re-price with each line capped at the top of the zone it ended in.
    Fragment frag = base;
    std::vector<double> cap;
    for (std::size_t l = 0; l < c.lines.size(); ++l) {
      const Line& line = c.lines[l];
      switch (classify(fk[l], line)) {
        case Zone::normal: cap.push_back(line.zeta_n); break;
        case Zone::lte: cap.push_back(line.zeta_l); break;
        case Zone::ste: cap.push_back(line.zeta_s); break;
      }
      // Keep the current iterate feasible despite the zone tolerance.
      cap.back() = std::max(cap.back(), std::abs(fk[l]));
    }
    apply_flow_caps(frag, cap);
    const ConvexProgram lp = frag.builder.build();
    const SolverSolution lp_sol = solve(lp, cfg.solver);
    if (!lp_sol.ok()) {
      res.status = DcaStatus::subproblem_error;
      res.error = "LMP re-solve " + to_string(lp_sol.status);
      return res;
    }
    res.lmp = lmps(c, lp, lp_sol);
  }
  return res;
}

}  // namespace cmpsced
