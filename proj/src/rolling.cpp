#include "cmpsced/rolling.hpp"

#include "log.hpp"

#include <algorithm>
#include <cmath>

namespace cmpsced {

std::string to_string(Mode m) { return m == Mode::cmp ? "cmp" : "strict"; }

Mode parse_mode(const std::string& s) {
  if (s == "cmp") return Mode::cmp;
  if (s == "strict") return Mode::strict;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

DispatchState update_tau(const DispatchState& state, const std::vector<double>& flows,
                         const std::vector<double>& gen, const Case& c) {
  DispatchState next = state;
  next.prev_gen = gen;
  next.prev_flow = flows;
  for (std::size_t l = 0; l < c.lines.size(); ++l) {
    const double a = std::abs(flows.at(l));
    const Line& line = c.lines[l];
    next.tau_l[l] = a <= line.zeta_n + kZoneTolerance ? 0 : std::min(state.tau_l[l] + 1, c.lte_limit);
    next.tau_s[l] = a <= line.zeta_l + kZoneTolerance ? 0 : std::min(state.tau_s[l] + 1, c.ste_limit);
  }
  return next;
}

DispatchState initial_state(const Case& c) {
  DispatchState s = fresh_state(c);
  const Observation obs = observe(c, 0);
  const Fragment frag = strict_fragment(c, 0, obs, std::nullopt);
  const SolverSolution sol = solve(frag.builder.build());
  if (!sol.ok()) throw SimulationError(0, "initial strict dispatch " + to_string(sol.status));
  s.prev_gen = generation(frag.vars, sol.x);
  s.prev_flow = flows(frag.vars, sol.x);
  return s;
}

namespace {

void count_zones(PeriodReport& rep, const Case& c) {
  for (std::size_t l = 0; l < c.lines.size(); ++l) {
    switch (classify(rep.flows[l], c.lines[l])) {
      case Zone::normal: ++rep.normal; break;
      case Zone::lte: ++rep.lte; break;
      case Zone::ste: ++rep.ste; break;
    }
  }
}

PeriodReport strict_period(const Case& c, int t, const Observation& obs, const DispatchState& state,
                           std::vector<double>& gen) {
  const Fragment frag = strict_fragment(c, t, obs, state.prev_gen);
  const ConvexProgram prog = frag.builder.build();
  const SolverSolution sol = solve(prog);
  if (!sol.ok()) throw SimulationError(t, "strict model " + to_string(sol.status));
  PeriodReport rep;
  rep.period = t;
  rep.cost = operating_cost(c, obs, frag.vars, sol.x);
  rep.flows = flows(frag.vars, sol.x);
  rep.lmp = lmps(c, prog, sol);
  gen = generation(frag.vars, sol.x);
  return rep;
}

PeriodReport cmp_period(const Case& c, int t, const Observation& obs, const DispatchState& state,
                        const DcaConfig& cfg, std::vector<double>& gen) {
  const DcaResult res = dca_solve(c, t, obs, state, cfg);
  if (res.status == DcaStatus::subproblem_error) throw SimulationError(t, res.error);
  PeriodReport rep;
  rep.period = t;
  rep.cost = res.cost;
  rep.flows = res.flows;
  rep.lmp = res.lmp;
  rep.dca_iters = res.num_subproblems();
  rep.dca_status = to_string(res.status);
  gen = res.generation;
  return rep;
}

}  // namespace

SimulationResult simulate(const Case& c, Mode mode, const DcaConfig& cfg, double load_scale) {
  if (mode == Mode::cmp) cfg.validate();
  const Case scaled = load_scale == 1.0 ? c : scale_loads(c, load_scale);
  SimulationResult out;
  out.mode = mode;
  DispatchState state = initial_state(scaled);
  for (int t = 0; t < scaled.horizon; ++t) {
    const Observation obs = observe(scaled, t);
    std::vector<double> gen;
    PeriodReport rep;
    try {
      rep = mode == Mode::cmp ? cmp_period(scaled, t, obs, state, cfg, gen)
                              : strict_period(scaled, t, obs, state, gen);
    } catch (const RampingError& e) {
      throw SimulationError(t, e.what());
    }
    count_zones(rep, scaled);
    detail::log().info("{} period {}: cost {:.2f} shed {:.4f} zones {}/{}/{}", to_string(mode), t, rep.cost.total(),
                 rep.cost.shed_energy, rep.normal, rep.lte, rep.ste);
    state = update_tau(state, rep.flows, gen, scaled);
    out.periods.push_back(std::move(rep));
  }
  out.summary = summarize(out.periods);
  return out;
}

SimulationSummary summarize(const std::vector<PeriodReport>& periods) {
  SimulationSummary s;
  for (const auto& p : periods) {
    s.total_cost += p.cost.total();
    s.generation_cost += p.cost.generation;
    s.curtailment_cost += p.cost.curtailment;
    s.shed_cost += p.cost.shedding;
    s.total_shed += p.cost.shed_energy;
    s.avg_normal += p.normal;
    s.avg_lte += p.lte;
    s.avg_ste += p.ste;
    s.normal_line_periods += p.normal;
  }
  if (!periods.empty()) {
    const auto n = static_cast<double>(periods.size());
    s.avg_normal /= n;
    s.avg_lte /= n;
    s.avg_ste /= n;
  }
  return s;
}

}  // namespace cmpsced
