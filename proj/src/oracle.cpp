#include "cmpsced/oracle.hpp"

#include <algorithm>
#include <limits>

namespace cmpsced {

OracleResult oracle_solve(const Case& c, int t, const Observation& obs, const DispatchState& state,
                          const DcaConfig& cfg) {
  const std::size_t L = c.lines.size();
  if (L > kOracleMaxLines) {
    throw OracleBudgetError("oracle enumerates 3^L zone assignments; " + std::to_string(L) +
                            " lines exceeds the limit of " + std::to_string(kOracleMaxLines));
  }
  Fragment base = build_base(c, t, obs);
  if (!state.prev_gen.empty()) apply_ramping(base, c, state.prev_gen);
  apply_flow_caps(base, effective_bounds(c, state.tau_l, state.tau_s).cap);

  OracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  best.vars = base.vars;
  ZoneAssignment zones(L, Zone::normal);
  std::size_t total = 1;
  for (std::size_t l = 0; l < L; ++l) total *= 3;

  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    int lte = 0, ste = 0;
    std::vector<double> cap(L);
    for (std::size_t l = 0; l < L; ++l) {
      zones[l] = static_cast<Zone>(rest % 3);
      rest /= 3;
      const Line& line = c.lines[l];
      switch (zones[l]) {
        case Zone::normal: cap[l] = line.zeta_n; break;
        case Zone::lte: cap[l] = line.zeta_l; ++lte; break;
        case Zone::ste: cap[l] = line.zeta_s; ++lte; ++ste; break;
      }
    }
    Fragment frag = base;
    apply_flow_caps(frag, cap);
    const SolverSolution sol = solve(frag.builder.build(), cfg.solver);
    if (!sol.ok()) continue;
    ++best.feasible_assignments;
    const double value = sol.objective + cfg.gamma_l * lte + cfg.gamma_s * ste;
    if (value < best.objective) {
      best.objective = value;
      best.x = sol.x;
      best.assignment = zones;
    }
  }
  if (best.feasible_assignments == 0) {
    throw std::runtime_error("period " + std::to_string(t) + ": no zone assignment is feasible");
  }
  best.flows = flows(best.vars, best.x);
  return best;
}

}  // namespace cmpsced
