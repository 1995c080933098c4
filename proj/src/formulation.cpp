#include "cmpsced/formulation.hpp"

#include <algorithm>
#include <cmath>

namespace cmpsced {

using Eigen::Index;
using Term = ProgramBuilder::Term;

Observation observe(const Case& c, int t) {
  Observation obs;
  const auto k = static_cast<std::size_t>(t);
  for (const auto& r : c.renewables) obs.availability.push_back(r.availability.at(k));
  for (const auto& d : c.loads) obs.demand.push_back(d.demand.at(k));
  return obs;
}

DispatchState fresh_state(const Case& c) {
  DispatchState s;
  s.prev_flow.assign(c.lines.size(), 0.0);
  s.tau_l.assign(c.lines.size(), 0);
  s.tau_s.assign(c.lines.size(), 0);
  return s;
}

std::string flow_balance_tag(BusId bus) { return "flow_balance:" + std::to_string(bus); }
std::string flow_def_tag(const std::string& line_id) { return "flow_def:" + line_id; }

Fragment build_base(const Case& c, int /*t*/, const Observation& obs) {
  Fragment frag;
  ProgramBuilder& b = frag.builder;
  VariableMap& v = frag.vars;
  v.num_gen = c.generators.size();
  v.num_renew = c.renewables.size();
  v.num_load = c.loads.size();
  v.num_line = c.lines.size();
  v.num_bus = c.buses.size();

  v.gen = b.num_vars();
  for (const auto& g : c.generators) b.add_variable(g.p_min, g.p_max, c.dt * g.cost);
  v.renew = b.num_vars();
  for (std::size_t r = 0; r < v.num_renew; ++r) b.add_variable(0.0, obs.availability[r]);
  v.load = b.num_vars();
  for (std::size_t d = 0; d < v.num_load; ++d) b.add_variable(0.0, obs.demand[d]);
  v.flow = b.num_vars();
  for (const auto& l : c.lines) b.add_variable(-l.zeta_s, l.zeta_s);
  v.angle = b.num_vars();
  const std::size_t ref = c.reference_bus();
  for (std::size_t i = 0; i < v.num_bus; ++i) {
    if (i == ref) {
      b.add_variable(0.0, 0.0);
    } else {
      b.add_variable(c.buses[i].theta_min, c.buses[i].theta_max);
    }
  }
  v.curtail = b.num_vars();
  for (const auto& r : c.renewables) b.add_variable(0.0, kInf, c.dt * r.curtail_penalty);
  v.shed = b.num_vars();
  for (const auto& d : c.loads) b.add_variable(0.0, kInf, c.dt * d.shed_penalty);
  v.end = b.num_vars();

  // u >= xi - p, v >= xi - p
  for (std::size_t r = 0; r < v.num_renew; ++r) {
    b.add_inequality({{v.p_renew(r), -1.0}, {v.u(r), -1.0}}, -obs.availability[r]);
  }
  for (std::size_t d = 0; d < v.num_load; ++d) {
    b.add_inequality({{v.p_load(d), -1.0}, {v.v(d), -1.0}}, -obs.demand[d]);
  }

  // Net injection at every bus.
  std::vector<std::vector<Term>> balance(v.num_bus);
  for (std::size_t g = 0; g < v.num_gen; ++g) {
    balance[c.bus_index(c.generators[g].bus)].push_back({v.p_gen(g), 1.0});
  }
  for (std::size_t r = 0; r < v.num_renew; ++r) {
    balance[c.bus_index(c.renewables[r].bus)].push_back({v.p_renew(r), 1.0});
  }
  for (std::size_t d = 0; d < v.num_load; ++d) {
    balance[c.bus_index(c.loads[d].bus)].push_back({v.p_load(d), -1.0});
  }
  for (std::size_t l = 0; l < v.num_line; ++l) {
    balance[c.bus_index(c.lines[l].from_bus)].push_back({v.f(l), -1.0});
    balance[c.bus_index(c.lines[l].to_bus)].push_back({v.f(l), 1.0});
  }
  for (std::size_t i = 0; i < v.num_bus; ++i) {
    b.add_equality(std::move(balance[i]), 0.0, flow_balance_tag(c.buses[i].id));
  }

  // f = base * (theta_i - theta_j) / X
  for (std::size_t l = 0; l < v.num_line; ++l) {
    const Line& line = c.lines[l];
    const double k = c.base_mva / line.reactance;
    b.add_equality({{v.f(l), 1.0},
                    {v.theta(c.bus_index(line.from_bus)), -k},
                    {v.theta(c.bus_index(line.to_bus)), k}},
                   0.0, flow_def_tag(line.id));
  }
  return frag;
}

void apply_ramping(Fragment& frag, const Case& c, const std::vector<double>& prev_gen) {
  if (prev_gen.size() != c.generators.size()) {
    throw std::invalid_argument("prev_gen has wrong length");
  }
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const Generator& gen = c.generators[g];
    const Index var = frag.vars.p_gen(g);
    const double lo = std::max(frag.builder.lower(var), prev_gen[g] + gen.ramp_min);
    const double hi = std::min(frag.builder.upper(var), prev_gen[g] + gen.ramp_max);
    if (lo > hi) {
      throw RampingError("empty-interval: generator " + gen.id + " ramp window [" +
                         std::to_string(prev_gen[g] + gen.ramp_min) + ", " +
                         std::to_string(prev_gen[g] + gen.ramp_max) + "] misses capacity range");
    }
    frag.builder.tighten_bounds(var, lo, hi);
  }
}

EffectiveBounds effective_bounds(const Case& c, const std::vector<int>& tau_l, const std::vector<int>& tau_s) {
  EffectiveBounds eb;
  eb.cap.reserve(c.lines.size());
  for (std::size_t l = 0; l < c.lines.size(); ++l) {
    const Line& line = c.lines[l];
    if (tau_l.at(l) >= c.lte_limit) {
      eb.cap.push_back(line.zeta_n);
    } else if (tau_s.at(l) >= c.ste_limit) {
      eb.cap.push_back(line.zeta_l);
    } else {
      eb.cap.push_back(line.zeta_s);
    }
  }
  return eb;
}

void apply_flow_caps(Fragment& frag, const std::vector<double>& cap) {
  if (cap.size() != frag.vars.num_line) throw std::invalid_argument("cap has wrong length");
  for (std::size_t l = 0; l < cap.size(); ++l) {
    frag.builder.tighten_bounds(frag.vars.f(l), -cap[l], cap[l]);
  }
}

Fragment strict_fragment(const Case& c, int t, const Observation& obs,
                         const std::optional<std::vector<double>>& prev_gen) {
  Fragment frag = build_base(c, t, obs);
  if (prev_gen) apply_ramping(frag, c, *prev_gen);
  std::vector<double> cap;
  for (const auto& l : c.lines) cap.push_back(l.zeta_n);
  apply_flow_caps(frag, cap);
  return frag;
}

ConvexProgram strict_model(const Case& c, int t, const Observation& obs,
                           const std::optional<std::vector<double>>& prev_gen) {
  return strict_fragment(c, t, obs, prev_gen).builder.build();
}

CostBreakdown operating_cost(const Case& c, const Observation& obs, const VariableMap& vars,
                             const Eigen::VectorXd& x) {
  CostBreakdown cb;
  for (std::size_t g = 0; g < vars.num_gen; ++g) {
    cb.generation += c.dt * c.generators[g].cost * x[vars.p_gen(g)];
  }
  for (std::size_t r = 0; r < vars.num_renew; ++r) {
    const double lost = std::max(obs.availability[r] - x[vars.p_renew(r)], 0.0);
    cb.curtailment += c.dt * c.renewables[r].curtail_penalty * lost;
  }
  for (std::size_t d = 0; d < vars.num_load; ++d) {
    const double lost = std::max(obs.demand[d] - x[vars.p_load(d)], 0.0);
    cb.shedding += c.dt * c.loads[d].shed_penalty * lost;
    cb.shed_energy += c.dt * lost;
  }
  return cb;
}

std::vector<double> flows(const VariableMap& vars, const Eigen::VectorXd& x) {
  std::vector<double> f(vars.num_line);
  for (std::size_t l = 0; l < f.size(); ++l) f[l] = x[vars.f(l)];
  return f;
}

std::vector<double> generation(const VariableMap& vars, const Eigen::VectorXd& x) {
  std::vector<double> p(vars.num_gen);
  for (std::size_t g = 0; g < p.size(); ++g) p[g] = x[vars.p_gen(g)];
  return p;
}

std::vector<double> lmps(const Case& c, const ConvexProgram& prog, const SolverSolution& sol) {
  std::vector<double> out;
  out.reserve(c.buses.size());
  for (const auto& bus : c.buses) {
    const auto row = prog.find_eq(flow_balance_tag(bus.id));
    if (!row) throw std::logic_error("program has no balance row for bus " + std::to_string(bus.id));
    // The balance row's right-hand side acts as extra withdrawal at the bus.
    out.push_back(sol.eq_duals[*row] / c.dt);
  }
  return out;
}

}  // namespace cmpsced
