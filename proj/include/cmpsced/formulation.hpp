#pragma once

#include "cmpsced/network.hpp"
#include "cmpsced/qp.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace cmpsced {

/// Realized renewable availability and demand for one period.
struct Observation {
  std::vector<double> availability;  // per renewable, MW
  std::vector<double> demand;        // per load, MW
};

Observation observe(const Case& c, int t);

/// Rolling-horizon state carried into a period: last dispatch and the number
/// of consecutive periods each line has spent above zeta_n (tau_l) and above
/// zeta_l (tau_s). An empty prev_gen disables ramping.
struct DispatchState {
  std::vector<double> prev_gen;
  std::vector<double> prev_flow;
  std::vector<int> tau_l;
  std::vector<int> tau_s;

  bool operator==(const DispatchState&) const = default;
};

/// Zero counters, no previous dispatch.
DispatchState fresh_state(const Case& c);

/// Where each model quantity lives in the decision vector. Blocks are laid
/// out contiguously in the order listed.
struct VariableMap {
  Eigen::Index gen = 0;      // p_g, conventional generators
  Eigen::Index renew = 0;    // p_g, renewables
  Eigen::Index load = 0;     // p_d, served demand
  Eigen::Index flow = 0;     // f per line
  Eigen::Index angle = 0;    // theta per bus
  Eigen::Index curtail = 0;  // u_g >= (xi_g - p_g)+
  Eigen::Index shed = 0;     // v_d >= (xi_d - p_d)+
  Eigen::Index end = 0;      // one past the base block

  std::size_t num_gen = 0, num_renew = 0, num_load = 0, num_line = 0, num_bus = 0;

  Eigen::Index p_gen(std::size_t g) const { return gen + static_cast<Eigen::Index>(g); }
  Eigen::Index p_renew(std::size_t r) const { return renew + static_cast<Eigen::Index>(r); }
  Eigen::Index p_load(std::size_t d) const { return load + static_cast<Eigen::Index>(d); }
  Eigen::Index f(std::size_t l) const { return flow + static_cast<Eigen::Index>(l); }
  Eigen::Index theta(std::size_t b) const { return angle + static_cast<Eigen::Index>(b); }
  Eigen::Index u(std::size_t r) const { return curtail + static_cast<Eigen::Index>(r); }
  Eigen::Index v(std::size_t d) const { return shed + static_cast<Eigen::Index>(d); }
};

/// A period model under construction. Callers may append variables and rows
/// to `builder` before building the program.
struct Fragment {
  ProgramBuilder builder;
  VariableMap vars;
};

/// Ramping left a generator with no feasible output.
class RampingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string flow_balance_tag(BusId bus);
std::string flow_def_tag(const std::string& line_id);

/// F1 plus network, capacity and DC flow constraints for period `t`, with
/// |f| <= zeta_s on every line.
Fragment build_base(const Case& c, int t, const Observation& obs);

/// Intersects each generator's capacity bounds with its ramping window
/// around `prev_gen`. Throws RampingError if a window is empty.
void apply_ramping(Fragment& frag, const Case& c, const std::vector<double>& prev_gen);

/// Per-line cap on |f| for the current period.
struct EffectiveBounds {
  std::vector<double> cap;
};

/// zeta_n once the LTE budget is used up, else zeta_l once the STE budget is
/// used up, else zeta_s.
EffectiveBounds effective_bounds(const Case& c, const std::vector<int>& tau_l, const std::vector<int>& tau_s);

/// Tightens |f| <= cap line by line.
void apply_flow_caps(Fragment& frag, const std::vector<double>& cap);

/// Baseline LP: every line held to its normal rating. Ramping is skipped
/// without `prev_gen`.
Fragment strict_fragment(const Case& c, int t, const Observation& obs,
                         const std::optional<std::vector<double>>& prev_gen);
ConvexProgram strict_model(const Case& c, int t, const Observation& obs,
                           const std::optional<std::vector<double>>& prev_gen);

/// Operating cost split by source, evaluated at a dispatch.
struct CostBreakdown {
  double generation = 0.0;
  double curtailment = 0.0;
  double shedding = 0.0;
  double shed_energy = 0.0;  // MWh

  double total() const { return generation + curtailment + shedding; }
};

CostBreakdown operating_cost(const Case& c, const Observation& obs, const VariableMap& vars,
                             const Eigen::VectorXd& x);

std::vector<double> flows(const VariableMap& vars, const Eigen::VectorXd& x);
std::vector<double> generation(const VariableMap& vars, const Eigen::VectorXd& x);

/// Locational marginal prices ($/MWh) from the flow balance duals.
std::vector<double> lmps(const Case& c, const ConvexProgram& prog, const SolverSolution& sol);

}  // namespace cmpsced
