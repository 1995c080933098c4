#pragma once

#include "cmpsced/formulation.hpp"

#include <string>
#include <vector>

namespace cmpsced {

/// Flows within this many MW of a threshold count as on it, so solver noise
/// at an active cap does not register as an exceedance.
inline constexpr double kZoneTolerance = 1e-6;

/// Ramp from 0 at |f| = zeta to 1 at |f| = zeta + eps.
double phi(double f, double zeta, double eps);

struct GhValue {
  double g = 0.0;
  double h = 0.0;
};

/// phi = g - h with g = max((|f|-zeta)/eps, 0), h = max((|f|-zeta)/eps - 1, 0).
GhValue g_h_split(double f, double zeta, double eps);

/// An element of the subdifferential of h; 0 at the kinks.
double h_subgradient(double f, double zeta, double eps);

enum class Zone { normal, lte, ste };

std::string to_string(Zone z);

Zone classify(double f, const Line& line);

/// Lines strictly above zeta_n (lte) and above zeta_l (ste). ste is a subset
/// of lte.
struct ZoneSets {
  std::vector<std::size_t> lte;
  std::vector<std::size_t> ste;
};

ZoneSets exact_zone_sets(const std::vector<double>& flows, const Case& c);

enum class LmpSource { final_subproblem, resolve };

std::string to_string(LmpSource s);
LmpSource parse_lmp_source(const std::string& s);

struct DcaConfig {
  double epsilon = 0.1;   // MW
  double gamma_l = 0.5;
  double gamma_s = 0.5;
  double prox_c = 1e-3;
  double tol_obj = 1e-6;
  double tol_x = 1e-4;    // MW
  int max_iters = 50;
  LmpSource lmp_source = LmpSource::final_subproblem;
  SolverOptions solver;

  /// Throws std::invalid_argument on a non-positive weight or tolerance.
  void validate() const;
};

/// gamma_l * |E_l| + gamma_s * |E_s|
double zone_penalty(const std::vector<double>& flows, const Case& c, const DcaConfig& cfg);

/// Smooth-surrogate counterpart of zone_penalty.
double approx_zone_penalty(const std::vector<double>& flows, const Case& c, const DcaConfig& cfg);

/// F1 + F2 with exact zone counting.
double exact_cmp_objective(const Case& c, const Observation& obs, const VariableMap& vars,
                           const Eigen::VectorXd& x, const DcaConfig& cfg);

struct DcaIteration {
  double approx_objective = 0.0;
  double exact_objective = 0.0;
  double flow_change = 0.0;  // inf-norm against the previous iterate
};

enum class DcaStatus { converged, max_iters, subproblem_error };

std::string to_string(DcaStatus s);

struct DcaResult {
  DcaStatus status = DcaStatus::subproblem_error;
  std::string error;
  Eigen::VectorXd x;
  VariableMap vars;
  std::vector<double> flows;
  std::vector<double> generation;
  /// Entry 0 is the starting point; one entry per subproblem after that.
  std::vector<DcaIteration> iterations;
  std::vector<double> lmp;  // $/MWh per bus
  CostBreakdown cost;

  int num_subproblems() const { return iterations.empty() ? 0 : static_cast<int>(iterations.size()) - 1; }
  double exact_objective() const { return iterations.empty() ? 0.0 : iterations.back().exact_objective; }
};

/// Runs the DC algorithm for one period under the caps implied by `state`.
/// Ramping applies when state.prev_gen is set. Throws RampingError for an
/// empty ramp window.
DcaResult dca_solve(const Case& c, int t, const Observation& obs, const DispatchState& state,
                    const DcaConfig& cfg);

}  // namespace cmpsced
