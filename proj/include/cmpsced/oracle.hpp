#pragma once

#include "cmpsced/dca.hpp"

#include <stdexcept>
#include <vector>

namespace cmpsced {

/// Largest line count the enumeration accepts (3^12 LPs).
inline constexpr std::size_t kOracleMaxLines = 12;

class OracleBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ZoneAssignment = std::vector<Zone>;

struct OracleResult {
  double objective = 0.0;  // F1 + zone penalty of the assignment
  Eigen::VectorXd x;
  VariableMap vars;
  std::vector<double> flows;
  ZoneAssignment assignment;
  std::size_t feasible_assignments = 0;
};

/// Global minimum of F1 + gamma_l |E_l| + gamma_s |E_s| for one period, by
/// solving one LP per zone assignment with each line capped at the top of
/// its assigned zone. Throws OracleBudgetError above kOracleMaxLines lines
/// and std::runtime_error if no assignment is feasible.
OracleResult oracle_solve(const Case& c, int t, const Observation& obs, const DispatchState& state,
                          const DcaConfig& cfg);

}  // namespace cmpsced
