#pragma once

#include "cmpsced/dca.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace cmpsced {

enum class Mode { cmp, strict };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

/// A period could not be dispatched. Carries the period index.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(int period, const std::string& what)
      : std::runtime_error("period " + std::to_string(period) + ": " + what), period_(period) {}
  int period() const { return period_; }

 private:
  int period_;
};

struct PeriodReport {
  int period = 0;
  CostBreakdown cost;
  int normal = 0;
  int lte = 0;
  int ste = 0;
  std::vector<double> lmp;    // per bus, $/MWh
  std::vector<double> flows;  // per line, MW
  int dca_iters = 0;          // subproblems solved; 0 in strict mode
  std::string dca_status;     // empty in strict mode
};

struct SimulationSummary {
  double total_cost = 0.0;
  double generation_cost = 0.0;
  double curtailment_cost = 0.0;
  double shed_cost = 0.0;
  double total_shed = 0.0;  // MWh
  double avg_normal = 0.0;
  double avg_lte = 0.0;
  double avg_ste = 0.0;
  long normal_line_periods = 0;
};

struct SimulationResult {
  Mode mode = Mode::cmp;
  std::vector<PeriodReport> periods;
  SimulationSummary summary;
};

/// Counters after a period with the given flows: a counter resets when the
/// flow is back under its threshold, otherwise it counts up to its limit.
/// prev_gen and prev_flow are replaced.
DispatchState update_tau(const DispatchState& state, const std::vector<double>& flows,
                         const std::vector<double>& gen, const Case& c);

/// State before period 0: the strict dispatch of period 0 without ramping,
/// counters at zero.
DispatchState initial_state(const Case& c);

/// Runs every period in order. Throws SimulationError when a period fails.
SimulationResult simulate(const Case& c, Mode mode, const DcaConfig& cfg, double load_scale = 1.0);

SimulationSummary summarize(const std::vector<PeriodReport>& periods);

}  // namespace cmpsced
