#pragma once

#include "cmpsced/rolling.hpp"

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace cmpsced {

/// "normal/lte/ste" average zone counts.
std::string zone_triple(const SimulationSummary& s);

/// One row per period:
/// period,total_cost,generation_cost,curtailment_cost,shed_cost,shed_mwh,normal,lte,ste,dca_iters,dca_status
void write_period_csv(std::ostream& os, const SimulationResult& r);

/// Header "period,bus_<id>,..." then one row of prices per period.
void write_lmp_csv(std::ostream& os, const SimulationResult& r, const Case& c);

/// Writes period.csv and lmp.csv under `dir`, creating it if needed.
void write_run(const std::filesystem::path& dir, const SimulationResult& r, const Case& c);

struct ComparisonRow {
  std::string scenario;
  SimulationSummary cmp;
  SimulationSummary strict;
  std::string error;  // non-empty if either run failed
};

ComparisonRow compare(const std::string& scenario, const Case& c, const DcaConfig& cfg, double load_scale);

/// scenario,cmp_cost,strict_cost,cmp_shed_mwh,strict_shed_mwh,cmp_zones,strict_zones,status
void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows);

struct GridSearchSpec {
  std::vector<double> epsilon;
  std::vector<double> gamma_l;
  std::vector<double> gamma_s;

  /// 5 log-spaced epsilons 1e-4..1, gammas 0.1..1.0 in steps of 0.1.
  static GridSearchSpec defaults();
  void validate() const;
  std::size_t size() const { return epsilon.size() * gamma_l.size() * gamma_s.size(); }
};

struct GridRow {
  double epsilon = 0.0;
  double gamma_l = 0.0;
  double gamma_s = 0.0;
  bool ok = false;
  std::string status;
  SimulationSummary summary;
};

/// Runs every combination on up to `jobs` threads. Successful rows come
/// first, sorted by total cost, then failures; ties break on the parameters.
std::vector<GridRow> grid_search(const Case& c, const GridSearchSpec& spec, const DcaConfig& base,
                                 double load_scale, unsigned jobs);

/// epsilon,gamma_l,gamma_s,total_cost,total_shed_mwh,avg_normal,avg_lte,avg_ste,status
void write_grid_csv(std::ostream& os, const std::vector<GridRow>& rows);

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& work);

}  // namespace cmpsced
