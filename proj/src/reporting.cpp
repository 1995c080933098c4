#include "cmpsced/reporting.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <tuple>

namespace cmpsced {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fixed2(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

}  // namespace

std::string zone_triple(const SimulationSummary& s) {
  return fixed2(s.avg_normal) + "/" + fixed2(s.avg_lte) + "/" + fixed2(s.avg_ste);
}

void write_period_csv(std::ostream& os, const SimulationResult& r) {
  os << "period,total_cost,generation_cost,curtailment_cost,shed_cost,shed_mwh,normal,lte,ste,dca_iters,dca_status\n";
  for (const auto& p : r.periods) {
    os << p.period << ',' << num(p.cost.total()) << ',' << num(p.cost.generation) << ','
       << num(p.cost.curtailment) << ',' << num(p.cost.shedding) << ',' << num(p.cost.shed_energy) << ','
       << p.normal << ',' << p.lte << ',' << p.ste << ',' << p.dca_iters << ','
       << (p.dca_status.empty() ? "-" : p.dca_status) << '\n';
  }
}

void write_lmp_csv(std::ostream& os, const SimulationResult& r, const Case& c) {
  os << "period";
  for (const auto& b : c.buses) os << ",bus_" << b.id;
  os << '\n';
  for (const auto& p : r.periods) {
    os << p.period;
    for (double v : p.lmp) os << ',' << num(v);
    os << '\n';
  }
}

void write_run(const std::filesystem::path& dir, const SimulationResult& r, const Case& c) {
  std::filesystem::create_directories(dir);
  std::ofstream period(dir / "period.csv");
  write_period_csv(period, r);
  std::ofstream lmp(dir / "lmp.csv");
  write_lmp_csv(lmp, r, c);
  if (!period || !lmp) throw std::runtime_error("cannot write CSV files under " + dir.string());
}

ComparisonRow compare(const std::string& scenario, const Case& c, const DcaConfig& cfg, double load_scale) {
  ComparisonRow row;
  row.scenario = scenario;
  try {
    row.cmp = simulate(c, Mode::cmp, cfg, load_scale).summary;
    row.strict = simulate(c, Mode::strict, cfg, load_scale).summary;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "scenario,cmp_cost,strict_cost,cmp_shed_mwh,strict_shed_mwh,cmp_zones,strict_zones,status\n";
  for (const auto& r : rows) {
    os << r.scenario << ',' << num(r.cmp.total_cost) << ',' << num(r.strict.total_cost) << ','
       << num(r.cmp.total_shed) << ',' << num(r.strict.total_shed) << ',' << zone_triple(r.cmp) << ','
       << zone_triple(r.strict) << ',' << (r.error.empty() ? "ok" : "\"" + r.error + "\"") << '\n';
  }
}

GridSearchSpec GridSearchSpec::defaults() {
  GridSearchSpec s;
  s.epsilon = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  for (int k = 1; k <= 10; ++k) {
    s.gamma_l.push_back(k / 10.0);
    s.gamma_s.push_back(k / 10.0);
  }
  return s;
}

void GridSearchSpec::validate() const {
  if (epsilon.empty() || gamma_l.empty() || gamma_s.empty()) {
    throw std::invalid_argument("grid lists must be non-empty");
  }
  for (const auto* v : {&epsilon, &gamma_l, &gamma_s}) {
    for (double x : *v) {
      if (!(x > 0.0)) throw std::invalid_argument("grid values must be positive");
    }
  }
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& work) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) work(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<GridRow> grid_search(const Case& c, const GridSearchSpec& spec, const DcaConfig& base,
                                 double load_scale, unsigned jobs) {
  spec.validate();
  std::vector<GridRow> rows;
  for (double e : spec.epsilon) {
    for (double gl : spec.gamma_l) {
      for (double gs : spec.gamma_s) {
        GridRow r;
        r.epsilon = e;
        r.gamma_l = gl;
        r.gamma_s = gs;
        rows.push_back(r);
      }
    }
  }
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    GridRow& r = rows[i];
    DcaConfig cfg = base;
    cfg.epsilon = r.epsilon;
    cfg.gamma_l = r.gamma_l;
    cfg.gamma_s = r.gamma_s;
    try {
      r.summary = simulate(c, Mode::cmp, cfg, load_scale).summary;
      r.ok = true;
      r.status = "ok";
    } catch (const std::exception& e) {
      r.status = e.what();
    }
  });
  std::sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    return std::make_tuple(!a.ok, a.ok ? a.summary.total_cost : 0.0, a.epsilon, a.gamma_l, a.gamma_s) <
           std::make_tuple(!b.ok, b.ok ? b.summary.total_cost : 0.0, b.epsilon, b.gamma_l, b.gamma_s);
  });
  return rows;
}

void write_grid_csv(std::ostream& os, const std::vector<GridRow>& rows) {
  os << "epsilon,gamma_l,gamma_s,total_cost,total_shed_mwh,avg_normal,avg_lte,avg_ste,status\n";
  for (const auto& r : rows) {
    os << num(r.epsilon) << ',' << num(r.gamma_l) << ',' << num(r.gamma_s) << ',' << num(r.summary.total_cost)
       << ',' << num(r.summary.total_shed) << ',' << num(r.summary.avg_normal) << ','
       << num(r.summary.avg_lte) << ',' << num(r.summary.avg_ste) << ','
       << (r.ok ? "ok" : "\"" + r.status + "\"") << '\n';
  }
}

}  // namespace cmpsced
