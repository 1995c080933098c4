#pragma once

#include "cmpsced/network.hpp"
#include "cmpsced/qp.hpp"

#include <random>
#include <vector>

namespace cmpsced::testing {

// Random LP (quadratic = false) or convex QP with a known optimum: x is
// planted, multipliers are drawn, and q is chosen so the KKT conditions hold.
struct PlantedProgram {
  ConvexProgram prog;
  Eigen::VectorXd x;
};

inline PlantedProgram planted_program(std::mt19937_64& rng, int max_n, bool quadratic) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_n));
  const int me = static_cast<int>(rng() % static_cast<unsigned>(n / 2 + 1));
  const int mi = static_cast<int>(rng() % static_cast<unsigned>(n + 1));
  ConvexProgram p(n);
  if (quadratic) {
    const MatrixXd R = MatrixXd::NullaryExpr(n, std::max(1, n / 2), [&] { return N(rng); });
    p.Q = R * R.transpose();
  }
  const VectorXd x = VectorXd::NullaryExpr(n, [&] { return 3.0 * N(rng); });
  p.A_eq = MatrixXd::NullaryExpr(me, n, [&] { return N(rng); });
  p.b_eq = p.A_eq * x;
  const VectorXd y = VectorXd::NullaryExpr(me, [&] { return N(rng); });
  p.G = MatrixXd::NullaryExpr(mi, n, [&] { return N(rng); });
  p.h = p.G * x;
  VectorXd z = VectorXd::Zero(mi);
  for (int i = 0; i < mi; ++i) {
    if (U(rng) < 0.5) {
      z[i] = 2.0 * U(rng);
    } else {
      p.h[i] += 2.0 * U(rng);
    }
  }
  VectorXd zl = VectorXd::Zero(n), zu = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double r = U(rng);
    if (r < 0.3) {
      p.lb[i] = x[i];
      zl[i] = U(rng);
      p.ub[i] = x[i] + 5.0 * U(rng) + 0.1;
    } else if (r < 0.6) {
      p.lb[i] = x[i] - 4.0 * U(rng) - 0.1;
      p.ub[i] = x[i] + 4.0 * U(rng) + 0.1;
    }
  }
  p.q = -p.Q * x + p.A_eq.transpose() * y - p.G.transpose() * z - zu + zl;
  return {std::move(p), x};
}

// Generator at bus 1 (cost 10, 0..100 MW), load at bus 2, one line with
// X = 0.1 and ratings (50, 70, 90). dt = 1.
inline Case two_bus(std::vector<double> demand, int lte_limit = 16, int ste_limit = 1) {
  Case c;
  c.buses = {{1}, {2}};
  c.lines = {{"L1", 1, 2, 0.1, 50.0, 70.0, 90.0}};
  c.generators = {{"G1", 1, 0.0, 100.0, 10.0}};
  c.horizon = static_cast<int>(demand.size());
  c.loads = {{"D1", 2, 1000.0, std::move(demand)}};
  c.dt = 1.0;
  c.lte_limit = lte_limit;
  c.ste_limit = ste_limit;
  validate(c);
  return c;
}

// One bus, no lines, generator too small for the load.
inline Case one_bus_short(double demand, double pmax, int horizon = 1) {
  Case c;
  c.buses = {{1}};
  c.generators = {{"G1", 1, 0.0, pmax, 20.0}};
  c.loads = {{"D1", 1, 1000.0, std::vector<double>(horizon, demand)}};
  c.horizon = horizon;
  c.dt = 1.0;
  validate(c);
  return c;
}

// Three buses in a triangle: cheap generation at bus 1, expensive at bus 2,
// load at bus 3. The 1-3 line carries most of the transfer.
inline Case triangle(std::vector<double> demand, int lte_limit = 4, int ste_limit = 1) {
  Case c;
  c.buses = {{1}, {2}, {3}};
  c.lines = {{"L13", 1, 3, 0.1, 60.0, 75.0, 95.0},
             {"L12", 1, 2, 0.1, 80.0, 95.0, 110.0},
             {"L23", 2, 3, 0.1, 80.0, 95.0, 110.0}};
  c.generators = {{"Gcheap", 1, 0.0, 200.0, 15.0, -60.0, 60.0}, {"Gpeak", 2, 0.0, 40.0, 80.0, -20.0, 20.0}};
  c.horizon = static_cast<int>(demand.size());
  c.loads = {{"D3", 3, 900.0, std::move(demand)}};
  c.dt = 0.25;
  c.lte_limit = lte_limit;
  c.ste_limit = ste_limit;
  validate(c);
  return c;
}

// Four buses in a ring with two equal corridors from cheap generation at
// bus 1 to the load at bus 4; a small expensive unit sits at bus 3.
inline Case ring4(std::vector<double> demand, int lte_limit = 3, int ste_limit = 1) {
  Case c;
  c.buses = {{1}, {2}, {3}, {4}};
  c.lines = {{"L12", 1, 2, 0.1, 50.0, 65.0, 80.0},
             {"L24", 2, 4, 0.1, 50.0, 65.0, 80.0},
             {"L13", 1, 3, 0.1, 50.0, 65.0, 80.0},
             {"L34", 3, 4, 0.1, 50.0, 65.0, 80.0}};
  c.generators = {{"Gbase", 1, 0.0, 300.0, 12.0, -80.0, 80.0}, {"Gpeak", 3, 0.0, 30.0, 90.0, -30.0, 30.0}};
  c.horizon = static_cast<int>(demand.size());
  c.loads = {{"D4", 4, 1000.0, std::move(demand)}};
  c.dt = 0.25;
  c.lte_limit = lte_limit;
  c.ste_limit = ste_limit;
  validate(c);
  return c;
}

// Small random network whose single period is pushed toward its ratings.
inline Case random_small(std::uint64_t seed, int buses, int lines, int horizon = 1) {
  std::mt19937_64 rng(seed * 7919 + 13);
  SynthSpec spec;
  spec.buses = buses;
  spec.lines = lines;
  spec.generators = 2 + static_cast<int>(rng() % 4);
  spec.renewables = static_cast<int>(rng() % 2);
  spec.loads = 1 + static_cast<int>(rng() % 3);
  spec.horizon = std::max(horizon, 1);
  spec.dt = 1.0;
  spec.lte_limit = 4;
  spec.ste_limit = 1;
  spec.seed = seed;
  Case c = synthesize_case(spec);
  const double stress = std::uniform_real_distribution<double>(1.1, 1.8)(rng);
  return scale_loads(c, stress);
}

}  // namespace cmpsced::testing
