#include "cmpsced/qp.hpp"

#include "log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <tuple>

namespace cmpsced {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ConvexProgram::ConvexProgram(Index n)
    : Q(MatrixXd::Zero(n, n)),
      q(VectorXd::Zero(n)),
      A_eq(0, n),
      b_eq(0),
      G(0, n),
      h(0),
      lb(VectorXd::Constant(n, -std::numeric_limits<double>::infinity())),
      ub(VectorXd::Constant(n, std::numeric_limits<double>::infinity())) {}

double ConvexProgram::objective(const VectorXd& x) const {
  return 0.5 * x.dot(Q * x) + q.dot(x) + constant_cost;
}

void ConvexProgram::check() const {
  const Index n = num_vars();
  if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("Q must be n x n");
  if (A_eq.cols() != n || A_eq.rows() != b_eq.size()) {
    throw std::invalid_argument("A_eq/b_eq dimension mismatch");
  }
  if (G.cols() != n || G.rows() != h.size()) throw std::invalid_argument("G/h dimension mismatch");
  if (lb.size() != n || ub.size() != n) throw std::invalid_argument("bound dimension mismatch");
  if (!eq_tags.empty() && static_cast<Index>(eq_tags.size()) != b_eq.size()) {
    throw std::invalid_argument("eq_tags must be empty or one per equality row");
  }
  for (Index i = 0; i < n; ++i) {
    if (!(lb[i] <= ub[i])) throw std::invalid_argument("lb > ub at variable " + std::to_string(i));
  }
  if (n == 0) return;
  const double qnorm = Q.cwiseAbs().maxCoeff();
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, qnorm)) {
    throw std::invalid_argument("Q is not symmetric");
  }
  if (qnorm > 0.0) {
    const MatrixXd shifted = Q + 1e-12 * qnorm * MatrixXd::Identity(n, n);
    Eigen::LDLT<MatrixXd> ldlt(shifted);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        (ldlt.vectorD().array() < -1e-12 * qnorm).any()) {
      throw std::invalid_argument("Q is not positive semidefinite");
    }
  }
}

std::optional<Index> ConvexProgram::find_eq(const std::string& tag) const {
  for (std::size_t i = 0; i < eq_tags.size(); ++i) {
    if (eq_tags[i] == tag) return static_cast<Index>(i);
  }
  return std::nullopt;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

KktResiduals kkt_residuals(const ConvexProgram& p, const SolverSolution& s) {
  KktResiduals r;
  const Index n = p.num_vars();
  const VectorXd& x = s.x;
  if (p.num_eq() > 0) r.primal = (p.A_eq * x - p.b_eq).lpNorm<Eigen::Infinity>();
  VectorXd slack_g = p.h - p.G * x;
  for (Index i = 0; i < slack_g.size(); ++i) {
    r.primal = std::max(r.primal, -slack_g[i]);
    r.complementarity += std::abs(s.ineq_duals[i] * slack_g[i]);
  }
  VectorXd grad = p.Q * x + p.q - p.A_eq.transpose() * s.eq_duals + p.G.transpose() * s.ineq_duals +
                  s.upper_bound_duals - s.lower_bound_duals;
  for (Index i = 0; i < n; ++i) {
    if (std::isfinite(p.lb[i])) {
      r.primal = std::max(r.primal, p.lb[i] - x[i]);
      r.complementarity += std::abs(s.lower_bound_duals[i] * (x[i] - p.lb[i]));
    }
    if (std::isfinite(p.ub[i])) {
      r.primal = std::max(r.primal, x[i] - p.ub[i]);
      r.complementarity += std::abs(s.upper_bound_duals[i] * (p.ub[i] - x[i]));
    }
  }
  r.dual = n > 0 ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  // Negative multipliers count as dual infeasibility.
  auto neg = [](const VectorXd& v) { return v.size() ? std::max(0.0, -v.minCoeff()) : 0.0; };
  r.dual = std::max({r.dual, neg(s.ineq_duals), neg(s.lower_bound_duals), neg(s.upper_bound_duals)});
  return r;
}

namespace {

// Interior point iterate over the internal form: equalities (user rows plus
// fixed variables), inequality rows G, and one-sided finite bounds.
struct Iterate {
  VectorXd x, y;
  VectorXd s_g, z_g;
  VectorXd s_l, z_l;
  VectorXd s_u, z_u;
};

struct Direction {
  VectorXd dx, dy, ds_g, dz_g, ds_l, dz_l, ds_u, dz_u;
};

class InteriorPoint {
 public:
  InteriorPoint(const ConvexProgram& p, const SolverOptions& o) : p_(p), opts_(o) {
    n_ = p.num_vars();
    for (Index i = 0; i < n_; ++i) {
      const bool lo = std::isfinite(p.lb[i]);
      const bool hi = std::isfinite(p.ub[i]);
      if (lo && hi && p.lb[i] == p.ub[i]) {
        fixed_.push_back(i);
        continue;
      }
      if (lo) lower_.push_back(i);
      if (hi) upper_.push_back(i);
    }
    const Index m_user = p.num_eq();
    m_ = m_user + static_cast<Index>(fixed_.size());
    A_ = MatrixXd::Zero(m_, n_);
    b_ = VectorXd::Zero(m_);
    if (m_user > 0) {
      A_.topRows(m_user) = p.A_eq;
      b_.head(m_user) = p.b_eq;
    }
    for (std::size_t k = 0; k < fixed_.size(); ++k) {
      A_(m_user + static_cast<Index>(k), fixed_[k]) = 1.0;
      b_[m_user + static_cast<Index>(k)] = p.lb[fixed_[k]];
    }
    lb_l_.resize(static_cast<Index>(lower_.size()));
    ub_u_.resize(static_cast<Index>(upper_.size()));
    for (std::size_t k = 0; k < lower_.size(); ++k) lb_l_[k] = p.lb[lower_[k]];
    for (std::size_t k = 0; k < upper_.size(); ++k) ub_u_[k] = p.ub[upper_[k]];
    has_quadratic_ = n_ > 0 && p.Q.cwiseAbs().maxCoeff() > 0.0;
    q_scale_ = has_quadratic_ ? std::max(1.0, p.Q.cwiseAbs().maxCoeff()) : 1.0;
    data_scale_ = 1.0;
    auto bump = [&](double v) { if (std::isfinite(v)) data_scale_ = std::max(data_scale_, std::abs(v)); };
    for (Index i = 0; i < p.q.size(); ++i) bump(p.q[i]);
    for (Index i = 0; i < b_.size(); ++i) bump(b_[i]);
    for (Index i = 0; i < p.h.size(); ++i) bump(p.h[i]);
    for (Index i = 0; i < n_; ++i) {
      if (std::isfinite(p.lb[i])) primal_scale_ = std::max(primal_scale_, std::abs(p.lb[i]));
      if (std::isfinite(p.ub[i])) primal_scale_ = std::max(primal_scale_, std::abs(p.ub[i]));
    }
    if (b_.size()) primal_scale_ = std::max(primal_scale_, b_.lpNorm<Eigen::Infinity>());
    if (p.h.size()) primal_scale_ = std::max(primal_scale_, p.h.lpNorm<Eigen::Infinity>());
    dual_scale_ = q_scale_;
    if (p.q.size()) dual_scale_ = std::max(dual_scale_, p.q.lpNorm<Eigen::Infinity>());
  }

  SolverSolution run() {
    SolverSolution sol;
    Iterate it = initial_point();
    it = mehrotra_start(it);
    const Index n_comp = it.s_g.size() + it.s_l.size() + it.s_u.size();
    int stall = 0;
    double prev_primal = std::numeric_limits<double>::infinity();
    int dual_stall = 0;
    double prev_dual = std::numeric_limits<double>::infinity();
    double prev_xnorm = 0.0, prev_znorm = 0.0;

    for (int iter = 0; iter <= opts_.max_iters; ++iter) {
      sol = extract(it);
      sol.iterations = iter;
      sol.kkt = kkt_residuals(p_, sol);
      if (!sol.x.allFinite() || !sol.eq_duals.allFinite()) {
        sol.status = SolveStatus::numerical_failure;
        return finish(sol);
      }
      if (sol.kkt.primal <= opts_.tol && sol.kkt.dual <= opts_.tol &&
          sol.kkt.complementarity <= opts_.tol) {
        // KKT point found; a few extra iterations may still close the
        // primal-dual objective gap.
        sol.status = SolveStatus::optimal;
        finish(sol);
        const double gap = std::abs(sol.objective - sol.dual_objective);
        if (gap <= gap_tol(sol)) return sol;
        if (!best_ || gap < std::abs(best_->objective - best_->dual_objective)) best_ = sol;
        if (++polish_iters_ > 5) return *best_;
      }
      keep_if_scaled_ok(sol);
      if (sol.kkt.primal <= 1e-5 && sol.kkt.dual <= 1e-5 &&
          sol.kkt.complementarity <= std::max(1e-3, 1e-6 * std::abs(p_.objective(sol.x)))) {
        if (auto polished = polish(it)) {
          polished->iterations = iter;
          return *polished;
        }
      }
      if (iter == opts_.max_iters) break;

      const Residuals r = residuals(it);
      const double primal_res = r.primal_norm();
      const double dual_res = r.r_d.size() ? r.r_d.lpNorm<Eigen::Infinity>() : 0.0;

      // Stall bookkeeping for infeasibility / unboundedness: a residual that
      // stops shrinking while the opposite side's iterates grow.
      const double xnorm = max_abs(it.x);
      const double znorm = std::max({max_abs(it.y), max_abs(it.z_g), max_abs(it.z_l), max_abs(it.z_u)});
      stall = (primal_res > 1e-6 && primal_res > 0.9 * prev_primal && znorm > prev_znorm) ? stall + 1 : 0;
      dual_stall = (dual_res > 1e-6 && dual_res > 0.9 * prev_dual && xnorm > prev_xnorm) ? dual_stall + 1 : 0;
      prev_primal = std::min(prev_primal, primal_res);
      prev_dual = std::min(prev_dual, dual_res);
      prev_xnorm = xnorm;
      prev_znorm = znorm;
      if (primal_res > 1e-6 && (stall >= 10 || znorm > 1e12 * data_scale_)) {
        sol.status = SolveStatus::infeasible;
        return finish(sol);
      }
      if (primal_res <= 1e-6 && (xnorm > 1e12 * data_scale_ || dual_stall >= 10)) {
        // A stalled dual residual can also be lost accuracy near the optimum.
        if (auto polished = polish(it)) {
          polished->iterations = iter;
          return *polished;
        }
        sol.status = SolveStatus::unbounded;
        return finish(sol);
      }

      const double mu = n_comp > 0 ? complementarity_sum(it) / static_cast<double>(n_comp) : 0.0;
      // Predictor-corrector pair; regularization grows until both Newton
      // solves are accurate.
      Direction d;
      double ap = 0.0, ad = 0.0;
      bool solved = false;
      double reg = 1e-10 * q_scale_;
      for (int attempt = 0; attempt < 6 && !solved; ++attempt, reg *= 100.0) {
        if (!factor(it, reg)) continue;
        const Direction aff = direction(it, r, it.s_g.cwiseProduct(it.z_g),
                                        it.s_l.cwiseProduct(it.z_l), it.s_u.cwiseProduct(it.z_u));
        if (!finite(aff) || !newton_ok_) continue;
        auto [ap_aff, ad_aff] = step_lengths(it, aff, 1.0);
        if (has_quadratic_) ap_aff = ad_aff = std::min(ap_aff, ad_aff);
        double sigma = 0.0;
        if (n_comp > 0 && mu > 0.0) {
          const double mu_aff =
              ((it.s_g + ap_aff * aff.ds_g).dot(it.z_g + ad_aff * aff.dz_g) +
               (it.s_l + ap_aff * aff.ds_l).dot(it.z_l + ad_aff * aff.dz_l) +
               (it.s_u + ap_aff * aff.ds_u).dot(it.z_u + ad_aff * aff.dz_u)) /
              static_cast<double>(n_comp);
          sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
        }
        // Driving mu far below the tolerance only wrecks the conditioning.
        const double target = n_comp > 0 ? std::max(sigma * mu, 0.05 * opts_.tol / static_cast<double>(n_comp)) : 0.0;
        const VectorXd rc_g = (it.s_g.cwiseProduct(it.z_g) + aff.ds_g.cwiseProduct(aff.dz_g)).array() - target;
        const VectorXd rc_l = (it.s_l.cwiseProduct(it.z_l) + aff.ds_l.cwiseProduct(aff.dz_l)).array() - target;
        const VectorXd rc_u = (it.s_u.cwiseProduct(it.z_u) + aff.ds_u.cwiseProduct(aff.dz_u)).array() - target;
        d = direction(it, r, rc_g, rc_l, rc_u);
        if (!finite(d) || !newton_ok_) continue;
        const double eta = std::max(0.9, 1.0 - 10.0 * mu / data_scale_);
        std::tie(ap, ad) = step_lengths(it, d, std::min(eta, 0.9999));
        if (has_quadratic_) ap = ad = std::min(ap, ad);
        if (std::min(ap, ad) < 0.1 && n_comp > 0) {
          // The second-order term can pin the step against one badly
          // centred pair; a plain centring step recovers.
          const double c = std::max(0.5 * mu, target);
          const Direction cd = direction(it, r, it.s_g.cwiseProduct(it.z_g).array() - c,
                                         it.s_l.cwiseProduct(it.z_l).array() - c,
                                         it.s_u.cwiseProduct(it.z_u).array() - c);
          if (finite(cd) && newton_ok_) {
            auto [cp, cdl] = step_lengths(it, cd, std::min(eta, 0.9999));
            if (has_quadratic_) cp = cdl = std::min(cp, cdl);
            if (std::min(cp, cdl) > std::min(ap, ad)) {
              d = cd;
              ap = cp;
              ad = cdl;
            }
          }
        }
        solved = true;
      }
      if (!solved) {
        // Last resort before giving up: the active set may already be right.
        if (auto polished = polish(it)) {
          polished->iterations = iter;
          return *polished;
        }
        sol.status = SolveStatus::numerical_failure;
        return finish(sol);
      }

      detail::log().trace("ipm {:3d} pr {:.2e} du {:.2e} mu {:.2e} ap {:.2e} ad {:.2e}", iter, primal_res, dual_res, mu, ap, ad);
      it.x += ap * d.dx;
      it.s_g += ap * d.ds_g;
      it.s_l += ap * d.ds_l;
      it.s_u += ap * d.ds_u;
      it.y += ad * d.dy;
      it.z_g += ad * d.dz_g;
      it.z_l += ad * d.dz_l;
      it.z_u += ad * d.dz_u;
    }
    if (auto polished = polish(it)) {
      polished->iterations = opts_.max_iters;
      return *polished;
    }
    sol.status = SolveStatus::iteration_limit;
    return finish(sol);
  }

 private:
  struct Residuals {
    VectorXd r_d, r_eq, r_g, r_l, r_u;
    double primal_norm() const {
      return std::max({max_abs(r_eq), max_abs(r_g), max_abs(r_l), max_abs(r_u)});
    }
  };

  static bool finite(const Direction& d) {
    return d.dx.allFinite() && d.dy.allFinite() && d.dz_g.allFinite() && d.dz_l.allFinite() &&
           d.dz_u.allFinite() && d.ds_g.allFinite() && d.ds_l.allFinite() && d.ds_u.allFinite();
  }

  static double max_abs(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

  static double complementarity_sum(const Iterate& it) {
    return it.s_g.dot(it.z_g) + it.s_l.dot(it.z_l) + it.s_u.dot(it.z_u);
  }

  VectorXd scatter_lower(const VectorXd& v) const {
    VectorXd out = VectorXd::Zero(n_);
    for (std::size_t k = 0; k < lower_.size(); ++k) out[lower_[k]] += v[k];
    return out;
  }
  VectorXd scatter_upper(const VectorXd& v) const {
    VectorXd out = VectorXd::Zero(n_);
    for (std::size_t k = 0; k < upper_.size(); ++k) out[upper_[k]] += v[k];
    return out;
  }
  VectorXd gather(const VectorXd& x, const std::vector<Index>& idx) const {
    VectorXd out(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = x[idx[k]];
    return out;
  }

  // One Newton step from the unit point, then slacks and multipliers are
  // shifted back into the interior.
  Iterate mehrotra_start(const Iterate& naive) {
    const Index n_comp = naive.s_g.size() + naive.s_l.size() + naive.s_u.size();
    if (n_comp == 0) return naive;
    Iterate it = naive;
    it.s_g.setOnes();
    it.s_l.setOnes();
    it.s_u.setOnes();
    if (!factor(it, 1e-8 * q_scale_)) return naive;
    const Residuals r = residuals(it);
    const Direction d = direction(it, r, it.s_g.cwiseProduct(it.z_g), it.s_l.cwiseProduct(it.z_l),
                                  it.s_u.cwiseProduct(it.z_u));
    if (!finite(d) || !newton_ok_) return naive;
    it.x += d.dx;
    it.y += d.dy;
    it.s_g += d.ds_g;
    it.s_l += d.ds_l;
    it.s_u += d.ds_u;
    it.z_g += d.dz_g;
    it.z_l += d.dz_l;
    it.z_u += d.dz_u;
    auto min_of = [](const VectorXd& a, const VectorXd& b, const VectorXd& c) {
      double m = std::numeric_limits<double>::infinity();
      for (const VectorXd* v : {&a, &b, &c}) {
        if (v->size()) m = std::min(m, v->minCoeff());
      }
      return m;
    };
    const double ds = std::max(-1.5 * min_of(it.s_g, it.s_l, it.s_u), 0.0);
    const double dz = std::max(-1.5 * min_of(it.z_g, it.z_l, it.z_u), 0.0);
    for (VectorXd* v : {&it.s_g, &it.s_l, &it.s_u}) v->array() += ds;
    for (VectorXd* v : {&it.z_g, &it.z_l, &it.z_u}) v->array() += dz;
    const double sz = complementarity_sum(it);
    const double sum_s = it.s_g.sum() + it.s_l.sum() + it.s_u.sum();
    const double sum_z = it.z_g.sum() + it.z_l.sum() + it.z_u.sum();
    const double ds2 = sum_z > 0.0 ? 0.5 * sz / sum_z : 0.0;
    const double dz2 = sum_s > 0.0 ? 0.5 * sz / sum_s : 0.0;
    for (VectorXd* v : {&it.s_g, &it.s_l, &it.s_u}) v->array() += std::max(ds2, 1e-8);
    for (VectorXd* v : {&it.z_g, &it.z_l, &it.z_u}) v->array() += std::max(dz2, 1e-8);
    if (!it.x.allFinite()) return naive;
    return it;
  }

  Iterate initial_point() const {
    Iterate it;
    it.x = VectorXd::Zero(n_);
    for (Index i = 0; i < n_; ++i) {
      const double lo = p_.lb[i], hi = p_.ub[i];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        it.x[i] = 0.5 * (lo + hi);
      } else if (std::isfinite(lo)) {
        it.x[i] = std::max(lo + 1.0, 0.0);
      } else if (std::isfinite(hi)) {
        it.x[i] = std::min(hi - 1.0, 0.0);
      }
    }
    it.y = VectorXd::Zero(m_);
    const VectorXd gx = p_.h - p_.G * it.x;
    it.s_g = gx.cwiseMax(1.0);
    it.z_g = VectorXd::Ones(p_.num_ineq());
    it.s_l = (gather(it.x, lower_) - lb_l_).cwiseMax(1.0);
    it.z_l = VectorXd::Ones(it.s_l.size());
    it.s_u = (ub_u_ - gather(it.x, upper_)).cwiseMax(1.0);
    it.z_u = VectorXd::Ones(it.s_u.size());
    return it;
  }

  Residuals residuals(const Iterate& it) const {
    Residuals r;
    r.r_d = p_.Q * it.x + p_.q - A_.transpose() * it.y + p_.G.transpose() * it.z_g -
            scatter_lower(it.z_l) + scatter_upper(it.z_u);
    r.r_eq = A_ * it.x - b_;
    r.r_g = p_.G * it.x + it.s_g - p_.h;
    r.r_l = gather(it.x, lower_) - it.s_l - lb_l_;
    r.r_u = gather(it.x, upper_) + it.s_u - ub_u_;
    return r;
  }

  bool factor(const Iterate& it, double reg) {
    const VectorXd w_g = it.z_g.cwiseQuotient(it.s_g);
    H0_ = p_.Q;
    if (p_.num_ineq() > 0) H0_.noalias() += p_.G.transpose() * w_g.asDiagonal() * p_.G;
    for (std::size_t k = 0; k < lower_.size(); ++k) H0_(lower_[k], lower_[k]) += it.z_l[k] / it.s_l[k];
    for (std::size_t k = 0; k < upper_.size(); ++k) H0_(upper_[k], upper_[k]) += it.z_u[k] / it.s_u[k];

    // Regularized KKT matrix [H + rho I, A'; A, -rho I], factored with
    // partial pivoting. rho acts as a proximal term, so the interior point
    // fixed point is unchanged.
    reg_ = reg;
    MatrixXd K(n_ + m_, n_ + m_);
    K.topLeftCorner(n_, n_) = H0_;
    K.topLeftCorner(n_, n_).diagonal().array() += reg;
    K.topRightCorner(n_, m_) = A_.transpose();
    K.bottomLeftCorner(m_, n_) = A_;
    K.bottomRightCorner(m_, m_) = -reg * MatrixXd::Identity(m_, m_);
    if (!K.allFinite()) return false;
    // Symmetric Ruiz equilibration.
    equil_ = VectorXd::Ones(n_ + m_);
    for (int pass = 0; pass < 5; ++pass) {
      VectorXd d(n_ + m_);
      for (Index j = 0; j < n_ + m_; ++j) {
        const double c = K.col(j).cwiseAbs().maxCoeff();
        d[j] = c > 0.0 ? 1.0 / std::sqrt(c) : 1.0;
      }
      K = d.asDiagonal() * K * d.asDiagonal();
      equil_ = equil_.cwiseProduct(d);
    }
    lu_.compute(K);
    return true;
  }

  // Solves  (H0 + rho I) dx + A' w = r1,  A dx - rho w = r2,  dy = -w,
  // with iterative refinement.
  void newton_solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& dy) const {
    newton_ok_ = false;
    VectorXd rhs(n_ + m_);
    rhs << r1, r2;
    auto apply_inverse = [&](const VectorXd& r) -> VectorXd {
      return equil_.cwiseProduct(lu_.solve(equil_.cwiseProduct(r)));
    };
    VectorXd sol = apply_inverse(rhs);
    auto residual = [&](const VectorXd& v) {
      VectorXd e(n_ + m_);
      e.head(n_) = r1 - H0_ * v.head(n_) - reg_ * v.head(n_) - A_.transpose() * v.tail(m_);
      e.tail(m_) = r2 - A_ * v.head(n_) + reg_ * v.tail(m_);
      return e;
    };
    const double rhs_norm = std::max(1.0, max_abs(rhs));
    for (int k = 0; k < 3; ++k) {
      const VectorXd e = residual(sol);
      if (max_abs(e) <= 1e-15 * rhs_norm) break;
      sol += apply_inverse(e);
    }
    const double scale = std::max({rhs_norm, max_abs(H0_.diagonal()), max_abs(sol)});
    newton_ok_ = sol.allFinite() && max_abs(residual(sol)) <= 1e-6 * scale;
    dx = sol.head(n_);
    dy = -sol.tail(m_);
  }

  // Newton direction, refined against the unreduced system. Folding the
  // inequality rows into H with weights z/s loses digits as those weights
  // spread apart; the reduced factorization still works as a preconditioner.
  Direction direction(const Iterate& it, const Residuals& r, const VectorXd& rc_g,
                      const VectorXd& rc_l, const VectorXd& rc_u) const {
    Direction d = reduced_direction(it, r, rc_g, rc_l, rc_u);
    if (!newton_ok_) return d;
    const double rhs_norm = std::max({1.0, max_abs(r.r_d), max_abs(r.r_eq)});
    Residuals rr;
    rr.r_g = VectorXd::Zero(r.r_g.size());
    rr.r_l = VectorXd::Zero(r.r_l.size());
    rr.r_u = VectorXd::Zero(r.r_u.size());
    const VectorXd zg = VectorXd::Zero(rc_g.size()), zl = VectorXd::Zero(rc_l.size()),
                   zu = VectorXd::Zero(rc_u.size());
    for (int k = 0; k < 3; ++k) {
      // rr holds minus the stationarity and equality residuals of d.
      rr.r_d = r.r_d + p_.Q * d.dx - A_.transpose() * d.dy + p_.G.transpose() * d.dz_g -
               scatter_lower(d.dz_l) + scatter_upper(d.dz_u);
      rr.r_eq = r.r_eq + A_ * d.dx;
      if (std::max(max_abs(rr.r_d), max_abs(rr.r_eq)) <= 1e-14 * rhs_norm) break;
      const Direction c = reduced_direction(it, rr, zg, zl, zu);
      if (!finite(c)) break;
      d.dx += c.dx;
      d.dy += c.dy;
      d.ds_g += c.ds_g;
      d.dz_g += c.dz_g;
      d.ds_l += c.ds_l;
      d.dz_l += c.dz_l;
      d.ds_u += c.ds_u;
      d.dz_u += c.dz_u;
    }
    newton_ok_ = finite(d);
    return d;
  }

  Direction reduced_direction(const Iterate& it, const Residuals& r, const VectorXd& rc_g,
                              const VectorXd& rc_l, const VectorXd& rc_u) const {
    Direction d;
    const VectorXd t_g = (-rc_g + it.z_g.cwiseProduct(r.r_g)).cwiseQuotient(it.s_g);
    const VectorXd t_l = (-rc_l - it.z_l.cwiseProduct(r.r_l)).cwiseQuotient(it.s_l);
    const VectorXd t_u = (-rc_u + it.z_u.cwiseProduct(r.r_u)).cwiseQuotient(it.s_u);
    VectorXd rhs = -r.r_d + scatter_lower(t_l) - scatter_upper(t_u);
    if (p_.num_ineq() > 0) rhs -= p_.G.transpose() * t_g;
    newton_solve(rhs, -r.r_eq, d.dx, d.dy);

    d.ds_g = -r.r_g - p_.G * d.dx;
    d.dz_g = (-rc_g - it.z_g.cwiseProduct(d.ds_g)).cwiseQuotient(it.s_g);
    d.ds_l = gather(d.dx, lower_) + r.r_l;
    d.dz_l = (-rc_l - it.z_l.cwiseProduct(d.ds_l)).cwiseQuotient(it.s_l);
    d.ds_u = -r.r_u - gather(d.dx, upper_);
    d.dz_u = (-rc_u - it.z_u.cwiseProduct(d.ds_u)).cwiseQuotient(it.s_u);
    return d;
  }

  static double max_step(const VectorXd& v, const VectorXd& dv) {
    double a = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
  }

  std::pair<double, double> step_lengths(const Iterate& it, const Direction& d, double eta) const {
    const double ap = std::min({max_step(it.s_g, d.ds_g), max_step(it.s_l, d.ds_l), max_step(it.s_u, d.ds_u)});
    const double ad = std::min({max_step(it.z_g, d.dz_g), max_step(it.z_l, d.dz_l), max_step(it.z_u, d.dz_u)});
    return {std::min(1.0, eta * ap), std::min(1.0, eta * ad)};
  }

  SolverSolution extract(const Iterate& it) const {
    SolverSolution s;
    s.x = it.x;
    const Index m_user = p_.num_eq();
    s.eq_duals = it.y.head(m_user);
    s.ineq_duals = it.z_g;
    s.lower_bound_duals = scatter_lower(it.z_l);
    s.upper_bound_duals = scatter_upper(it.z_u);
    for (std::size_t k = 0; k < fixed_.size(); ++k) {
      const double y = it.y[m_user + static_cast<Index>(k)];
      // -y e_i = z_ub - z_lb
      if (y > 0.0) {
        s.lower_bound_duals[fixed_[k]] += y;
      } else {
        s.upper_bound_duals[fixed_[k]] -= y;
      }
    }
    return s;
  }

  enum class RowKind { eq, ineq, lower, upper, fixed };
  using ActiveRow = std::pair<RowKind, Index>;

  // Guesses the active set from the iterate and solves the equality
  // constrained KKT system on it. Returns a solution only if it meets the
  // tolerance and closes the objective gap.
  std::optional<SolverSolution> polish(const Iterate& it) {
    std::vector<ActiveRow> rows;
    const Index m_user = p_.num_eq();
    for (Index i = 0; i < m_user; ++i) rows.emplace_back(RowKind::eq, i);
    for (Index i = 0; i < p_.num_ineq(); ++i) {
      if (it.z_g[i] > it.s_g[i]) rows.emplace_back(RowKind::ineq, i);
    }
    for (std::size_t k = 0; k < lower_.size(); ++k) {
      if (it.z_l[k] > it.s_l[k]) rows.emplace_back(RowKind::lower, lower_[k]);
    }
    for (std::size_t k = 0; k < upper_.size(); ++k) {
      if (it.z_u[k] > it.s_u[k]) rows.emplace_back(RowKind::upper, upper_[k]);
    }
    for (Index i : fixed_) rows.emplace_back(RowKind::fixed, i);

    const SolverSolution guess = extract(it);
    VectorXd x0 = it.x;
    double last = std::numeric_limits<double>::infinity();
    // On a degenerate vertex the z > s split can miss a binding row or keep
    // one with the wrong multiplier sign; a few add/drop rounds repair that.
    for (int round = 0; round < 6; ++round) {
      std::optional<SolverSolution> s = solve_active(rows, x0, guess);
      if (!s) return std::nullopt;
      detail::log().trace("polish: {} active rows, kkt {:.2e} {:.2e} {:.2e}, gap {:.2e}", rows.size(), s->kkt.primal,
                          s->kkt.dual, s->kkt.complementarity, std::abs(s->objective - s->dual_objective));
      if (s->kkt.primal <= opts_.tol && s->kkt.dual <= opts_.tol && s->kkt.complementarity <= opts_.tol &&
          std::abs(s->objective - s->dual_objective) <= gap_tol(*s)) {
        return s;
      }
      keep_if_scaled_ok(*s);
      const double worst = std::max({s->kkt.primal, s->kkt.dual, s->kkt.complementarity});
      if (!(worst < last)) return std::nullopt;  // repairs are not helping
      last = worst;
      const std::vector<ActiveRow> next = repair_active_set(rows, *s);
      if (next == rows) return std::nullopt;
      rows = next;
      x0 = s->x;
    }
    return std::nullopt;
  }

  std::vector<ActiveRow> repair_active_set(const std::vector<ActiveRow>& rows, const SolverSolution& s) const {
    std::vector<ActiveRow> out;
    std::vector<char> in_g(p_.num_ineq(), 0), in_l(n_, 0), in_u(n_, 0);
    const double tol = opts_.tol;
    for (const auto& row : rows) {
      const auto [kind, i] = row;
      switch (kind) {
        case RowKind::ineq:
          if (s.ineq_duals[i] < -tol) continue;
          in_g[i] = 1;
          break;
        case RowKind::lower:
          if (s.lower_bound_duals[i] < -tol) continue;
          in_l[i] = 1;
          break;
        case RowKind::upper:
          if (s.upper_bound_duals[i] < -tol) continue;
          in_u[i] = 1;
          break;
        default: break;
      }
      out.push_back(row);
    }
    if (p_.num_ineq() > 0) {
      const VectorXd slack = p_.h - p_.G * s.x;
      for (Index i = 0; i < p_.num_ineq(); ++i) {
        if (!in_g[i] && slack[i] < -tol) out.emplace_back(RowKind::ineq, i);
      }
    }
    for (Index i = 0; i < n_; ++i) {
      if (!in_l[i] && std::isfinite(p_.lb[i]) && p_.lb[i] != p_.ub[i] && s.x[i] < p_.lb[i] - tol) {
        out.emplace_back(RowKind::lower, i);
      }
      if (!in_u[i] && std::isfinite(p_.ub[i]) && p_.lb[i] != p_.ub[i] && s.x[i] > p_.ub[i] + tol) {
        out.emplace_back(RowKind::upper, i);
      }
    }
    return out;
  }

  // Solves the equality-constrained QP on `rows` and reads off multipliers.
  std::optional<SolverSolution> solve_active(const std::vector<ActiveRow>& rows, const VectorXd& x0,
                                             const SolverSolution& guess) {
    const Index m_user = p_.num_eq();
    const Index m = static_cast<Index>(rows.size());
    MatrixXd C = MatrixXd::Zero(m, n_);
    VectorXd d(m);
    for (Index r = 0; r < m; ++r) {
      const auto [kind, i] = rows[r];
      switch (kind) {
        case RowKind::eq: C.row(r) = p_.A_eq.row(i); d[r] = p_.b_eq[i]; break;
        case RowKind::ineq: C.row(r) = p_.G.row(i); d[r] = p_.h[i]; break;
        case RowKind::lower: case RowKind::fixed: C(r, i) = 1.0; d[r] = p_.lb[i]; break;
        case RowKind::upper: C(r, i) = 1.0; d[r] = p_.ub[i]; break;
      }
    }
    // [Q C'; C 0] [x; w] = [-q; d], solved through a slightly regularized
    // factorization plus refinement on the exact system.
    MatrixXd K = MatrixXd::Zero(n_ + m, n_ + m);
    K.topLeftCorner(n_, n_) = p_.Q;
    K.topRightCorner(n_, m) = C.transpose();
    K.bottomLeftCorner(m, n_) = C;
    VectorXd rhs(n_ + m);
    rhs << -p_.q, d;
    const double delta = 1e-11 * std::max(1.0, K.cwiseAbs().maxCoeff());
    MatrixXd Kreg = K;
    Kreg.topLeftCorner(n_, n_).diagonal().array() += delta;
    Kreg.bottomRightCorner(m, m).diagonal().array() -= delta;
    const Eigen::PartialPivLU<MatrixXd> lu(Kreg);
    // Starting from the interior point duals picks, among degenerate
    // multiplier sets, the one nearest to them.
    VectorXd v = VectorXd::Zero(n_ + m);
    v.head(n_) = x0;
    for (Index r = 0; r < m; ++r) {
      const auto [kind, i] = rows[r];
      switch (kind) {
        case RowKind::eq: v[n_ + r] = -guess.eq_duals[i]; break;
        case RowKind::ineq: v[n_ + r] = guess.ineq_duals[i]; break;
        case RowKind::lower: v[n_ + r] = -guess.lower_bound_duals[i]; break;
        case RowKind::upper: v[n_ + r] = guess.upper_bound_duals[i]; break;
        case RowKind::fixed: v[n_ + r] = guess.upper_bound_duals[i] - guess.lower_bound_duals[i]; break;
      }
    }
    for (int k = 0; k < 20; ++k) {
      const VectorXd e = rhs - K * v;
      if (!e.allFinite()) return std::nullopt;
      if (max_abs(e) <= 1e-14 * std::max(1.0, max_abs(rhs))) break;
      v += lu.solve(e);
    }
    if (!v.allFinite()) return std::nullopt;

    SolverSolution s;
    s.x = v.head(n_);
    s.eq_duals = VectorXd::Zero(m_user);
    s.ineq_duals = VectorXd::Zero(p_.num_ineq());
    s.lower_bound_duals = VectorXd::Zero(n_);
    s.upper_bound_duals = VectorXd::Zero(n_);
    for (Index r = 0; r < m; ++r) {
      const auto [kind, i] = rows[r];
      const double w = v[n_ + r];
      switch (kind) {
        case RowKind::eq: s.eq_duals[i] = -w; break;
        case RowKind::ineq: s.ineq_duals[i] = w; break;
        case RowKind::lower: s.lower_bound_duals[i] = -w; break;
        case RowKind::upper: s.upper_bound_duals[i] = w; break;
        case RowKind::fixed:
          s.upper_bound_duals[i] = std::max(w, 0.0);
          s.lower_bound_duals[i] = std::max(-w, 0.0);
          break;
      }
    }
    s.kkt = kkt_residuals(p_, s);
    s.status = SolveStatus::optimal;
    finish(s);
    return s;
  }

  // Absolute, except where it drops below what the objective can resolve
  // (dispatch subproblems reach 1e4..1e5).
  double gap_tol(const SolverSolution& s) const { return std::max(opts_.tol, 1e-11 * std::abs(s.objective)); }

  // With multipliers near 1e6 the absolute residuals cannot reach tol in
  // double precision. A point that meets tol relative to the data scale is
  // kept and returned instead of a failure status.
  void keep_if_scaled_ok(const SolverSolution& s) {
    const double obj = std::max(1.0, std::abs(p_.objective(s.x)));
    const double pr = s.kkt.primal / primal_scale_;
    const double du = s.kkt.dual / dual_scale_;
    const double co = s.kkt.complementarity / obj;
    if (pr > opts_.tol || du > opts_.tol || co > opts_.tol) return;
    const double score = std::max({pr, du, co});
    if (fallback_ && score >= fallback_score_) return;
    fallback_ = s;
    fallback_->status = SolveStatus::optimal;
    finish(*fallback_);
    fallback_score_ = score;
  }

  SolverSolution& finish(SolverSolution& s) {
    if (s.status != SolveStatus::optimal && best_) {
      s = *best_;
      return s;
    }
    if (s.status != SolveStatus::optimal && fallback_ && s.status != SolveStatus::infeasible) {
      const int iters = s.iterations;
      s = *fallback_;
      s.iterations = iters;
      return s;
    }
    s.objective = p_.objective(s.x);
    double dual_obj = -0.5 * s.x.dot(p_.Q * s.x) + p_.constant_cost + p_.b_eq.dot(s.eq_duals) -
                      p_.h.dot(s.ineq_duals);
    for (Index i = 0; i < n_; ++i) {
      if (std::isfinite(p_.lb[i])) dual_obj += p_.lb[i] * s.lower_bound_duals[i];
      if (std::isfinite(p_.ub[i])) dual_obj -= p_.ub[i] * s.upper_bound_duals[i];
    }
    s.dual_objective = dual_obj;
    return s;
  }

  const ConvexProgram& p_;
  SolverOptions opts_;
  Index n_ = 0, m_ = 0;
  std::vector<Index> fixed_, lower_, upper_;
  MatrixXd A_;
  VectorXd b_, lb_l_, ub_u_;
  bool has_quadratic_ = false;
  double data_scale_ = 1.0;
  double q_scale_ = 1.0;
  double primal_scale_ = 1.0;
  double dual_scale_ = 1.0;

  MatrixXd H0_;
  Eigen::PartialPivLU<MatrixXd> lu_;
  VectorXd equil_;
  mutable bool newton_ok_ = false;
  double reg_ = 0.0;
  std::optional<SolverSolution> best_;
  int polish_iters_ = 0;
  std::optional<SolverSolution> fallback_;
  double fallback_score_ = 0.0;
};

}  // namespace

SolverSolution solve(const ConvexProgram& prog, const SolverOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solve: tol must be > 0");
  prog.check();
  return InteriorPoint(prog, opts).run();
}

Index ProgramBuilder::add_variable(double lb, double ub, double linear_cost) {
  lb_.push_back(lb);
  ub_.push_back(ub);
  cost_.push_back(linear_cost);
  return static_cast<Index>(lb_.size()) - 1;
}

void ProgramBuilder::add_equality(std::vector<Term> terms, double rhs, std::string tag) {
  eqs_.push_back({std::move(terms), rhs, std::move(tag)});
}

void ProgramBuilder::add_inequality(std::vector<Term> terms, double rhs) {
  ineqs_.push_back({std::move(terms), rhs, {}});
}

void ProgramBuilder::add_quadratic(Index i, Index j, double value) {
  quad_.push_back({{i, j}, value});
}

void ProgramBuilder::tighten_bounds(Index var, double lb, double ub) {
  lb_[var] = std::max(lb_[var], lb);
  ub_[var] = std::min(ub_[var], ub);
}

ConvexProgram ProgramBuilder::build() const {
  const Index n = num_vars();
  ConvexProgram p(n);
  for (Index i = 0; i < n; ++i) {
    p.q[i] = cost_[i];
    p.lb[i] = lb_[i];
    p.ub[i] = ub_[i];
  }
  p.constant_cost = constant_;
  for (const auto& [ij, v] : quad_) {
    p.Q(ij.first, ij.second) += v;
    if (ij.first != ij.second) p.Q(ij.second, ij.first) += v;
  }
  p.A_eq = MatrixXd::Zero(static_cast<Index>(eqs_.size()), n);
  p.b_eq.resize(static_cast<Index>(eqs_.size()));
  for (std::size_t r = 0; r < eqs_.size(); ++r) {
    for (const auto& t : eqs_[r].terms) p.A_eq(static_cast<Index>(r), t.var) += t.coef;
    p.b_eq[static_cast<Index>(r)] = eqs_[r].rhs;
    p.eq_tags.push_back(eqs_[r].tag);
  }
  p.G = MatrixXd::Zero(static_cast<Index>(ineqs_.size()), n);
  p.h.resize(static_cast<Index>(ineqs_.size()));
  for (std::size_t r = 0; r < ineqs_.size(); ++r) {
    for (const auto& t : ineqs_[r].terms) p.G(static_cast<Index>(r), t.var) += t.coef;
    p.h[static_cast<Index>(r)] = ineqs_[r].rhs;
  }
  return p;
}

}  // namespace cmpsced
