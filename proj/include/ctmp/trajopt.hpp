#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ctmp/errors.hpp"
#include "ctmp/kinematics.hpp"
#include "ctmp/spline.hpp"

namespace ctmp {

struct TrajOptParams {
  int num_ctrl = 8;           // clamped cubic control points (>= 4)
  int n_check = 50;           // constraint sample count
  double w1 = 1.0;            // duration weight
  double w2 = 0.1;            // path-length weight
  double t_min = 0.05;        // s
  double t_max = 3.0;         // s
  double collision_margin = 0.01;  // m, penalty activation clearance
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  int penalty_rounds = 6;
  int max_inner_iters = 200;
  double step_tol = 1e-10;    // relative step-length stop
  int quad_nodes = 32;        // Gauss-Legendre nodes for the path integral

  void validate() const {
    if (num_ctrl < 4) throw ConfigError("trajopt: num_ctrl must be >= 4");
    if (!(t_min > 0.0 && t_min <= t_max)) throw ConfigError("trajopt: need 0 < t_min <= t_max");
    if (w1 < 0.0 || w2 < 0.0) throw ConfigError("trajopt: weights must be non-negative");
    if (n_check < 2) throw ConfigError("trajopt: n_check must be >= 2");
  }
};

struct TrajOptProblem {
  Eigen::VectorXd x0, xf;      // boundary joint positions
  Eigen::VectorXd xdot0, xdotf;  // boundary joint velocities
  const ManipulatorModel* model = nullptr;
  std::vector<Obstacle> obstacles;
  TrajOptParams params;

  static TrajOptProblem between(const ManipulatorModel& model, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& xf, const std::vector<Obstacle>& obstacles,
                                const TrajOptParams& params) {
    TrajOptProblem p;
    p.x0 = x0;
    p.xf = xf;
    p.xdot0 = Eigen::VectorXd::Zero(x0.size());
    p.xdotf = Eigen::VectorXd::Zero(x0.size());
    p.model = &model;
    p.obstacles = obstacles;
    p.params = params;
    return p;
  }
};

enum class TrajStatus { Valid, DynamicViolation, Collision, Diverged };

inline const char* to_string(TrajStatus s) {
  switch (s) {
    case TrajStatus::Valid: return "Valid";
    case TrajStatus::DynamicViolation: return "DynamicViolation";
    case TrajStatus::Collision: return "Collision";
    case TrajStatus::Diverged: return "Diverged";
  }
  return "?";
}

struct TrajOptResult {
  BSplineTrajectory trajectory;  // final iterate
  TrajStatus status = TrajStatus::Diverged;
  std::optional<BSplineTrajectory> best_feasible;  // last cached iterate that validates Valid
  double cost = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> round_objectives;  // penalized objective per accepted iterate

  // the trajectory a caller should execute, if any
  const BSplineTrajectory* usable() const {
    if (status == TrajStatus::Valid) return &trajectory;
    if (best_feasible) return &*best_feasible;
    return nullptr;
  }
};

// Dynamic-limit and collision check at n_check uniformly spaced times.
// Dynamics are checked first; a dynamically valid but colliding trajectory
// reports Collision.
inline TrajStatus validate(const BSplineTrajectory& traj, const TrajOptProblem& prob) {
  const auto& vmax = prob.model->velocity_limits();
  const BSplineTrajectory dtraj = derivative(traj);
  const int nc = prob.params.n_check;
  for (int i = 0; i < nc; ++i) {
    const double t = traj.t0 + (traj.tf - traj.t0) * i / (nc - 1);
    const Eigen::VectorXd qd = evaluate(dtraj, t);
    for (int j = 0; j < qd.size(); ++j) {
      if (std::abs(qd[j]) > vmax[j] * (1.0 + 1e-9) + 1e-12) return TrajStatus::DynamicViolation;
    }
  }
  for (int i = 0; i < nc; ++i) {
    const double t = traj.t0 + (traj.tf - traj.t0) * i / (nc - 1);
    if (clearance(*prob.model, evaluate(traj, t), prob.obstacles) < 0.0) {
      return TrajStatus::Collision;
    }
  }
  return TrajStatus::Valid;
}

namespace detail {

// Gauss-Legendre nodes/weights on [0,1] via Newton iteration on P_n.
inline void gauss_legendre_unit(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int k = 0; k < n; ++k) {
    double t = std::cos(M_PI * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[k] = 0.5 * (1.0 - t);  // map [-1,1] -> [0,1], ascending
    w[k] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

// Everything about the unit-time spline that does not depend on the decision
// variables: basis values at quadrature and constraint samples. The real-time
// spline is q(t) = qhat(t/tf), so tf appears analytically everywhere.
struct UnitBasis {
  int m = 0;       // control points
  int p = 3;       // degree
  int segs = 0;    // m - p
  std::vector<double> knots;        // unit clamped
  std::vector<double> deriv_knots;
  std::vector<double> span_len;     // d_j = U[j+p+1]-U[j+1], j = 0..m-2
  std::vector<double> gl_u, gl_w;
  std::vector<Eigen::VectorXd> gl_deriv_basis;  // per node: m-1 derivative-basis values
  std::vector<double> ck_u;
  std::vector<Eigen::VectorXd> ck_deriv_basis;
  std::vector<Eigen::VectorXd> ck_pos_basis;    // per node: m position-basis values

  UnitBasis(int num_ctrl, int n_check, int quad_nodes) {
    m = num_ctrl;
    segs = m - p;
    knots = clamped_uniform_knots(m, p, 0.0, 1.0);
    deriv_knots.assign(knots.begin() + 1, knots.end() - 1);
    span_len.resize(m - 1);
    for (int j = 0; j < m - 1; ++j) span_len[j] = knots[j + p + 1] - knots[j + 1];
    gauss_legendre_unit(quad_nodes, gl_u, gl_w);
    gl_deriv_basis.reserve(gl_u.size());
    for (double u : gl_u) gl_deriv_basis.push_back(deriv_basis_at(u));
    ck_u.resize(n_check);
    for (int i = 0; i < n_check; ++i) ck_u[i] = static_cast<double>(i) / (n_check - 1);
    for (double u : ck_u) {
      ck_deriv_basis.push_back(deriv_basis_at(u));
      ck_pos_basis.push_back(pos_basis_at(u));
    }
  }

  Eigen::VectorXd deriv_basis_at(double u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m - 1);
    const int span = find_span(u, p - 1, m - 1, deriv_knots);
    double N[16];
    basis_funs(span, u, p - 1, deriv_knots, N);
    for (int j = 0; j <= p - 1; ++j) out[span - (p - 1) + j] = N[j];
    return out;
  }

  Eigen::VectorXd pos_basis_at(double u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    const int span = find_span(u, p, m, knots);
    double N[16];
    basis_funs(span, u, p, knots, N);
    for (int j = 0; j <= p; ++j) out[span - p + j] = N[j];
    return out;
  }

  // d(qhat')(u) / d(P_k), a scalar multiplying the identity
  double deriv_sensitivity(const Eigen::VectorXd& deriv_basis, int k) const {
    double b = 0.0;
    if (k >= 1) b += p * deriv_basis[k - 1] / span_len[k - 1];
    if (k <= m - 2) b -= p * deriv_basis[k] / span_len[k];
    return b;
  }
};

}  // namespace detail

// Penalty formulation of the minimum-time smooth trajectory problem. Decision
// variables are the interior control points and the duration; the first/last
// control points are pinned by the boundary positions and the second/
// penultimate by the boundary velocities.
class TrajOpt {
 public:
  explicit TrajOpt(const TrajOptProblem& prob)
      : prob_(prob),
        basis_(prob.params.num_ctrl, prob.params.n_check, prob.params.quad_nodes),
        dof_(static_cast<int>(prob.x0.size())) {
    prob_.params.validate();
    if (prob_.x0.size() != prob_.xf.size() || prob_.x0.size() != prob_.xdot0.size() ||
        prob_.x0.size() != prob_.xdotf.size()) {
      throw ConfigError("trajopt: boundary state dimension mismatch");
    }
    if (prob_.model == nullptr || prob_.model->dof() != dof_) {
      throw ConfigError("trajopt: model/state dimension mismatch");
    }
  }

  int num_free() const { return prob_.params.num_ctrl - 4; }
  int dim() const { return num_free() * dof_ + 1; }

  // z layout: [interior control points (row-major by point), tf]
  Eigen::VectorXd pack(const std::vector<Eigen::VectorXd>& interior, double tf) const {
    Eigen::VectorXd z(dim());
    for (int k = 0; k < num_free(); ++k) z.segment(k * dof_, dof_) = interior[k];
    z[dim() - 1] = tf;
    return z;
  }

  std::vector<Eigen::VectorXd> control_points(const Eigen::VectorXd& z) const {
    const int m = prob_.params.num_ctrl;
    const double tf = z[dim() - 1];
    const double pin = tf / (3.0 * basis_.segs);
    std::vector<Eigen::VectorXd> P(m);
    P[0] = prob_.x0;
    P[1] = prob_.x0 + prob_.xdot0 * pin;
    for (int k = 0; k < num_free(); ++k) P[2 + k] = z.segment(k * dof_, dof_);
    P[m - 2] = prob_.xf - prob_.xdotf * pin;
    P[m - 1] = prob_.xf;
    return P;
  }

  BSplineTrajectory build_trajectory(const Eigen::VectorXd& z) const {
    const double tf = z[dim() - 1];
    BSplineTrajectory traj;
    traj.degree = 3;
    traj.t0 = 0.0;
    traj.tf = tf;
    traj.knots = clamped_uniform_knots(prob_.params.num_ctrl, 3, 0.0, tf);
    traj.control_points = control_points(z);
    return traj;
  }

  double penalized_objective(const Eigen::VectorXd& z, double mu) const {
    return eval(z, mu, nullptr);
  }

  Eigen::VectorXd penalized_gradient(const Eigen::VectorXd& z, double mu) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
    eval(z, mu, &g);
    return g;
  }

  using Sampler = std::function<Eigen::VectorXd(double)>;  // unit-parameter curve

  TrajOptResult optimize(const std::optional<BSplineTrajectory>& init = std::nullopt) const {
    if (init && !init->empty()) {
      const BSplineTrajectory traj = *init;  // copy; the sampler outlives the argument
      const double cost = trajectory_cost(traj, prob_.params.w1, prob_.params.w2);
      return optimize_from(
          [traj](double u) { return evaluate(traj, traj.t0 + u * traj.duration()); },
          traj.duration(), cost);
    }
    return optimize_from(nullptr, 0.0, std::numeric_limits<double>::infinity());
  }

  // Core entry: optional warm-start curve given as a unit-domain sampler with
  // its duration and cost estimate.
  TrajOptResult optimize_from(const Sampler& init_sampler, double init_duration,
                              double init_cost) const {
    check_boundary();
    const bool rest_to_rest = prob_.xdot0.isZero(0.0) && prob_.xdotf.isZero(0.0);

    // Free-space problems have a closed-form optimum: control points on the
    // straight segment, duration set by the peak sampled velocity. Use it
    // when it validates; a numeric pass only runs when it could do better.
    std::optional<TrajOptResult> straight;
    if (rest_to_rest) {
      TrajOptResult cand = straight_candidate();
      if (cand.status == TrajStatus::Valid) {
        if (!init_sampler || cand.cost <= init_cost) return cand;
        straight = std::move(cand);
      }
    }

    TrajOptResult numeric = solve_numeric(init_sampler, init_duration);
    if (straight && (numeric.status != TrajStatus::Valid || straight->cost <= numeric.cost)) {
      return *straight;
    }
    return numeric;
  }

  const TrajOptProblem& problem() const { return prob_; }

 private:
  void check_boundary() const {
    const double lim_tol = 1e-9;
    if (!prob_.model->within_limits(prob_.x0, lim_tol) ||
        !prob_.model->within_limits(prob_.xf, lim_tol)) {
      throw InfeasibleBoundary("trajopt: boundary configuration outside joint limits");
    }
    const auto vmax = prob_.model->velocity_limits();
    for (int j = 0; j < dof_; ++j) {
      if (std::abs(prob_.xdot0[j]) > vmax[j] + 1e-9 || std::abs(prob_.xdotf[j]) > vmax[j] + 1e-9) {
        throw InfeasibleBoundary("trajopt: boundary velocity outside limits");
      }
    }
    if (clearance(*prob_.model, prob_.x0, prob_.obstacles) < 0.0 ||
        clearance(*prob_.model, prob_.xf, prob_.obstacles) < 0.0) {
      throw InfeasibleBoundary("trajopt: boundary configuration in collision");
    }
  }

  std::vector<Eigen::VectorXd> straight_interior() const {
    std::vector<Eigen::VectorXd> interior(num_free());
    const int m = prob_.params.num_ctrl;
    for (int k = 0; k < num_free(); ++k) {
      const double f = static_cast<double>(k + 1) / (m - 3);
      interior[k] = prob_.x0 + f * (prob_.xf - prob_.x0);
    }
    return interior;
  }

  // Peak per-unit-time velocity ratio over the constraint samples; tf must be
  // at least this for the sampled velocity constraints to hold.
  double min_feasible_tf(const std::vector<Eigen::VectorXd>& P) const {
    const auto vmax = prob_.model->velocity_limits();
    double ratio = 0.0;
    for (const auto& basis : basis_.ck_deriv_basis) {
      const Eigen::VectorXd v = unit_velocity(P, basis);
      for (int j = 0; j < dof_; ++j) ratio = std::max(ratio, std::abs(v[j]) / vmax[j]);
    }
    return ratio;
  }

  TrajOptResult straight_candidate() const {
    auto interior = straight_interior();
    Eigen::VectorXd z = pack(interior, prob_.params.t_min);
    auto P = control_points(z);
    const double tf =
        std::clamp(min_feasible_tf(P) * (1.0 + 1e-12), prob_.params.t_min, prob_.params.t_max);
    z[dim() - 1] = tf;
    TrajOptResult res;
    res.trajectory = build_trajectory(z);
    res.status = validate(res.trajectory, prob_);
    res.cost = trajectory_cost(res.trajectory, prob_.params.w1, prob_.params.w2);
    if (res.status == TrajStatus::Valid) res.best_feasible = res.trajectory;
    res.round_objectives.push_back({res.cost});
    return res;
  }

  Eigen::VectorXd unit_velocity(const std::vector<Eigen::VectorXd>& P,
                                const Eigen::VectorXd& deriv_basis) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dof_);
    for (int j = 0; j < basis_.m - 1; ++j) {
      if (deriv_basis[j] != 0.0) {
        v += deriv_basis[j] * (3.0 / basis_.span_len[j]) * (P[j + 1] - P[j]);
      }
    }
    return v;
  }

  Eigen::VectorXd unit_position(const std::vector<Eigen::VectorXd>& P,
                                const Eigen::VectorXd& pos_basis) const {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(dof_);
    for (int k = 0; k < basis_.m; ++k) {
      if (pos_basis[k] != 0.0) q += pos_basis[k] * P[k];
    }
    return q;
  }

  // Penalized objective; optionally its analytic gradient. tf enters through
  // the 1/tf velocity scaling and through the velocity-pinned control points.
  double eval(const Eigen::VectorXd& z, double mu, Eigen::VectorXd* grad) const {
    const auto& prm = prob_.params;
    const double tf = z[dim() - 1];
    const auto P = control_points(z);
    const auto vmax = prob_.model->velocity_limits();
    const int m = basis_.m;
    const double pen_w = mu * (prm.w1 + prm.w2);
    constexpr double kNormEps2 = 1e-24;

    // dP1/dtf and dP_{m-2}/dtf from the velocity pins
    const Eigen::VectorXd dP1 = prob_.xdot0 / (3.0 * basis_.segs);
    const Eigen::VectorXd dPm2 = -prob_.xdotf / (3.0 * basis_.segs);

    double F = prm.w1 * tf;
    if (grad) {
      grad->setZero();
      (*grad)[dim() - 1] = prm.w1;
    }

    // path length (time-scale invariant)
    for (size_t a = 0; a < basis_.gl_u.size(); ++a) {
      const auto& db = basis_.gl_deriv_basis[a];
      const Eigen::VectorXd v = unit_velocity(P, db);
      const double norm = std::sqrt(v.squaredNorm() + kNormEps2);
      F += prm.w2 * basis_.gl_w[a] * norm;
      if (grad) {
        const Eigen::VectorXd dir = v / norm;
        for (int k = 0; k < num_free(); ++k) {
          const double b = basis_.deriv_sensitivity(db, 2 + k);
          if (b != 0.0) grad->segment(k * dof_, dof_) += prm.w2 * basis_.gl_w[a] * b * dir;
        }
        const double b1 = basis_.deriv_sensitivity(db, 1);
        const double bm2 = basis_.deriv_sensitivity(db, m - 2);
        (*grad)[dim() - 1] += prm.w2 * basis_.gl_w[a] * dir.dot(b1 * dP1 + bm2 * dPm2);
      }
    }

    // velocity-limit penalty at the constraint samples
    for (size_t i = 0; i < basis_.ck_u.size(); ++i) {
      const auto& db = basis_.ck_deriv_basis[i];
      const Eigen::VectorXd v = unit_velocity(P, db);
      for (int j = 0; j < dof_; ++j) {
        const double viol = std::abs(v[j]) / tf - vmax[j];
        if (viol <= 0.0) continue;
        F += pen_w * viol * viol;
        if (grad) {
          const double s = v[j] >= 0.0 ? 1.0 : -1.0;
          const double coef = 2.0 * pen_w * viol;
          for (int k = 0; k < num_free(); ++k) {
            const double b = basis_.deriv_sensitivity(db, 2 + k);
            if (b != 0.0) (*grad)[k * dof_ + j] += coef * s * b / tf;
          }
          const double b1 = basis_.deriv_sensitivity(db, 1);
          const double bm2 = basis_.deriv_sensitivity(db, m - 2);
          double dtf = -std::abs(v[j]) / (tf * tf);
          dtf += s / tf * (b1 * dP1[j] + bm2 * dPm2[j]);
          (*grad)[dim() - 1] += coef * dtf;
        }
      }
    }

    // collision penalty: hinge on (margin - clearance)
    const bool any_collision_pairs = !prob_.obstacles.empty() || dof_ >= 3;
    if (any_collision_pairs) {
      for (size_t i = 0; i < basis_.ck_u.size(); ++i) {
        const auto& pb = basis_.ck_pos_basis[i];
        const Eigen::VectorXd q = unit_position(P, pb);
        const FkResult fk = forward_kinematics(*prob_.model, q);
        const ClearanceInfo info = clearance_info(*prob_.model, fk, prob_.obstacles);
        const double hinge = prm.collision_margin - info.clearance;
        if (hinge <= 0.0 || !std::isfinite(info.clearance)) continue;
        F += pen_w * hinge * hinge;
        if (grad) {
          const Eigen::VectorXd gq = clearance_gradient(*prob_.model, fk, info);
          const double coef = -2.0 * pen_w * hinge;
          for (int k = 0; k < num_free(); ++k) {
            if (pb[2 + k] != 0.0) grad->segment(k * dof_, dof_) += coef * pb[2 + k] * gq;
          }
          (*grad)[dim() - 1] += coef * gq.dot(pb[1] * dP1 + pb[m - 2] * dPm2);
        }
      }
    }
    return F;
  }

  Eigen::VectorXd project(Eigen::VectorXd z) const {
    const auto lo = prob_.model->lower_limits();
    const auto hi = prob_.model->upper_limits();
    for (int k = 0; k < num_free(); ++k) {
      for (int j = 0; j < dof_; ++j) {
        z[k * dof_ + j] = std::clamp(z[k * dof_ + j], lo[j], hi[j]);
      }
    }
    z[dim() - 1] = std::clamp(z[dim() - 1], prob_.params.t_min, prob_.params.t_max);
    return z;
  }

  // Fit interior control points to a sampled target curve (least squares with
  // the four pinned points fixed).
  Eigen::VectorXd fit_to_samples(const Sampler& target, double tf) const {
    const int m = prob_.params.num_ctrl;
    const int S = std::max(4 * m, 32);
    Eigen::VectorXd z = pack(straight_interior(), tf);
    if (num_free() == 0) return z;
    const auto pinned = control_points(z);  // rows 0,1,m-2,m-1 are correct already
    Eigen::MatrixXd A(S, num_free());
    Eigen::MatrixXd rhs(S, dof_);
    for (int s = 0; s < S; ++s) {
      const double u = static_cast<double>(s) / (S - 1);
      const Eigen::VectorXd pb = basis_.pos_basis_at(u);
      for (int k = 0; k < num_free(); ++k) A(s, k) = pb[2 + k];
      Eigen::VectorXd r = target(u);
      r -= pb[0] * pinned[0] + pb[1] * pinned[1] + pb[m - 2] * pinned[m - 2] +
           pb[m - 1] * pinned[m - 1];
      rhs.row(s) = r.transpose();
    }
    const Eigen::MatrixXd sol = A.colPivHouseholderQr().solve(rhs);
    for (int k = 0; k < num_free(); ++k) z.segment(k * dof_, dof_) = sol.row(k).transpose();
    return project(z);
  }

  // Rescale duration until the sampled velocities meet the limits exactly.
  void velocity_polish(Eigen::VectorXd& z) const {
    for (int pass = 0; pass < 4; ++pass) {
      const auto P = control_points(z);
      const double need = min_feasible_tf(P);
      const double tf = z[dim() - 1];
      if (need <= tf || tf >= prob_.params.t_max) return;
      z[dim() - 1] = std::min(prob_.params.t_max, need * (1.0 + 1e-12));
      if (prob_.xdot0.isZero(0.0) && prob_.xdotf.isZero(0.0)) return;  // exact in one step
    }
  }

  TrajOptResult solve_numeric(const Sampler& init_sampler, double init_duration) const {
    const auto& prm = prob_.params;
    double tf0;
    Eigen::VectorXd z;
    if (init_sampler) {
      tf0 = std::clamp(init_duration, prm.t_min, prm.t_max);
      z = fit_to_samples(init_sampler, tf0);
    } else {
      const auto vmax = prob_.model->velocity_limits();
      double lb = prm.t_min;
      for (int j = 0; j < dof_; ++j) {
        lb = std::max(lb, std::abs(prob_.xf[j] - prob_.x0[j]) / vmax[j]);
      }
      tf0 = std::clamp(1.5 * lb, prm.t_min, prm.t_max);
      z = pack(straight_interior(), tf0);
    }

    TrajOptResult res;
    std::vector<Eigen::VectorXd> cache;
    cache.push_back(z);
    double mu = prm.penalty_init;
    bool diverged = false;
    for (int round = 0; round < prm.penalty_rounds && !diverged; ++round) {
      double F = eval(z, mu, nullptr);
      res.round_objectives.push_back({F});
      double alpha = 0.25;
      for (int it = 0; it < prm.max_inner_iters; ++it) {
        if (!std::isfinite(F)) {
          diverged = true;
          break;
        }
        Eigen::VectorXd g = penalized_gradient(z, mu);
        const double gn = g.norm();
        if (gn < 1e-14 * (1.0 + std::abs(F))) break;
        const Eigen::VectorXd dir = -g / gn;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
          const Eigen::VectorXd z_try = project(z + alpha * dir);
          const double F_try = eval(z_try, mu, nullptr);
          if (F_try <= F - 1e-4 * alpha * gn) {
            const double step = (z_try - z).norm();
            z = z_try;
            F = F_try;
            res.round_objectives.back().push_back(F);
            cache.push_back(z);
            alpha = std::min(alpha * 1.5, 1.0);
            accepted = true;
            if (step < prm.step_tol * (1.0 + z.norm())) it = prm.max_inner_iters;
            break;
          }
          alpha *= 0.5;
        }
        if (!accepted) break;  // line search collapsed at this penalty level
      }
      mu *= prm.penalty_growth;
    }

    velocity_polish(z);
    res.trajectory = build_trajectory(z);
    const bool finite = z.allFinite();
    res.status = finite ? validate(res.trajectory, prob_) : TrajStatus::Diverged;
    res.cost = finite ? trajectory_cost(res.trajectory, prm.w1, prm.w2)
                      : std::numeric_limits<double>::infinity();
    if (res.status == TrajStatus::Valid) {
      res.best_feasible = res.trajectory;
    } else if (finite) {
      // walk the iterate cache backwards for the last valid trajectory
      for (auto it = cache.rbegin(); it != cache.rend(); ++it) {
        Eigen::VectorXd zc = *it;
        velocity_polish(zc);
        BSplineTrajectory t = build_trajectory(zc);
        if (validate(t, prob_) == TrajStatus::Valid) {
          res.best_feasible = std::move(t);
          break;
        }
      }
    }
    return res;
  }

  TrajOptProblem prob_;
  detail::UnitBasis basis_;
  int dof_;

 public:
  // w1*(tf-t0) + w2 * Gauss-Legendre path integral of |qdot|_2
  static double trajectory_cost(const BSplineTrajectory& traj, double w1, double w2) {
    std::vector<double> u, w;
    detail::gauss_legendre_unit(32, u, w);
    const BSplineTrajectory d = derivative(traj);
    double len = 0.0;
    const double T = traj.tf - traj.t0;
    for (size_t a = 0; a < u.size(); ++a) {
      len += w[a] * evaluate(d, traj.t0 + u[a] * T).norm() * T;
    }
    return w1 * T + w2 * len;
  }
};

inline TrajOptResult optimize(const TrajOptProblem& prob,
                              const std::optional<BSplineTrajectory>& init = std::nullopt) {
  return TrajOpt(prob).optimize(init);
}

inline double trajectory_cost(const BSplineTrajectory& traj, double w1, double w2) {
  return TrajOpt::trajectory_cost(traj, w1, w2);
}

// Re-optimizes the time-concatenation of two trajectories sharing a junction
// state, seeding the solver with a least-squares refit of the pair.
inline TrajOptResult optimize_with_warm_start(const BSplineTrajectory& prefix,
                                              const BSplineTrajectory& suffix,
                                              TrajOptProblem prob) {
  if (prefix.empty() || suffix.empty()) {
    throw MismatchedJunction("warm start requires two non-empty trajectories");
  }
  if ((prefix.end() - suffix.start()).cwiseAbs().maxCoeff() > 1e-6) {
    throw MismatchedJunction("prefix end state does not match suffix start state");
  }
  prob.x0 = prefix.start();
  prob.xf = suffix.end();
  const double T = prefix.duration() + suffix.duration();
  const double split = T > 0.0 ? prefix.duration() / T : 0.5;
  auto target = [prefix, suffix, split](double u) -> Eigen::VectorXd {
    if (u <= split) {
      const double s = split > 0.0 ? u / split : 0.0;
      return evaluate(prefix, prefix.t0 + s * prefix.duration());
    }
    const double s = split < 1.0 ? (u - split) / (1.0 - split) : 1.0;
    return evaluate(suffix, suffix.t0 + s * suffix.duration());
  };
  const double concat_cost = trajectory_cost(prefix, prob.params.w1, prob.params.w2) +
                             trajectory_cost(suffix, prob.params.w1, prob.params.w2);
  return TrajOpt(prob).optimize_from(target, T, concat_cost);
}

}  // namespace ctmp
