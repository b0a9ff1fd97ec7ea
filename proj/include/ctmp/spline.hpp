#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "ctmp/errors.hpp"

namespace ctmp {

// Joint-space B-spline trajectory. Clamped knot vectors give exact endpoint
// interpolation, which every planner in this project relies on.
struct BSplineTrajectory {
  int degree = 0;
  std::vector<double> knots;                    // non-decreasing, |knots| = |ctrl| + degree + 1
  std::vector<Eigen::VectorXd> control_points;  // de Boor points
  double t0 = 0.0;
  double tf = 0.0;

  int dim() const { return control_points.empty() ? 0 : static_cast<int>(control_points.front().size()); }
  double duration() const { return tf - t0; }
  bool empty() const { return control_points.empty(); }

  Eigen::VectorXd start() const { return control_points.front(); }
  Eigen::VectorXd end() const { return control_points.back(); }
};

// Clamped knot vector with uniform interior knots.
inline std::vector<double> clamped_uniform_knots(int num_ctrl, int degree, double t0, double tf) {
  if (num_ctrl < degree + 1) {
    throw ArityError("clamped_uniform_knots: need at least degree+1 control points, got " +
                     std::to_string(num_ctrl) + " for degree " + std::to_string(degree));
  }
  const int segments = num_ctrl - degree;  // non-empty spans
  std::vector<double> knots(num_ctrl + degree + 1);
  for (int i = 0; i <= degree; ++i) knots[i] = t0;
  for (int i = 1; i < segments; ++i) {
    knots[degree + i] = t0 + (tf - t0) * static_cast<double>(i) / segments;
  }
  for (int i = 0; i <= degree; ++i) knots[num_ctrl + i] = tf;
  return knots;
}

// Cox-de Boor recursion, degree convention: N_{i,p} is supported on
// [T_i, T_{i+p+1}] and any 0/0 term contributes 0. The last non-empty span is
// closed at the final knot so endpoint interpolation holds exactly.
inline double bspline_basis(int i, int p, double t, std::span<const double> T) {
  const double t_last = T.back();
  if (p == 0) {
    if (T[i] <= t && t < T[i + 1]) return 1.0;
    // closed right end of the domain
    if (t == t_last && T[i + 1] == t_last && T[i] < T[i + 1]) return 1.0;
    return 0.0;
  }
  double left = 0.0, right = 0.0;
  const double dl = T[i + p] - T[i];
  if (dl > 0.0) left = (t - T[i]) / dl * bspline_basis(i, p - 1, t, T);
  const double dr = T[i + p + 1] - T[i + 1];
  if (dr > 0.0) right = (T[i + p + 1] - t) / dr * bspline_basis(i + 1, p - 1, t, T);
  return left + right;
}

namespace detail {

// Index of the knot span containing t: largest k with T[k] <= t < T[k+1],
// clamped so t == tf lands in the last non-empty span.
inline int find_span(double t, int degree, int num_ctrl, std::span<const double> T) {
  int lo = degree;
  int hi = num_ctrl;  // t in [T[degree], T[num_ctrl]]
  if (t >= T[hi]) {
    int k = hi - 1;
    while (k > lo && T[k] == T[k + 1]) --k;
    return k;
  }
  while (lo + 1 < hi) {
    const int mid = (lo + hi) / 2;
    if (t < T[mid]) hi = mid; else lo = mid;
  }
  return lo;
}

// All p+1 basis values that are non-zero on the span. Iterative form of the
// same recursion as bspline_basis.
inline void basis_funs(int span, double t, int p, std::span<const double> T, double* out) {
  out[0] = 1.0;
  std::array<double, 16> left{}, right{};
  for (int j = 1; j <= p; ++j) {
    left[j] = t - T[span + 1 - j];
    right[j] = T[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double tmp = denom > 0.0 ? out[r] / denom : 0.0;
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

}  // namespace detail

inline Eigen::VectorXd evaluate(const BSplineTrajectory& traj, double t) {
  const double span_eps = 1e-12 * (1.0 + std::abs(traj.tf - traj.t0));
  if (t < traj.t0 - span_eps || t > traj.tf + span_eps) {
    throw DomainError("evaluate: t=" + std::to_string(t) + " outside [" +
                      std::to_string(traj.t0) + ", " + std::to_string(traj.tf) + "]");
  }
  t = std::clamp(t, traj.t0, traj.tf);
  const int p = traj.degree;
  const int n = static_cast<int>(traj.control_points.size());
  const int span = detail::find_span(t, p, n, traj.knots);
  double N[16];
  detail::basis_funs(span, t, p, traj.knots, N);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(traj.dim());
  for (int j = 0; j <= p; ++j) out += N[j] * traj.control_points[span - p + j];
  return out;
}

// Standard B-spline derivative: one degree lower, knot vector trimmed at both
// ends, Q_i = p (P_{i+1} - P_i) / (T_{i+p+1} - T_{i+1}).
inline BSplineTrajectory derivative(const BSplineTrajectory& traj) {
  if (traj.degree < 1) throw DegreeError("derivative: degree-0 spline has no derivative spline");
  const int p = traj.degree;
  BSplineTrajectory d;
  d.degree = p - 1;
  d.t0 = traj.t0;
  d.tf = traj.tf;
  d.knots.assign(traj.knots.begin() + 1, traj.knots.end() - 1);
  d.control_points.reserve(traj.control_points.size() - 1);
  for (size_t i = 0; i + 1 < traj.control_points.size(); ++i) {
    const double denom = traj.knots[i + p + 1] - traj.knots[i + 1];
    if (denom > 0.0) {
      d.control_points.push_back(p / denom * (traj.control_points[i + 1] - traj.control_points[i]));
    } else {
      d.control_points.push_back(Eigen::VectorXd::Zero(traj.dim()));
    }
  }
  return d;
}

inline Eigen::VectorXd velocity(const BSplineTrajectory& traj, double t) {
  return evaluate(derivative(traj), t);
}

}  // namespace ctmp
