#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "ctmp/common.hpp"
#include "ctmp/errors.hpp"

namespace ctmp {

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;
};

// One revolute joint plus the rigid link it drives. `origin` maps the parent
// frame to this joint's frame before the rotation is applied; the capsule is
// expressed in the post-rotation frame.
struct Joint {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
  double limit_lo = -M_PI;
  double limit_hi = M_PI;
  double vmax = 3.0;  // rad/s
  Eigen::Vector3d cap_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d cap_b = Eigen::Vector3d::Zero();
  double cap_radius = 0.05;
};

struct Obstacle {
  enum class Shape { Cylinder, Box };
  Shape shape = Shape::Box;
  // cylinder: axis segment [base, base + axis*height], checked as a capsule
  Eigen::Vector3d base = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double radius = 0.0;
  double height = 0.0;
  // box: axis-aligned cuboid
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();

  static Obstacle cylinder(const Eigen::Vector3d& base, const Eigen::Vector3d& axis,
                           double radius, double height) {
    if (radius <= 0.0 || height <= 0.0) throw ConfigError("cylinder obstacle needs positive dimensions");
    Obstacle o;
    o.shape = Shape::Cylinder;
    o.base = base;
    o.axis = axis.normalized();
    o.radius = radius;
    o.height = height;
    return o;
  }

  static Obstacle box(const Eigen::Vector3d& center, const Eigen::Vector3d& half_extents) {
    if ((half_extents.array() <= 0.0).any()) throw ConfigError("box obstacle needs positive half extents");
    Obstacle o;
    o.shape = Shape::Box;
    o.center = center;
    o.half_extents = half_extents;
    return o;
  }
};

struct ManipulatorModel {
  std::vector<Joint> joints;
  Eigen::Isometry3d tool = Eigen::Isometry3d::Identity();  // flange -> shield center
  Eigen::VectorXd home;

  int dof() const { return static_cast<int>(joints.size()); }

  Eigen::VectorXd lower_limits() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints[i].limit_lo;
    return v;
  }
  Eigen::VectorXd upper_limits() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints[i].limit_hi;
    return v;
  }
  Eigen::VectorXd velocity_limits() const {
    Eigen::VectorXd v(dof());
    for (int i = 0; i < dof(); ++i) v[i] = joints[i].vmax;
    return v;
  }

  bool within_limits(const Eigen::VectorXd& q, double tol = 0.0) const {
    for (int i = 0; i < dof(); ++i) {
      if (q[i] < joints[i].limit_lo - tol || q[i] > joints[i].limit_hi + tol) return false;
    }
    return true;
  }

  void validate() const {
    if (joints.empty()) throw ConfigError("manipulator has no joints");
    if (home.size() != dof()) throw ConfigError("home configuration dimension mismatch");
    if (!within_limits(home)) throw ConfigError("home configuration violates joint limits");
    for (const auto& j : joints) {
      if (j.vmax <= 0.0) throw ConfigError("velocity limits must be strictly positive");
      if (j.limit_lo >= j.limit_hi) throw ConfigError("empty joint limit interval");
      if (std::abs(j.axis.norm() - 1.0) > 1e-9) throw ConfigError("joint axis must be a unit vector");
    }
  }

  // 6-DOF chain in the reach class of a mid-size industrial arm (~1.45 m),
  // alternating Z/Y axes, links stacked along local +Z.
  static ManipulatorModel default_arm() {
    ManipulatorModel m;
    const double lengths[6] = {0.15, 0.25, 0.45, 0.25, 0.25, 0.10};
    const Eigen::Vector3d axes[6] = {
        Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitY(),
        Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ()};
    // limits keep the chain self-collision-free over the whole box
    const double lo[6] = {-M_PI, -1.6, -2.0, -M_PI, -1.6, -M_PI};
    const double hi[6] = {M_PI, 1.6, 2.0, M_PI, 1.6, M_PI};
    const double radii[6] = {0.07, 0.07, 0.06, 0.05, 0.05, 0.04};
    for (int i = 0; i < 6; ++i) {
      Joint j;
      j.axis = axes[i];
      j.origin = Eigen::Isometry3d(Eigen::Translation3d(0, 0, lengths[i]));
      j.limit_lo = lo[i];
      j.limit_hi = hi[i];
      j.vmax = 3.0;
      const double next = (i + 1 < 6) ? lengths[i + 1] : 0.08;
      j.cap_a = Eigen::Vector3d::Zero();
      j.cap_b = Eigen::Vector3d(0, 0, next);
      j.cap_radius = radii[i];
      m.joints.push_back(j);
    }
    m.tool = Eigen::Isometry3d(Eigen::Translation3d(0, 0, 0.08));
    m.home = Eigen::VectorXd::Zero(6);
    m.home << 0.0, 0.5, 0.6, 0.0, 0.4708, 0.0;  // shield facing +X
    return m;
  }
};

struct FkResult {
  Eigen::Isometry3d ee = Eigen::Isometry3d::Identity();
  std::vector<Eigen::Isometry3d> link_frames;   // post-rotation frame per joint
  std::vector<Eigen::Vector3d> joint_origins;   // world
  std::vector<Eigen::Vector3d> joint_axes;      // world, unit
};

inline FkResult forward_kinematics(const ManipulatorModel& model, const Eigen::VectorXd& q) {
  const int n = model.dof();
  FkResult fk;
  fk.link_frames.reserve(n);
  fk.joint_origins.reserve(n);
  fk.joint_axes.reserve(n);
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  for (int i = 0; i < n; ++i) {
    T = T * model.joints[i].origin;
    fk.joint_origins.push_back(T.translation());
    fk.joint_axes.push_back(T.linear() * model.joints[i].axis);
    T = T * Eigen::AngleAxisd(q[i], model.joints[i].axis);
    fk.link_frames.push_back(T);
  }
  fk.ee = T * model.tool;
  return fk;
}

// World capsule of link i at the given FK.
inline void link_capsule(const ManipulatorModel& model, const FkResult& fk, int i,
                         Eigen::Vector3d& a, Eigen::Vector3d& b, double& r) {
  a = fk.link_frames[i] * model.joints[i].cap_a;
  b = fk.link_frames[i] * model.joints[i].cap_b;
  r = model.joints[i].cap_radius;
}

// Position Jacobian (3 x n) of a world point rigidly attached to `link`.
inline Eigen::MatrixXd point_jacobian(const FkResult& fk, int link, const Eigen::Vector3d& p, int dof) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, dof);
  for (int j = 0; j <= link; ++j) {
    J.col(j) = fk.joint_axes[j].cross(p - fk.joint_origins[j]);
  }
  return J;
}

inline Eigen::MatrixXd geometric_jacobian(const FkResult& fk, int dof) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6, dof);
  const Eigen::Vector3d p = fk.ee.translation();
  for (int j = 0; j < dof; ++j) {
    J.block<3, 1>(0, j) = fk.joint_axes[j].cross(p - fk.joint_origins[j]);
    J.block<3, 1>(3, j) = fk.joint_axes[j];
  }
  return J;
}

// ---------------------------------------------------------------------------
// distance primitives

// Closest points between segments [p1,q1] and [p2,q2] (Ericson, RTCD 5.1.9).
inline double segment_segment_closest(const Eigen::Vector3d& p1, const Eigen::Vector3d& q1,
                                      const Eigen::Vector3d& p2, const Eigen::Vector3d& q2,
                                      Eigen::Vector3d& c1, Eigen::Vector3d& c2) {
  const Eigen::Vector3d d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double kEps = 1e-14;
  if (a <= kEps && e <= kEps) {
    // both degenerate
  } else if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      if (denom > kEps) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  c1 = p1 + d1 * s;
  c2 = p2 + d2 * t;
  return (c1 - c2).norm();
}

// Signed distance from a point to an axis-aligned box, with gradient.
inline double box_sdf(const Eigen::Vector3d& p, const Eigen::Vector3d& center,
                      const Eigen::Vector3d& half, Eigen::Vector3d* grad = nullptr) {
  const Eigen::Vector3d d = p - center;
  const Eigen::Vector3d q = d.cwiseAbs() - half;
  const Eigen::Vector3d qpos = q.cwiseMax(0.0);
  const double outside = qpos.norm();
  if (outside > 0.0) {
    if (grad) {
      Eigen::Vector3d g = qpos / outside;
      for (int i = 0; i < 3; ++i) g[i] *= (d[i] >= 0.0 ? 1.0 : -1.0);
      *grad = g;
    }
    return outside;
  }
  int k = 0;
  q.maxCoeff(&k);
  if (grad) {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    g[k] = (d[k] >= 0.0 ? 1.0 : -1.0);
    *grad = g;
  }
  return q[k];
}

// Minimum box SDF along segment [a,b]: coarse scan plus local refinement.
inline double segment_box_min_sdf(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                  const Eigen::Vector3d& center, const Eigen::Vector3d& half,
                                  double& t_best) {
  constexpr int kScan = 16;
  double best = std::numeric_limits<double>::infinity();
  t_best = 0.0;
  for (int i = 0; i <= kScan; ++i) {
    const double t = static_cast<double>(i) / kScan;
    const double v = box_sdf(a + t * (b - a), center, half);
    if (v < best) {
      best = v;
      t_best = t;
    }
  }
  double lo = std::max(0.0, t_best - 1.0 / kScan);
  double hi = std::min(1.0, t_best + 1.0 / kScan);
  for (int it = 0; it < 30; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    const double f1 = box_sdf(a + m1 * (b - a), center, half);
    const double f2 = box_sdf(a + m2 * (b - a), center, half);
    if (f1 < f2) hi = m2; else lo = m1;
  }
  t_best = 0.5 * (lo + hi);
  best = box_sdf(a + t_best * (b - a), center, half);
  return best;
}

// ---------------------------------------------------------------------------
// clearance

// Witness data of the most-penetrating (or closest) pair, enough to form the
// clearance gradient by the chain rule through the point Jacobians.
struct ClearanceInfo {
  double clearance = std::numeric_limits<double>::infinity();
  int link_a = -1;
  Eigen::Vector3d point_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();  // direction of increasing clearance at point_a
  int link_b = -1;                                   // second link for self pairs
  Eigen::Vector3d point_b = Eigen::Vector3d::Zero();
};

inline ClearanceInfo clearance_info(const ManipulatorModel& model, const FkResult& fk,
                                    const std::vector<Obstacle>& obstacles) {
  ClearanceInfo best;
  const int n = model.dof();
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d a, b;
    double r;
    link_capsule(model, fk, i, a, b, r);
    for (const auto& obs : obstacles) {
      double c;
      Eigen::Vector3d wp, nrm;
      if (obs.shape == Obstacle::Shape::Cylinder) {
        Eigen::Vector3d c1, c2;
        const Eigen::Vector3d o2 = obs.base + obs.axis * obs.height;
        const double d = segment_segment_closest(a, b, obs.base, o2, c1, c2);
        c = d - r - obs.radius;
        wp = c1;
        nrm = d > 1e-12 ? ((c1 - c2) / d).eval() : Eigen::Vector3d::Zero();
      } else {
        double t;
        const double sd = segment_box_min_sdf(a, b, obs.center, obs.half_extents, t);
        wp = a + t * (b - a);
        Eigen::Vector3d g;
        box_sdf(wp, obs.center, obs.half_extents, &g);
        c = sd - r;
        nrm = g;
      }
      if (c < best.clearance) {
        best.clearance = c;
        best.link_a = i;
        best.point_a = wp;
        best.normal = nrm;
        best.link_b = -1;
      }
    }
    // self collision: skip adjacent links, they share a joint
    for (int j = i + 2; j < n; ++j) {
      Eigen::Vector3d a2, b2;
      double r2;
      link_capsule(model, fk, j, a2, b2, r2);
      Eigen::Vector3d c1, c2;
      const double d = segment_segment_closest(a, b, a2, b2, c1, c2);
      const double c = d - r - r2;
      if (c < best.clearance) {
        best.clearance = c;
        best.link_a = i;
        best.point_a = c1;
        best.normal = d > 1e-12 ? ((c1 - c2) / d).eval() : Eigen::Vector3d::Zero();
        best.link_b = j;
        best.point_b = c2;
      }
    }
  }
  return best;
}

inline double clearance(const ManipulatorModel& model, const Eigen::VectorXd& q,
                        const std::vector<Obstacle>& obstacles) {
  return clearance_info(model, forward_kinematics(model, q), obstacles).clearance;
}

// d(clearance)/dq for the witness pair; valid wherever the argmin is unique.
inline Eigen::VectorXd clearance_gradient(const ManipulatorModel& model, const FkResult& fk,
                                          const ClearanceInfo& info) {
  const int n = model.dof();
  if (info.link_a < 0) return Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = info.normal.transpose() * point_jacobian(fk, info.link_a, info.point_a, n);
  if (info.link_b >= 0) {
    g -= (info.normal.transpose() * point_jacobian(fk, info.link_b, info.point_b, n)).transpose();
  }
  return g;
}

inline bool in_collision(const ManipulatorModel& model, const Eigen::VectorXd& q,
                         const std::vector<Obstacle>& obstacles) {
  return clearance(model, q, obstacles) < 0.0;
}

// ---------------------------------------------------------------------------
// inverse kinematics

struct IkParams {
  int max_iters = 200;
  double damping = 1e-2;
  int restarts = 8;
  double pos_tol = 1e-3;    // m
  double ang_tol = 0.00873; // rad (0.5 deg); >= pi means position-only
  double max_step = 0.5;    // rad, per-iteration step clamp
  bool align_axis_only = false;  // constrain only the tool z axis, not the spin about it
  uint64_t seed = 17;
};

namespace detail {

inline Eigen::Vector3d rotation_error(const Eigen::Matrix3d& target, const Eigen::Matrix3d& cur) {
  const Eigen::AngleAxisd aa(target * cur.transpose());
  return aa.angle() * aa.axis();
}

// Smallest rotation taking the current tool z axis onto the target z axis.
inline Eigen::Vector3d axis_alignment_error(const Eigen::Matrix3d& target,
                                            const Eigen::Matrix3d& cur) {
  const Eigen::Vector3d zc = cur.col(2), zt = target.col(2);
  const Eigen::Vector3d cross = zc.cross(zt);
  const double s = cross.norm(), c = zc.dot(zt);
  const double angle = std::atan2(s, c);
  if (s < 1e-12) {
    if (c > 0.0) return Eigen::Vector3d::Zero();
    // antiparallel: rotate about any perpendicular axis
    const Eigen::Vector3d perp =
        std::abs(zc.z()) < 0.9 ? zc.cross(Eigen::Vector3d::UnitZ()).normalized()
                               : zc.cross(Eigen::Vector3d::UnitX()).normalized();
    return angle * perp;
  }
  return angle * (cross / s);
}

inline std::optional<Eigen::VectorXd> ik_from_seed(const ManipulatorModel& model,
                                                   const Eigen::Isometry3d& target,
                                                   Eigen::VectorXd q, const IkParams& p) {
  const int n = model.dof();
  const bool position_only = p.ang_tol >= M_PI;
  const int rows = position_only ? 3 : 6;
  for (int it = 0; it <= p.max_iters; ++it) {
    const FkResult fk = forward_kinematics(model, q);
    const Eigen::Vector3d ep = target.translation() - fk.ee.translation();
    const Eigen::Vector3d er =
        position_only ? Eigen::Vector3d::Zero()
        : p.align_axis_only ? axis_alignment_error(target.linear(), fk.ee.linear())
                            : rotation_error(target.linear(), fk.ee.linear());
    if (ep.norm() <= p.pos_tol && er.norm() <= p.ang_tol) return q;
    if (it == p.max_iters) break;
    const Eigen::MatrixXd J6 = geometric_jacobian(fk, n);
    const Eigen::MatrixXd J = J6.topRows(rows);
    Eigen::VectorXd e(rows);
    e.head<3>() = ep;
    if (!position_only) e.tail<3>() = er;
    const Eigen::MatrixXd A =
        J * J.transpose() + p.damping * p.damping * Eigen::MatrixXd::Identity(rows, rows);
    Eigen::VectorXd dq = J.transpose() * A.ldlt().solve(e);
    const double m = dq.cwiseAbs().maxCoeff();
    if (m > p.max_step) dq *= p.max_step / m;
    q += dq;
    for (int i = 0; i < n; ++i) q[i] = std::clamp(q[i], model.joints[i].limit_lo, model.joints[i].limit_hi);
  }
  return std::nullopt;
}

}  // namespace detail

// Damped least-squares IK with joint-limit clamping and random restarts.
// Returns a configuration within limits whose FK matches `target` within
// (pos_tol, ang_tol), or nullopt if every attempt stalls.
inline std::optional<Eigen::VectorXd> inverse_kinematics(const ManipulatorModel& model,
                                                         const Eigen::Isometry3d& target,
                                                         const Eigen::VectorXd& seed,
                                                         const IkParams& params = {}) {
  if (auto q = detail::ik_from_seed(model, target, seed, params)) return q;
  std::mt19937_64 rng(params.seed);
  for (int r = 0; r < params.restarts; ++r) {
    Eigen::VectorXd q0(model.dof());
    for (int i = 0; i < model.dof(); ++i) {
      std::uniform_real_distribution<double> dist(model.joints[i].limit_lo, model.joints[i].limit_hi);
      q0[i] = dist(rng);
    }
    if (auto q = detail::ik_from_seed(model, target, q0, params)) return q;
  }
  return std::nullopt;
}

}  // namespace ctmp
