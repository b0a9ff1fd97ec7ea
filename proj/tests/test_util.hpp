// Shared model builders for tests.
#pragma once

#include <Eigen/Dense>

#include "ctmp/ballistics.hpp"
#include "ctmp/geometry.hpp"
#include "ctmp/kinematics.hpp"

namespace testutil {

// Ballistic state whose path crosses the tunnel's outer cell center (plus a
// small in-face offset) and then its inner cell center, reaching the outer
// dome `t_back` seconds after launch.
inline ctmp::ProjectileState through_tunnel(const ctmp::Tunnel& tunnel,
                                            const Eigen::Vector3d& offset =
                                                Eigen::Vector3d::Zero(),
                                            double t_back = 0.9, double dt = 0.12) {
  const Eigen::Vector3d p_outer = tunnel.line_a + offset;
  const Eigen::Vector3d p_inner = tunnel.line_b + offset;
  Eigen::Vector3d v_face = (p_inner - p_outer) / dt;
  v_face.z() += 0.5 * 9.81 * dt;  // parabola through both points
  ctmp::ProjectileState s;
  s.v0 = v_face + 9.81 * t_back * Eigen::Vector3d::UnitZ();
  s.p0 = p_outer - s.v0 * t_back + 0.5 * 9.81 * t_back * t_back * Eigen::Vector3d::UnitZ();
  return s;
}

// Planar arm in the XY plane: revolute Z joints, links along local +X.
inline ctmp::ManipulatorModel planar_arm(const std::vector<double>& lengths,
                                         double vmax = 2.0) {
  ctmp::ManipulatorModel m;
  for (size_t i = 0; i < lengths.size(); ++i) {
    ctmp::Joint j;
    j.axis = Eigen::Vector3d::UnitZ();
    j.origin = i == 0 ? Eigen::Isometry3d::Identity()
                      : Eigen::Isometry3d(Eigen::Translation3d(lengths[i - 1], 0, 0));
    j.limit_lo = -M_PI;
    j.limit_hi = M_PI;
    j.vmax = vmax;
    j.cap_a = Eigen::Vector3d::Zero();
    j.cap_b = Eigen::Vector3d(lengths[i], 0, 0);
    j.cap_radius = 0.02;
    m.joints.push_back(j);
  }
  m.tool = Eigen::Isometry3d(Eigen::Translation3d(lengths.back(), 0, 0));
  m.home = Eigen::VectorXd::Zero(static_cast<int>(lengths.size()));
  return m;
}

// Chain of joints whose links stack along +Z (pure Z offsets).
inline ctmp::ManipulatorModel z_chain(const std::vector<double>& offsets,
                                      const std::vector<Eigen::Vector3d>& axes) {
  ctmp::ManipulatorModel m;
  for (size_t i = 0; i < offsets.size(); ++i) {
    ctmp::Joint j;
    j.axis = axes[i];
    j.origin = Eigen::Isometry3d(Eigen::Translation3d(0, 0, offsets[i]));
    j.cap_b = Eigen::Vector3d(0, 0, i + 1 < offsets.size() ? offsets[i + 1] : 0.05);
    j.cap_radius = 0.03;
    m.joints.push_back(j);
  }
  m.home = Eigen::VectorXd::Zero(static_cast<int>(offsets.size()));
  return m;
}

}  // namespace testutil
