#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ctmp/errors.hpp"
#include "ctmp/geometry.hpp"

namespace ctmp {

// Drag-free point-mass projectile under gravity.
struct ProjectileState {
  Eigen::Vector3d p0 = Eigen::Vector3d::Zero();  // initial position (m)
  Eigen::Vector3d v0 = Eigen::Vector3d::Zero();  // initial velocity (m/s)
  double g = 9.81;
};

struct Observation {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

inline Eigen::Vector3d propagate(const ProjectileState& s, double t) {
  Eigen::Vector3d p = s.p0 + t * s.v0;
  p.z() -= 0.5 * s.g * t * t;
  return p;
}

// Least-squares estimate of (p0, v0) from timestamped positions. The model is
// linear per axis once the known gravity term is moved to the left-hand side,
// so the normal equations solve it exactly.
inline ProjectileState fit(std::span<const Observation> obs, double g = 9.81) {
  if (obs.size() < 2) throw DegenerateSystem("fit: need at least 2 observations");
  const double n = static_cast<double>(obs.size());
  double st = 0.0, stt = 0.0;
  for (const auto& o : obs) {
    st += o.t;
    stt += o.t * o.t;
  }
  const double det = n * stt - st * st;
  const double scale = std::max(1.0, stt);
  if (std::abs(det) < 1e-12 * scale) {
    throw DegenerateSystem("fit: normal matrix is singular (duplicate timestamps?)");
  }
  ProjectileState s;
  s.g = g;
  for (int axis = 0; axis < 3; ++axis) {
    double sy = 0.0, sty = 0.0;
    for (const auto& o : obs) {
      double y = o.position[axis];
      if (axis == 2) y += 0.5 * g * o.t * o.t;  // remove the known gravity term
      sy += y;
      sty += o.t * y;
    }
    s.p0[axis] = (stt * sy - st * sty) / det;
    s.v0[axis] = (n * sty - st * sy) / det;
  }
  return s;
}

// ---------------------------------------------------------------------------
// dome intersection

struct DomeCrossing {
  double t_outer = 0.0;
  double t_inner = 0.0;
  Eigen::Vector3d p_outer = Eigen::Vector3d::Zero();
  Eigen::Vector3d p_inner = Eigen::Vector3d::Zero();
  Face outer_face = Face::PosX;
  Face inner_face = Face::PosX;
};

namespace detail {

// Times t >= t_min at which the path crosses the given active face, inside
// the face rectangle.
inline void face_crossings(const ProjectileState& s, const FaceGrid& g, double t_min,
                           std::vector<double>& out) {
  const int axis = face_axis(g.face);
  std::array<double, 2> roots{};
  int n_roots = 0;
  if (axis < 2) {
    const double v = s.v0[axis];
    if (std::abs(v) > 1e-15) roots[n_roots++] = (g.plane - s.p0[axis]) / v;
  } else {
    // z(t) = z0 + vz t - g/2 t^2
    const double a = -0.5 * s.g, b = s.v0.z(), c = s.p0.z() - g.plane;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      roots[n_roots++] = (-b + sq) / (2.0 * a);
      roots[n_roots++] = (-b - sq) / (2.0 * a);
    }
  }
  const int ua = face_u_axis(g.face), va = face_v_axis(g.face);
  const double u_max = g.u_min + g.nu * g.cell, v_max = g.v_min + g.nv * g.cell;
  for (int i = 0; i < n_roots; ++i) {
    const double t = roots[i];
    if (t < t_min) continue;
    const Eigen::Vector3d p = propagate(s, t);
    constexpr double kEdge = 1e-9;
    if (p[ua] >= g.u_min - kEdge && p[ua] <= u_max + kEdge && p[va] >= g.v_min - kEdge &&
        p[va] <= v_max + kEdge) {
      out.push_back(t);
    }
  }
}

inline std::optional<std::pair<double, Face>> earliest_crossing(const ProjectileState& s,
                                                                const std::vector<FaceGrid>& faces,
                                                                double t_min) {
  std::optional<std::pair<double, Face>> best;
  std::vector<double> ts;
  for (const auto& g : faces) {
    ts.clear();
    face_crossings(s, g, t_min, ts);
    for (double t : ts) {
      if (!best || t < best->first) best = {t, g.face};
    }
  }
  return best;
}

}  // namespace detail

// Earliest crossings of an active outer face and then an active inner face.
// The returned segment is the straight-line stand-in for the path between the
// domes used by the cell lookup.
inline std::optional<DomeCrossing> dome_crossing(const ProjectileState& s, const DomeGrid& grid) {
  const auto outer = detail::earliest_crossing(s, grid.outer_faces, 0.0);
  if (!outer) return std::nullopt;
  const auto inner = detail::earliest_crossing(s, grid.inner_faces, outer->first + 1e-12);
  if (!inner) return std::nullopt;
  DomeCrossing c;
  c.t_outer = outer->first;
  c.t_inner = inner->first;
  c.p_outer = propagate(s, c.t_outer);
  c.p_inner = propagate(s, c.t_inner);
  c.outer_face = outer->second;
  c.inner_face = inner->second;
  return c;
}

// ---------------------------------------------------------------------------
// synthetic projectile sampling

struct ProjectileSampleSpec {
  double distance_min = 6.0;   // launch distance from dome center (m)
  double distance_max = 12.0;
  double speed_min = 7.0;      // launch speed (m/s)
  double speed_max = 12.0;
  double launch_height = 1.0;  // m above the arm base plane
  double azimuth_range = 30.0 * M_PI / 180.0;  // spread around the face normal
  uint64_t seed = 1;

  void validate() const {
    if (!(distance_min > 0.0 && distance_max >= distance_min)) {
      throw ConfigError("projectile distance range must be positive and non-empty");
    }
    if (!(speed_min > 0.0 && speed_max >= speed_min)) {
      throw ConfigError("projectile speed range must be positive and non-empty");
    }
  }
};

struct SampledProjectile {
  ProjectileState state;
  double time_of_flight = 0.0;  // launch to inner-dome crossing
};

// Launches a parabola from `distance` away through a uniformly sampled aim
// point on an active inner face, resampling until the path crosses both
// domes. Low-arc solution of the ballistic aiming equation.
inline SampledProjectile sample_projectile(const ProjectileSampleSpec& spec, const DomeGrid& grid,
                                           std::mt19937_64& rng) {
  spec.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& faces = grid.inner_faces;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double d = spec.distance_min + (spec.distance_max - spec.distance_min) * unit(rng);
    const double speed = spec.speed_min + (spec.speed_max - spec.speed_min) * unit(rng);
    const FaceGrid& face = faces[static_cast<size_t>(unit(rng) * faces.size()) % faces.size()];

    Eigen::Vector3d aim;
    aim[face_axis(face.face)] = face.plane;
    aim[face_u_axis(face.face)] = face.u_min + face.nu * face.cell * unit(rng);
    aim[face_v_axis(face.face)] = face.v_min + face.nv * face.cell * unit(rng);

    // launch point: horizontal offset from the dome center along the face
    // normal (any azimuth for a top-face aim), at fixed height
    double psi;
    Eigen::Vector3d n = face_normal(face.face);
    if (face_axis(face.face) == 2) {
      psi = (2.0 * unit(rng) - 1.0) * M_PI;
      n = Eigen::Vector3d::UnitX();
    } else {
      psi = (2.0 * unit(rng) - 1.0) * spec.azimuth_range;
    }
    const Eigen::Vector3d u_h =
        (Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ()) * n).normalized();
    const double dz = spec.launch_height - grid.config.center.z();
    const double r_h = std::sqrt(std::max(0.0, d * d - dz * dz));
    Eigen::Vector3d launch = grid.config.center + r_h * u_h;
    launch.z() = spec.launch_height;

    // aiming equation: tan(theta) = (v^2 - sqrt(v^4 - g(gR^2 + 2 h v^2))) / (gR)
    const Eigen::Vector3d delta = aim - launch;
    const double R = std::hypot(delta.x(), delta.y());
    const double h = delta.z();
    const double v2 = speed * speed;
    const double g = 9.81;
    const double disc = v2 * v2 - g * (g * R * R + 2.0 * h * v2);
    if (disc < 0.0 || R < 1e-9) continue;  // too slow to reach; resample
    const double tan_theta = (v2 - std::sqrt(disc)) / (g * R);
    const double theta = std::atan(tan_theta);
    const Eigen::Vector3d dir_h = Eigen::Vector3d(delta.x(), delta.y(), 0.0) / R;

    ProjectileState s;
    s.p0 = launch;
    s.v0 = dir_h * speed * std::cos(theta) + Eigen::Vector3d::UnitZ() * speed * std::sin(theta);
    s.g = g;
    if (auto crossing = dome_crossing(s, grid)) {
      return SampledProjectile{s, crossing->t_inner};
    }
  }
  throw SamplingExhausted("sample_projectile: no dome-crossing parabola after 1000 attempts");
}

}  // namespace ctmp
