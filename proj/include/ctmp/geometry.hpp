#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctmp/errors.hpp"

namespace ctmp {

// Dome faces that can admit an attack. The bottom (-Z) is the floor.
enum class Face : int { PosX = 0, NegX = 1, PosY = 2, NegY = 3, PosZ = 4 };

inline const char* face_name(Face f) {
  switch (f) {
    case Face::PosX: return "+X";
    case Face::NegX: return "-X";
    case Face::PosY: return "+Y";
    case Face::NegY: return "-Y";
    case Face::PosZ: return "+Z";
  }
  return "?";
}

inline Face face_from_name(const std::string& s) {
  if (s == "+X") return Face::PosX;
  if (s == "-X") return Face::NegX;
  if (s == "+Y") return Face::PosY;
  if (s == "-Y") return Face::NegY;
  if (s == "+Z") return Face::PosZ;
  throw ConfigError("unknown face '" + s + "' (expected one of +X -X +Y -Y +Z)");
}

// axis index and sign of the face normal
inline int face_axis(Face f) {
  switch (f) {
    case Face::PosX: case Face::NegX: return 0;
    case Face::PosY: case Face::NegY: return 1;
    case Face::PosZ: return 2;
  }
  return 0;
}
inline double face_sign(Face f) {
  return (f == Face::NegX || f == Face::NegY) ? -1.0 : 1.0;
}
// in-plane axes: columns are indexed by `col` along u and `row` along v
inline int face_u_axis(Face f) { return face_axis(f) == 0 ? 1 : 0; }
inline int face_v_axis(Face f) { return face_axis(f) == 2 ? 1 : 2; }

inline Eigen::Vector3d face_normal(Face f) {
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[face_axis(f)] = face_sign(f);
  return n;
}

enum class DomeSide { Inner, Outer };

struct DomeConfig {
  Eigen::Vector3d center = Eigen::Vector3d(0, 0, 0.75);
  Eigen::Vector3d inner_extents = Eigen::Vector3d(0.5, 0.5, 0.75);   // half sizes
  Eigen::Vector3d outer_extents = Eigen::Vector3d(1.25, 1.25, 1.0);  // half sizes
  std::set<Face> active_faces = {Face::PosX};
  double cell_size = 0.25;
  double shield_side = 0.3;
  double pose_tolerance = 0.01;
  double goal_margin = 0.05;  // centerline end offset so the shield clears both surfaces

  const Eigen::Vector3d& extents(DomeSide s) const {
    return s == DomeSide::Inner ? inner_extents : outer_extents;
  }

  void validate() const {
    if (!(outer_extents.array() > inner_extents.array()).all()) {
      throw ConfigError("outer dome must strictly contain the inner dome on every axis");
    }
    if (cell_size <= 0.0) throw ConfigError("cell_size must be positive");
    if (cell_size >= shield_side) throw ConfigError("cell_size must be smaller than shield_side");
    if (shield_side < cell_size + 2.0 * pose_tolerance) {
      throw ConfigError("shield_side must be >= cell_size + 2*pose_tolerance (blocking margin)");
    }
    if (active_faces.empty()) throw ConfigError("at least one active face required");
    for (Face f : active_faces) {
      for (DomeSide s : {DomeSide::Inner, DomeSide::Outer}) {
        const Eigen::Vector3d& e = extents(s);
        for (int axis : {face_u_axis(f), face_v_axis(f)}) {
          const double len = 2.0 * e[axis];
          const double cells = len / cell_size;
          if (std::abs(cells - std::round(cells)) > 1e-9 || std::round(cells) < 1.0) {
            throw ConfigError(std::string("face ") + face_name(f) + " extent " + std::to_string(len) +
                              " is not an integer multiple of cell_size");
          }
        }
      }
    }
  }
};

struct Cell {
  DomeSide dome = DomeSide::Outer;
  Face face = Face::PosX;
  int row = 0;  // along the face v axis
  int col = 0;  // along the face u axis
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d outward_normal = Eigen::Vector3d::UnitX();
};

struct Tunnel {
  int id = -1;
  Cell outer_cell;
  Cell inner_cell;
  Eigen::Vector3d line_a;  // outer cell center
  Eigen::Vector3d line_b;  // inner cell center
  bool feasible = false;

  Eigen::Vector3d direction() const { return (line_b - line_a).normalized(); }
  double length() const { return (line_b - line_a).norm(); }
};

struct ShieldGoalPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();  // z axis = shield normal
  double pos_tolerance = 0.01;
  double ang_tolerance = 0.05;

  Eigen::Isometry3d pose() const {
    Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
    T.linear() = orientation.toRotationMatrix();
    T.translation() = position;
    return T;
  }
};

inline bool tunnel_feasible(const Cell& outer, const Cell& inner, const DomeConfig& config);

// ---------------------------------------------------------------------------
// face grids

// Per-face grid arithmetic: cell counts, centers, and dense indexing. This is
// what makes the online lookup a handful of arithmetic ops.
struct FaceGrid {
  Face face;
  double plane;        // world coordinate of the face plane along its axis
  double u_min, v_min; // world coordinates of the low corner
  int nu = 0, nv = 0;
  double cell = 0.0;
  int offset = 0;      // linear index of (row=0, col=0) within the dome's cell list

  int count() const { return nu * nv; }

  Eigen::Vector3d cell_center(int row, int col) const {
    Eigen::Vector3d p;
    p[face_axis(face)] = plane;
    p[face_u_axis(face)] = u_min + (col + 0.5) * cell;
    p[face_v_axis(face)] = v_min + (row + 0.5) * cell;
    return p;
  }

  // grid index with edge ties broken toward the lower cell
  int tie_low_index(double x, double x_min, int n) const {
    const double u = (x - x_min) / cell;
    int idx = static_cast<int>(std::floor(u));
    if (u - std::floor(u) < 1e-12 && idx > 0) --idx;  // exactly on a grid line
    return std::clamp(idx, 0, n - 1);
  }

  // (row, col) of the face point p, ties toward lower indices
  std::pair<int, int> locate(const Eigen::Vector3d& p) const {
    return {tie_low_index(p[face_v_axis(face)], v_min, nv),
            tie_low_index(p[face_u_axis(face)], u_min, nu)};
  }
};

struct DomeGrid {
  DomeConfig config;
  std::vector<FaceGrid> inner_faces;  // ordered by Face enum over active faces
  std::vector<FaceGrid> outer_faces;
  int inner_count = 0;
  int outer_count = 0;

  explicit DomeGrid(const DomeConfig& cfg) : config(cfg) {
    config.validate();
    for (DomeSide side : {DomeSide::Inner, DomeSide::Outer}) {
      auto& faces = side == DomeSide::Inner ? inner_faces : outer_faces;
      int offset = 0;
      for (Face f : config.active_faces) {  // std::set orders by enum value
        const Eigen::Vector3d& e = config.extents(side);
        FaceGrid g;
        g.face = f;
        g.cell = config.cell_size;
        g.plane = config.center[face_axis(f)] + face_sign(f) * e[face_axis(f)];
        g.u_min = config.center[face_u_axis(f)] - e[face_u_axis(f)];
        g.v_min = config.center[face_v_axis(f)] - e[face_v_axis(f)];
        g.nu = static_cast<int>(std::llround(2.0 * e[face_u_axis(f)] / config.cell_size));
        g.nv = static_cast<int>(std::llround(2.0 * e[face_v_axis(f)] / config.cell_size));
        g.offset = offset;
        offset += g.count();
        faces.push_back(g);
      }
      (side == DomeSide::Inner ? inner_count : outer_count) = offset;
    }
  }

  const FaceGrid* find(DomeSide side, Face f) const {
    const auto& faces = side == DomeSide::Inner ? inner_faces : outer_faces;
    for (const auto& g : faces) {
      if (g.face == f) return &g;
    }
    return nullptr;
  }

  int linear_index(DomeSide side, Face f, int row, int col) const {
    const FaceGrid* g = find(side, f);
    return g->offset + row * g->nu + col;
  }

  int tunnel_count() const { return outer_count * inner_count; }
  int tunnel_id(int outer_linear, int inner_linear) const {
    return outer_linear * inner_count + inner_linear;
  }

  Cell cell_from_linear(DomeSide side, int linear) const {
    const auto& faces = side == DomeSide::Inner ? inner_faces : outer_faces;
    for (const auto& g : faces) {
      if (linear < g.offset + g.count()) {
        const int local = linear - g.offset;
        Cell c;
        c.dome = side;
        c.face = g.face;
        c.row = local / g.nu;
        c.col = local % g.nu;
        c.center = g.cell_center(c.row, c.col);
        c.outward_normal = face_normal(g.face);
        return c;
      }
    }
    throw ConfigError("cell_from_linear: index out of range");
  }

  Tunnel tunnel_from_id(int id) const {
    Tunnel t;
    t.id = id;
    t.outer_cell = cell_from_linear(DomeSide::Outer, id / inner_count);
    t.inner_cell = cell_from_linear(DomeSide::Inner, id % inner_count);
    t.line_a = t.outer_cell.center;
    t.line_b = t.inner_cell.center;
    t.feasible = tunnel_feasible(t.outer_cell, t.inner_cell, config);
    return t;
  }
};

// ---------------------------------------------------------------------------
// discretization and tunnels

inline std::pair<std::vector<Cell>, std::vector<Cell>> discretize_domes(const DomeConfig& config) {
  DomeGrid grid(config);
  std::pair<std::vector<Cell>, std::vector<Cell>> out;
  for (DomeSide side : {DomeSide::Inner, DomeSide::Outer}) {
    auto& cells = side == DomeSide::Inner ? out.first : out.second;
    for (const FaceGrid& g : (side == DomeSide::Inner ? grid.inner_faces : grid.outer_faces)) {
      for (int row = 0; row < g.nv; ++row) {
        for (int col = 0; col < g.nu; ++col) {
          Cell c;
          c.dome = side;
          c.face = g.face;
          c.row = row;
          c.col = col;
          c.center = g.cell_center(row, col);
          c.outward_normal = face_normal(g.face);
          cells.push_back(c);
        }
      }
    }
  }
  return out;
}

namespace detail {

struct BoxEntry {
  double t;
  int axis;
  double sign;  // +1: entered through the max face of `axis`
};

// First parameter t in [0,1] where segment a->b enters the box, with the face
// it entered through. Requires the segment origin outside the box.
inline std::optional<BoxEntry> segment_box_entry(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                                 const Eigen::Vector3d& center,
                                                 const Eigen::Vector3d& half) {
  double t_enter = 0.0, t_exit = 1.0;
  int enter_axis = -1;
  double enter_sign = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = b[i] - a[i];
    const double lo = center[i] - half[i], hi = center[i] + half[i];
    if (std::abs(d) < 1e-15) {
      if (a[i] < lo || a[i] > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - a[i]) / d;
    double t1 = (hi - a[i]) / d;
    double sign = -1.0;  // entering through min face when moving +
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;  // moving - enters through max face
    }
    if (t0 > t_enter) {
      t_enter = t0;
      enter_axis = i;
      enter_sign = sign;
    }
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return std::nullopt;
  }
  if (enter_axis < 0) return std::nullopt;  // started inside
  return BoxEntry{t_enter, enter_axis, enter_sign};
}

inline std::optional<Face> entry_face(const BoxEntry& e) {
  if (e.axis == 0) return e.sign > 0 ? Face::PosX : Face::NegX;
  if (e.axis == 1) return e.sign > 0 ? Face::PosY : Face::NegY;
  return e.sign > 0 ? std::optional<Face>(Face::PosZ) : std::nullopt;  // -Z face is the floor
}

}  // namespace detail

// A tunnel is kept iff an attack can actually traverse it: the centerline
// must leave the outer cell heading inward and its first contact with the
// inner dome must be the inner cell's own face.
inline bool tunnel_feasible(const Cell& outer, const Cell& inner, const DomeConfig& config) {
  const Eigen::Vector3d dir = inner.center - outer.center;
  if (dir.norm() < 1e-12) return false;
  // outward leg of the centerline must exit through the outer cell's face
  if (outer.outward_normal.dot(-dir.normalized()) < 0.0) return false;
  const auto entry =
      detail::segment_box_entry(outer.center, inner.center, config.center, config.inner_extents);
  if (!entry) return false;
  const auto f = detail::entry_face(*entry);
  return f && *f == inner.face;
}

inline std::vector<Tunnel> enumerate_tunnels(const std::vector<Cell>& inner_cells,
                                             const std::vector<Cell>& outer_cells,
                                             const DomeConfig& config) {
  std::vector<Tunnel> tunnels;
  tunnels.reserve(inner_cells.size() * outer_cells.size());
  int id = 0;
  for (const Cell& o : outer_cells) {
    for (const Cell& i : inner_cells) {
      Tunnel t;
      t.id = id++;
      t.outer_cell = o;
      t.inner_cell = i;
      t.line_a = o.center;
      t.line_b = i.center;
      t.feasible = tunnel_feasible(o, i, config);
      tunnels.push_back(t);
    }
  }
  return tunnels;
}

// Deterministic frame with the z axis aligned to `dir`.
inline Eigen::Quaterniond orientation_along(const Eigen::Vector3d& dir) {
  const Eigen::Vector3d z = dir.normalized();
  const Eigen::Vector3d ref =
      std::abs(z.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d x = ref.cross(z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = z;
  return Eigen::Quaterniond(R);
}

// Equidistant goal poses on the centerline, shield plane orthogonal to it.
// Both ends are pulled in by `config.goal_margin` so the shield body never
// pokes through a dome surface.
inline std::vector<ShieldGoalPose> sample_goal_poses(const Tunnel& tunnel, int n,
                                                     const DomeConfig& config) {
  if (!tunnel.feasible) {
    throw InfeasibleTunnel("sample_goal_poses: tunnel " + std::to_string(tunnel.id) +
                           " is not feasible");
  }
  if (n < 1) throw ConfigError("sample_goal_poses: n must be >= 1");
  const Eigen::Vector3d dir = tunnel.direction();
  const double len = tunnel.length();
  const double margin = std::min(config.goal_margin, 0.45 * len);
  const Eigen::Vector3d a = tunnel.line_a + margin * dir;
  const Eigen::Vector3d b = tunnel.line_b - margin * dir;
  // shield normal faces the attack (outward along the centerline)
  const Eigen::Quaterniond R = orientation_along(-dir);
  std::vector<ShieldGoalPose> poses;
  poses.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double s = (n == 1) ? 0.5 : static_cast<double>(k) / (n - 1);
    ShieldGoalPose g;
    g.position = a + s * (b - a);
    g.orientation = R;
    g.pos_tolerance = config.pose_tolerance;
    poses.push_back(g);
  }
  return poses;
}

// Cells containing the first crossing of `line` into each dome.
// Throws nothing; empty optional means a dome was missed or the crossing was
// on an inactive face.
struct CellPair {
  Cell outer;
  Cell inner;
};

inline std::optional<CellPair> projectile_to_cell_pair(Eigen::Vector3d line_a,
                                                       Eigen::Vector3d line_b,
                                                       const DomeGrid& grid,
                                                       const std::vector<Cell>& outer_cells,
                                                       const std::vector<Cell>& inner_cells) {
  // extend along the line so chords that stop exactly on a face still count
  const Eigen::Vector3d d0 = line_b - line_a;
  line_a -= 1e-9 * d0;
  line_b += 1e-9 * d0;
  const auto outer_entry = detail::segment_box_entry(line_a, line_b, grid.config.center,
                                                     grid.config.outer_extents);
  if (!outer_entry) return std::nullopt;
  const auto outer_face = detail::entry_face(*outer_entry);
  if (!outer_face) return std::nullopt;
  const FaceGrid* og = grid.find(DomeSide::Outer, *outer_face);
  if (!og) return std::nullopt;

  const auto inner_entry = detail::segment_box_entry(line_a, line_b, grid.config.center,
                                                     grid.config.inner_extents);
  if (!inner_entry) return std::nullopt;
  const auto inner_face = detail::entry_face(*inner_entry);
  if (!inner_face) return std::nullopt;
  const FaceGrid* ig = grid.find(DomeSide::Inner, *inner_face);
  if (!ig) return std::nullopt;

  const Eigen::Vector3d po = line_a + outer_entry->t * (line_b - line_a);
  const Eigen::Vector3d pi = line_a + inner_entry->t * (line_b - line_a);
  const auto [orow, ocol] = og->locate(po);
  const auto [irow, icol] = ig->locate(pi);
  CellPair pair;
  pair.outer = outer_cells[grid.linear_index(DomeSide::Outer, *outer_face, orow, ocol)];
  pair.inner = inner_cells[grid.linear_index(DomeSide::Inner, *inner_face, irow, icol)];
  return pair;
}

// ---------------------------------------------------------------------------
// shield blocking predicate

namespace detail {

inline bool segment_hits_rectangle(const Eigen::Vector3d& q0, const Eigen::Vector3d& q1,
                                   const Eigen::Vector3d& center, const Eigen::Vector3d& ax_u,
                                   const Eigen::Vector3d& ax_v, const Eigen::Vector3d& normal,
                                   double half_side) {
  const Eigen::Vector3d d = q1 - q0;
  const double denom = d.dot(normal);
  if (std::abs(denom) < 1e-15) return false;
  const double t = (center - q0).dot(normal) / denom;
  if (t < -1e-12 || t > 1.0 + 1e-12) return false;
  const Eigen::Vector3d p = q0 + t * d - center;
  constexpr double kEdge = 1e-9;
  return std::abs(p.dot(ax_u)) <= half_side + kEdge && std::abs(p.dot(ax_v)) <= half_side + kEdge;
}

// point on a cell square at fractional coordinates (fu, fv) in [0,1]^2
inline Eigen::Vector3d cell_point(const Cell& c, double cell_size, double fu, double fv) {
  Eigen::Vector3d p = c.center;
  p[face_u_axis(c.face)] += (fu - 0.5) * cell_size;
  p[face_v_axis(c.face)] += (fv - 0.5) * cell_size;
  return p;
}

}  // namespace detail

// True iff every sampled attack segment through the tunnel hits the shield
// rectangle. Samples are a deterministic stratified grid over (outer cell x
// inner cell): roughly n_rays segments via the midpoints of a g^4 lattice.
inline bool shield_blocks_tunnel(const ShieldGoalPose& pose, const Tunnel& tunnel,
                                 const DomeConfig& config, int n_rays) {
  if (n_rays < 1) throw ConfigError("shield_blocks_tunnel: n_rays must be >= 1");
  const int g = std::max(1, static_cast<int>(std::llround(std::pow(double(n_rays), 0.25))));
  const Eigen::Matrix3d R = pose.orientation.toRotationMatrix();
  const Eigen::Vector3d ax_u = R.col(0), ax_v = R.col(1), normal = R.col(2);
  const double half = 0.5 * config.shield_side;
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      const Eigen::Vector3d q0 =
          detail::cell_point(tunnel.outer_cell, config.cell_size, (i + 0.5) / g, (j + 0.5) / g);
      for (int k = 0; k < g; ++k) {
        for (int l = 0; l < g; ++l) {
          const Eigen::Vector3d q1 =
              detail::cell_point(tunnel.inner_cell, config.cell_size, (k + 0.5) / g, (l + 0.5) / g);
          if (!detail::segment_hits_rectangle(q0, q1, pose.position, ax_u, ax_v, normal, half)) {
            return false;
          }
        }
      }
    }
  }
  return true;
}

}  // namespace ctmp
