#pragma once

#include <cmath>
#include <optional>

#include "ctmp/ballistics.hpp"
#include "ctmp/common.hpp"
#include "ctmp/database.hpp"
#include "ctmp/geometry.hpp"
#include "ctmp/kinematics.hpp"

namespace ctmp {

enum class LookupStatus { Ok, Miss, NoSolution };

inline const char* to_string(LookupStatus s) {
  switch (s) {
    case LookupStatus::Ok: return "Ok";
    case LookupStatus::Miss: return "Miss";
    case LookupStatus::NoSolution: return "NoSolution";
  }
  return "?";
}

struct QueryResult {
  LookupStatus status = LookupStatus::Miss;
  int tunnel_id = -1;
  const DbEntry* entry = nullptr;        // Covered entry on Ok
  double time_of_flight = 0.0;           // launch to inner crossing (s)
  double crossing_time_s = 0.0;          // dome-crossing computation
  double table_time_s = 0.0;             // cell mapping + table access
  double lookup_time_s = 0.0;            // total
};

// Maps a projectile estimate to its tunnel and fetches the precomputed
// trajectory: two box intersections, grid arithmetic, and one array access.
// No loop over tunnels anywhere on this path.
inline QueryResult lookup(const ProjectileState& theta, const TrajectoryDatabase& db,
                          const DomeGrid& grid, const Clock& clock = Clock::steady()) {
  QueryResult out;
  const uint64_t t0 = clock.now_ns();
  const auto crossing = dome_crossing(theta, grid);
  const uint64_t t1 = clock.now_ns();
  out.crossing_time_s = static_cast<double>(t1 - t0) * 1e-9;
  if (!crossing) {
    out.status = LookupStatus::Miss;
    out.lookup_time_s = out.crossing_time_s;
    return out;
  }
  out.time_of_flight = crossing->t_inner;

  // grid arithmetic on the two crossing points, then one table access
  LookupStatus status = LookupStatus::Miss;
  const FaceGrid* og = grid.find(DomeSide::Outer, crossing->outer_face);
  const FaceGrid* ig = grid.find(DomeSide::Inner, crossing->inner_face);
  if (og && ig) {
    const auto [orow, ocol] = og->locate(crossing->p_outer);
    const auto [irow, icol] = ig->locate(crossing->p_inner);
    const int outer_lin = og->offset + orow * og->nu + ocol;
    const int inner_lin = ig->offset + irow * ig->nu + icol;
    out.tunnel_id = grid.tunnel_id(outer_lin, inner_lin);
    const DbEntry& e = db.entries[out.tunnel_id];
    if (e.status == EntryStatus::Covered) {
      out.entry = &e;
      status = LookupStatus::Ok;
    } else {
      status = LookupStatus::NoSolution;
    }
  }
  const uint64_t t2 = clock.now_ns();
  out.table_time_s = static_cast<double>(t2 - t1) * 1e-9;
  out.lookup_time_s = static_cast<double>(t2 - t0) * 1e-9;
  out.status = status;
  return out;
}

// Mid-execution goal switch: snap the elapsed fraction to the nearest
// precomputed state index and fetch the stored transition.
inline std::optional<BSplineTrajectory> replan_switch(int current_tunnel, double elapsed_fraction,
                                                      int new_tunnel, const ReplanTensor& tensor) {
  if (tensor.K < 1 || current_tunnel < 0 || new_tunnel < 0 ||
      current_tunnel >= tensor.n_tunnels || new_tunnel >= tensor.n_tunnels) {
    return std::nullopt;
  }
  elapsed_fraction = std::clamp(elapsed_fraction, 0.0, 1.0);
  const int k = tensor.K == 1
                    ? 0
                    : static_cast<int>(std::llround(elapsed_fraction * (tensor.K - 1)));
  const ReplanEntry& e = tensor.at(current_tunnel, k, new_tunnel);
  if (!e.feasible || e.traj_id < 0) return std::nullopt;
  return tensor.pool[e.traj_id];
}

struct InterceptionParams {
  int blocking_rays = 1000;
  double success_slack = 1.0;   // multiplier on the time-of-flight deadline
  double overhead_s = 0.0;      // fixed perception/system overhead deduction
};

struct InterceptionOutcome {
  bool found_solution = false;
  bool blocked = false;    // geometric check at the trajectory end pose
  bool success = false;
  double query_time = 0.0;
  double execution_time = 0.0;
  double time_of_flight = 0.0;
  int tunnel_id = -1;
};

// One full online episode: lookup, deadline check, and the geometric
// blocking cross-check at the retrieved trajectory's end pose.
inline InterceptionOutcome simulate_interception(const ProjectileState& theta,
                                                 const TrajectoryDatabase& db,
                                                 const DomeGrid& grid,
                                                 const ManipulatorModel& model,
                                                 const InterceptionParams& params,
                                                 const Clock& clock = Clock::steady()) {
  InterceptionOutcome out;
  const QueryResult q = lookup(theta, db, grid, clock);
  out.query_time = q.lookup_time_s;
  out.time_of_flight = q.time_of_flight;
  out.tunnel_id = q.tunnel_id;
  if (q.status != LookupStatus::Ok) return out;
  out.found_solution = true;
  out.execution_time = q.entry->tf;

  const Tunnel tunnel = grid.tunnel_from_id(q.tunnel_id);
  const FkResult fk = forward_kinematics(model, q.entry->trajectory->end());
  ShieldGoalPose pose;
  pose.position = fk.ee.translation();
  pose.orientation = Eigen::Quaterniond(fk.ee.linear());
  out.blocked = shield_blocks_tunnel(pose, tunnel, grid.config, params.blocking_rays);

  const double budget = out.time_of_flight * params.success_slack - params.overhead_s;
  out.success = out.blocked && (out.query_time + out.execution_time < budget);
  return out;
}

}  // namespace ctmp
