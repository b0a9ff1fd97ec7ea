#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

#include "ctmp/common.hpp"
#include "ctmp/errors.hpp"
#include "ctmp/kinematics.hpp"

namespace ctmp {

struct RrtParams {
  double step = 0.2;              // rad, extension step
  double goal_bias = 0.1;         // probability of sampling the goal
  double budget_s = 2.0;          // wall-clock planning budget
  double check_resolution = 0.05; // rad, edge collision-check spacing
  uint64_t seed = 0;
  int max_iterations = 1 << 20;

  void validate() const {
    if (step <= 0.0) throw ConfigError("rrt: step must be positive");
    if (goal_bias < 0.0 || goal_bias > 1.0) throw ConfigError("rrt: goal_bias must be in [0,1]");
    if (check_resolution <= 0.0) throw ConfigError("rrt: check_resolution must be positive");
  }
};

namespace detail {

struct Tree {
  std::vector<Eigen::VectorXd> q;
  std::vector<int> parent;

  void init(const Eigen::VectorXd& root) {
    q.assign(1, root);
    parent.assign(1, -1);
  }

  int nearest(const Eigen::VectorXd& target) const {
    int best = 0;
    double best_d = (q[0] - target).squaredNorm();
    for (int i = 1; i < static_cast<int>(q.size()); ++i) {
      const double d = (q[i] - target).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  std::vector<Eigen::VectorXd> path_from_root(int leaf) const {
    std::vector<Eigen::VectorXd> out;
    for (int i = leaf; i >= 0; i = parent[i]) out.push_back(q[i]);
    std::reverse(out.begin(), out.end());
    return out;
  }
};

inline bool edge_free(const ManipulatorModel& model, const Eigen::VectorXd& a,
                      const Eigen::VectorXd& b, const std::vector<Obstacle>& obstacles,
                      double resolution) {
  const double dist = (b - a).cwiseAbs().maxCoeff();
  const int steps = std::max(1, static_cast<int>(std::ceil(dist / resolution)));
  for (int i = 1; i <= steps; ++i) {
    const Eigen::VectorXd q = a + (b - a) * (static_cast<double>(i) / steps);
    if (in_collision(model, q, obstacles)) return false;
  }
  return true;
}

enum class ExtendResult { Trapped, Advanced, Reached };

inline ExtendResult extend(Tree& tree, const Eigen::VectorXd& target,
                           const ManipulatorModel& model, const std::vector<Obstacle>& obstacles,
                           const RrtParams& params, int& new_index) {
  const int near = tree.nearest(target);
  const Eigen::VectorXd& q_near = tree.q[near];
  const double d = (target - q_near).norm();
  const bool reaching = d <= params.step;
  const Eigen::VectorXd q_new =
      reaching ? target : (q_near + (target - q_near) * (params.step / d)).eval();
  if (!model.within_limits(q_new)) return ExtendResult::Trapped;
  if (!edge_free(model, q_near, q_new, obstacles, params.check_resolution)) {
    return ExtendResult::Trapped;
  }
  tree.q.push_back(q_new);
  tree.parent.push_back(near);
  new_index = static_cast<int>(tree.q.size()) - 1;
  return reaching ? ExtendResult::Reached : ExtendResult::Advanced;
}

inline ExtendResult connect(Tree& tree, const Eigen::VectorXd& target,
                            const ManipulatorModel& model, const std::vector<Obstacle>& obstacles,
                            const RrtParams& params, int& last_index) {
  ExtendResult r = ExtendResult::Advanced;
  while (r == ExtendResult::Advanced) {
    r = extend(tree, target, model, obstacles, params, last_index);
  }
  return r;
}

}  // namespace detail

// Bidirectional RRT-Connect in joint space. Returns the waypoint path from
// start to goal, or nullopt when the budget or iteration cap is exhausted.
inline std::optional<std::vector<Eigen::VectorXd>> rrt_connect(
    const ManipulatorModel& model, const Eigen::VectorXd& start, const Eigen::VectorXd& goal,
    const std::vector<Obstacle>& obstacles, const RrtParams& params,
    const Clock& clock = Clock::steady()) {
  params.validate();
  if (!model.within_limits(start) || !model.within_limits(goal) ||
      in_collision(model, start, obstacles) || in_collision(model, goal, obstacles)) {
    throw InfeasibleBoundary("rrt_connect: start or goal configuration invalid");
  }
  if ((start - goal).norm() < 1e-12) return std::vector<Eigen::VectorXd>{start};

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::VectorXd lo = model.lower_limits(), hi = model.upper_limits();

  detail::Tree ta, tb;
  ta.init(start);
  tb.init(goal);
  bool a_is_start = true;
  const uint64_t t0 = clock.now_ns();

  for (int it = 0; it < params.max_iterations; ++it) {
    if (clock.seconds_since(t0) > params.budget_s) return std::nullopt;
    Eigen::VectorXd q_rand(model.dof());
    if (unit(rng) < params.goal_bias) {
      q_rand = a_is_start ? goal : start;
    } else {
      for (int j = 0; j < model.dof(); ++j) q_rand[j] = lo[j] + (hi[j] - lo[j]) * unit(rng);
    }
    int ia = -1;
    if (detail::extend(ta, q_rand, model, obstacles, params, ia) != detail::ExtendResult::Trapped) {
      int ib = -1;
      if (detail::connect(tb, ta.q[ia], model, obstacles, params, ib) ==
          detail::ExtendResult::Reached) {
        auto pa = ta.path_from_root(ia);
        auto pb = tb.path_from_root(ib);
        std::vector<Eigen::VectorXd> path;
        if (a_is_start) {
          path = std::move(pa);
          path.insert(path.end(), pb.rbegin(), pb.rend());
        } else {
          path = std::move(pb);
          path.insert(path.end(), pa.rbegin(), pa.rend());
        }
        // the junction configuration appears once per tree
        for (size_t i = 1; i < path.size();) {
          if ((path[i] - path[i - 1]).norm() < 1e-12) path.erase(path.begin() + i);
          else ++i;
        }
        return path;
      }
    }
    std::swap(ta, tb);
    a_is_start = !a_is_start;
  }
  return std::nullopt;
}

// Rectangular velocity profile: each segment takes as long as its slowest
// joint needs at full speed.
struct TimedPath {
  double duration = 0.0;
  std::vector<double> times;               // per waypoint, cumulative
  std::vector<Eigen::VectorXd> waypoints;
};

inline TimedPath time_parameterize(const std::vector<Eigen::VectorXd>& path,
                                   const Eigen::VectorXd& velocity_limits) {
  if (path.empty()) throw ConfigError("time_parameterize: empty path");
  TimedPath out;
  out.waypoints = path;
  out.times.resize(path.size(), 0.0);
  for (size_t i = 1; i < path.size(); ++i) {
    double seg = 0.0;
    for (int j = 0; j < velocity_limits.size(); ++j) {
      seg = std::max(seg, std::abs(path[i][j] - path[i - 1][j]) / velocity_limits[j]);
    }
    out.times[i] = out.times[i - 1] + seg;
  }
  out.duration = out.times.back();
  return out;
}

}  // namespace ctmp
