#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <tuple>
#include <vector>

#include "ctmp/common.hpp"
#include "ctmp/geometry.hpp"
#include "ctmp/kinematics.hpp"
#include "ctmp/trajopt.hpp"

namespace ctmp {

struct InsatParams {
  double resolution = 7.5 * M_PI / 180.0;  // lattice step per joint
  double weight = 3.0;                     // weighted A* inflation
  bool first_valid_ancestor = false;       // stop the ancestor loop at the first improvement
  double timeout_s = 10.0;
  int max_expansions = 1 << 20;
  IkParams ik = goal_ik_defaults();
  uint64_t seed = 0;
  TrajOptParams opt;

  // shield goals constrain the plate normal, not the spin about it
  static IkParams goal_ik_defaults() {
    IkParams p;
    p.align_axis_only = true;
    return p;
  }
};

// Lattice state: integer steps per joint away from the start configuration.
struct LowDState {
  std::vector<int> coords;
  Eigen::VectorXd q;
};

struct SearchNode {
  LowDState state;
  double cost = std::numeric_limits<double>::infinity();  // c(x), cost of full_traj
  int parent = -1;                                        // node index
  std::optional<BSplineTrajectory> full_traj;             // start -> state
  double heuristic = 0.0;
  bool closed = false;
};

enum class PlanStatus { Success, NoIkSolution, SearchExhausted, Timeout };

inline const char* to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::Success: return "Success";
    case PlanStatus::NoIkSolution: return "NoIkSolution";
    case PlanStatus::SearchExhausted: return "SearchExhausted";
    case PlanStatus::Timeout: return "Timeout";
  }
  return "?";
}

struct PlanResult {
  PlanStatus status = PlanStatus::SearchExhausted;
  BSplineTrajectory trajectory;
  double cost = std::numeric_limits<double>::infinity();
  int goal_index = -1;  // which goal pose the plan reached
  int expansions = 0;
  std::vector<double> popped_f;  // expansion order audit
};

class InsatPlanner {
 public:
  InsatPlanner(const ManipulatorModel& model, std::vector<Obstacle> obstacles, InsatParams params)
      : model_(model), obstacles_(std::move(obstacles)), params_(std::move(params)) {
    // crude end-effector speed bound: sum of link lengths times joint speed
    double speed = 0.0;
    for (const auto& j : model_.joints) {
      const double len = std::max(j.origin.translation().norm(),
                                  (j.cap_b - j.cap_a).norm());
      speed += len * j.vmax;
    }
    ee_speed_ = std::max(speed, 1e-6);
  }

  // Alg.: pick node, expand lattice successors, and for every successor try
  // trajectory optimization through each ancestor, keeping the cheapest valid
  // full trajectory from the start.
  PlanResult plan(const Eigen::VectorXd& start_q, const std::vector<ShieldGoalPose>& goals) {
    return plan(start_q, Eigen::VectorXd::Zero(start_q.size()), goals);
  }

  PlanResult plan(const Eigen::VectorXd& start_q, const Eigen::VectorXd& start_qdot,
                  const std::vector<ShieldGoalPose>& goals) {
    PlanResult res;
    if (!model_.within_limits(start_q) || in_collision(model_, start_q, obstacles_)) {
      throw InfeasibleBoundary("insat: start configuration invalid");
    }
    start_q_ = start_q;
    start_qdot_ = start_qdot;
    nodes.clear();
    index_.clear();
    reparent_log.clear();
    open_ = {};
    tie_ = 0;

    // IK each goal pose; planner goals are exact configurations
    goal_configs_.clear();
    goal_coords_.clear();
    goal_positions_.clear();
    goal_pose_index_.clear();
    for (size_t gi = 0; gi < goals.size(); ++gi) {
      IkParams ik = params_.ik;
      ik.seed = derive_seed(params_.seed, 1000 + gi);
      const auto q = inverse_kinematics(model_, goals[gi].pose(), start_q, ik);
      if (!q) continue;
      goal_configs_.push_back(*q);
      goal_coords_.push_back(to_coords(*q));
      goal_positions_.push_back(goals[gi].position);
      goal_pose_index_.push_back(static_cast<int>(gi));
    }
    if (goal_configs_.empty()) {
      res.status = PlanStatus::NoIkSolution;
      return res;
    }

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    // start node
    {
      SearchNode start;
      start.state.coords.assign(model_.dof(), 0);
      start.state.q = start_q_;
      start.cost = 0.0;
      start.heuristic = heuristic(start_q_);
      nodes.push_back(start);
      index_[start.state.coords] = 0;
      push_open(0);
    }

    while (!open_.empty()) {
      const auto [f, tie, idx] = open_.top();
      open_.pop();
      SearchNode& node = nodes[idx];
      if (node.closed) continue;
      if (f > node.cost + params_.weight * node.heuristic + 1e-9) continue;  // stale entry
      node.closed = true;
      ++res.expansions;
      res.popped_f.push_back(f);

      if (res.expansions > params_.max_expansions || elapsed() > params_.timeout_s) {
        res.status = PlanStatus::Timeout;
        return res;
      }

      // goal condition: within one lattice cell of a goal configuration and a
      // final optimization to the exact IK solution validates
      for (size_t g = 0; g < goal_configs_.size(); ++g) {
        if (!within_one_cell(node.state.coords, goal_coords_[g])) continue;
        if (auto full = connect(idx, goal_configs_[g])) {
          res.status = PlanStatus::Success;
          res.trajectory = std::move(full->first);
          res.cost = full->second;
          res.goal_index = goal_pose_index_[g];
          return res;
        }
      }

      expand(idx);
    }
    res.status = PlanStatus::SearchExhausted;
    return res;
  }

  // 2*dof unit lattice steps, filtered by joint limits and state collision.
  std::vector<LowDState> successors(const LowDState& s) const {
    std::vector<LowDState> out;
    for (int j = 0; j < model_.dof(); ++j) {
      for (int dir : {+1, -1}) {
        LowDState n;
        n.coords = s.coords;
        n.coords[j] += dir;
        n.q = to_q(n.coords);
        if (!model_.within_limits(n.q)) continue;
        if (in_collision(model_, n.q, obstacles_)) continue;
        out.push_back(std::move(n));
      }
    }
    return out;
  }

  // Parent chain from the node's immediate parent back to (and including) the
  // start state.
  std::vector<LowDState> ancestors(int node_index) const {
    std::vector<LowDState> chain;
    for (int p = nodes[node_index].parent; p >= 0; p = nodes[p].parent) {
      chain.push_back(nodes[p].state);
    }
    return chain;
  }

  Eigen::VectorXd to_q(const std::vector<int>& coords) const {
    Eigen::VectorXd q = start_q_;
    for (int j = 0; j < model_.dof(); ++j) q[j] += coords[j] * params_.resolution;
    return q;
  }

  std::vector<int> to_coords(const Eigen::VectorXd& q) const {
    std::vector<int> c(model_.dof());
    for (int j = 0; j < model_.dof(); ++j) {
      c[j] = static_cast<int>(std::llround((q[j] - start_q_[j]) / params_.resolution));
    }
    return c;
  }

  std::vector<SearchNode> nodes;  // exposed for inspection in tests
  std::vector<std::pair<int, double>> reparent_log;  // (node, new cost) per improvement

 private:
  static bool within_one_cell(const std::vector<int>& a, const std::vector<int>& b) {
    for (size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i] - b[i]) > 1) return false;
    }
    return true;
  }

  double heuristic(const Eigen::VectorXd& q) const {
    const Eigen::Vector3d p = forward_kinematics(model_, q).ee.translation();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& gp : goal_positions_) best = std::min(best, (p - gp).norm());
    return best / ee_speed_;
  }

  void push_open(int idx) {
    open_.emplace(nodes[idx].cost + params_.weight * nodes[idx].heuristic, tie_++, idx);
  }

  TrajOptProblem edge_problem(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                              bool from_start) const {
    TrajOptProblem p = TrajOptProblem::between(model_, a, b, obstacles_, params_.opt);
    if (from_start) p.xdot0 = start_qdot_;
    return p;
  }

  static double usable_cost(const TrajOptResult& r, const TrajOptParams& prm) {
    const BSplineTrajectory* t = r.usable();
    if (t == nullptr) return std::numeric_limits<double>::infinity();
    if (r.status == TrajStatus::Valid) return r.cost;
    return trajectory_cost(*t, prm.w1, prm.w2);
  }

  // Full valid trajectory from the start through `idx` to an exact target,
  // with its cost.
  std::optional<std::pair<BSplineTrajectory, double>> connect(int idx,
                                                              const Eigen::VectorXd& target) {
    const SearchNode& node = nodes[idx];
    const bool at_start = node.parent < 0 && !node.full_traj;
    try {
      TrajOptResult edge = optimize(edge_problem(node.state.q, target, at_start));
      const BSplineTrajectory* e = edge.usable();
      if (e == nullptr) return std::nullopt;
      if (at_start) return std::make_pair(*e, usable_cost(edge, params_.opt));
      TrajOptResult full = optimize_with_warm_start(
          *node.full_traj, *e, edge_problem(start_q_, target, true));
      const BSplineTrajectory* ft = full.usable();
      if (ft == nullptr) return std::nullopt;
      return std::make_pair(*ft, usable_cost(full, params_.opt));
    } catch (const InfeasibleBoundary&) {
      return std::nullopt;  // e.g. the goal configuration itself collides
    }
  }

  void expand(int idx) {
    const std::vector<LowDState> succs = successors(nodes[idx].state);
    for (const auto& s : succs) {
      int sidx;
      if (auto it = index_.find(s.coords); it != index_.end()) {
        sidx = it->second;
        if (nodes[sidx].closed) continue;
      } else {
        SearchNode n;
        n.state = s;
        n.heuristic = heuristic(s.q);
        nodes.push_back(std::move(n));
        sidx = static_cast<int>(nodes.size()) - 1;
        index_[s.coords] = sidx;
      }

      // ancestor loop, nearest first: the expanded node, then its chain
      bool improved = false;
      for (int pred = idx; pred >= 0; pred = nodes[pred].parent) {
        const bool pred_is_start = nodes[pred].parent < 0 && !nodes[pred].full_traj;
        TrajOptResult edge =
            optimize(edge_problem(nodes[pred].state.q, nodes[sidx].state.q, pred_is_start));
        const BSplineTrajectory* e = edge.usable();
        if (e == nullptr) continue;

        BSplineTrajectory full;
        double c_new;
        if (pred_is_start) {
          full = *e;
          c_new = usable_cost(edge, params_.opt);
        } else {
          TrajOptResult r = optimize_with_warm_start(
              *nodes[pred].full_traj, *e,
              edge_problem(start_q_, nodes[sidx].state.q, true));
          const BSplineTrajectory* ft = r.usable();
          if (ft == nullptr) continue;
          full = *ft;
          c_new = usable_cost(r, params_.opt);
        }

        if (c_new < nodes[sidx].cost - 1e-12) {
          nodes[sidx].cost = c_new;
          nodes[sidx].parent = pred;
          nodes[sidx].full_traj = std::move(full);
          reparent_log.emplace_back(sidx, c_new);
          improved = true;
          if (params_.first_valid_ancestor) break;
        }
      }
      if (improved) push_open(sidx);
    }
  }

  const ManipulatorModel& model_;
  std::vector<Obstacle> obstacles_;
  InsatParams params_;
  Eigen::VectorXd start_q_, start_qdot_;
  double ee_speed_ = 1.0;

  std::vector<Eigen::VectorXd> goal_configs_;
  std::vector<std::vector<int>> goal_coords_;
  std::vector<Eigen::Vector3d> goal_positions_;
  std::vector<int> goal_pose_index_;

  std::map<std::vector<int>, int> index_;
  using OpenEntry = std::tuple<double, uint64_t, int>;
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>> open_;
  uint64_t tie_ = 0;
};

inline PlanResult plan(const ManipulatorModel& model, const Eigen::VectorXd& start_q,
                       const std::vector<ShieldGoalPose>& goals,
                       const std::vector<Obstacle>& obstacles, const InsatParams& params) {
  InsatPlanner planner(model, obstacles, params);
  return planner.plan(start_q, goals);
}

}  // namespace ctmp
