#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctmp/ballistics.hpp"
#include "ctmp/baseline.hpp"
#include "ctmp/common.hpp"
#include "ctmp/database.hpp"
#include "ctmp/errors.hpp"
#include "ctmp/geometry.hpp"
#include "ctmp/insat.hpp"
#include "ctmp/kinematics.hpp"
#include "ctmp/trajopt.hpp"

namespace ctmp {

struct BenchmarkParams {
  int n = 400;
  double success_slack = 1.0;
  int blocking_rays = 1000;
  double overhead_ms = 0.0;
};

struct PathsConfig {
  std::string database = "ctmp.db";
  std::string report = "report.txt";
};

struct HarnessConfig {
  DomeConfig dome;
  ManipulatorModel arm = ManipulatorModel::default_arm();
  std::vector<Obstacle> obstacles;
  TrajOptParams trajopt;
  InsatParams insat;
  RrtParams rrt;
  ProjectileSampleSpec projectiles;
  DatabaseParams database;
  BenchmarkParams benchmark;
  PathsConfig paths;

  uint64_t fingerprint() const;
  nlohmann::json to_json() const;
  static HarnessConfig from_json(const nlohmann::json& j);
  static HarnessConfig load_file(const std::string& path);
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in config section '" + where + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

inline Eigen::Vector3d vec3(const json& j, const std::string& key) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError("'" + key + "' must be a 3-vector");
  return Eigen::Vector3d(v[0], v[1], v[2]);
}

inline Eigen::Vector3d vec3_or(const json& j, const std::string& key,
                               const Eigen::Vector3d& fallback) {
  return j.contains(key) ? vec3(j, key) : fallback;
}

inline json to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

inline nlohmann::json HarnessConfig::to_json() const {
  using detail::to_json;
  nlohmann::json j;
  j["dome"] = {
      {"center", to_json(dome.center)},
      {"inner_extents", to_json(dome.inner_extents)},
      {"outer_extents", to_json(dome.outer_extents)},
      {"cell_size", dome.cell_size},
      {"shield_side", dome.shield_side},
      {"pose_tolerance", dome.pose_tolerance},
      {"goal_margin", dome.goal_margin},
  };
  nlohmann::json faces = nlohmann::json::array();
  for (Face f : dome.active_faces) faces.push_back(face_name(f));
  j["dome"]["active_faces"] = faces;

  nlohmann::json joints = nlohmann::json::array();
  for (const auto& jt : arm.joints) {
    joints.push_back({
        {"axis", to_json(jt.axis)},
        {"origin", to_json(jt.origin.translation())},
        {"limits", {jt.limit_lo, jt.limit_hi}},
        {"vmax", jt.vmax},
        {"capsule",
         {{"a", to_json(jt.cap_a)}, {"b", to_json(jt.cap_b)}, {"radius", jt.cap_radius}}},
    });
  }
  j["arm"] = {
      {"joints", joints},
      {"tool", to_json(arm.tool.translation())},
      {"home", detail::to_std(arm.home)},
  };

  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : obstacles) {
    if (o.shape == Obstacle::Shape::Cylinder) {
      obs.push_back({{"type", "cylinder"},
                     {"base", to_json(o.base)},
                     {"axis", to_json(o.axis)},
                     {"radius", o.radius},
                     {"height", o.height}});
    } else {
      obs.push_back({{"type", "box"},
                     {"center", to_json(o.center)},
                     {"half_extents", to_json(o.half_extents)}});
    }
  }
  j["obstacles"] = obs;

  j["trajopt"] = {
      {"num_ctrl", trajopt.num_ctrl},
      {"n_check", trajopt.n_check},
      {"w1", trajopt.w1},
      {"w2", trajopt.w2},
      {"t_min", trajopt.t_min},
      {"t_max", trajopt.t_max},
      {"collision_margin", trajopt.collision_margin},
      {"penalty_init", trajopt.penalty_init},
      {"penalty_growth", trajopt.penalty_growth},
      {"penalty_rounds", trajopt.penalty_rounds},
      {"max_inner_iters", trajopt.max_inner_iters},
      {"step_tol", trajopt.step_tol},
      {"quad_nodes", trajopt.quad_nodes},
  };
  j["insat"] = {
      {"resolution_deg", insat.resolution * 180.0 / M_PI},
      {"weight", insat.weight},
      {"first_valid_ancestor", insat.first_valid_ancestor},
      {"timeout_s", insat.timeout_s},
      {"max_expansions", insat.max_expansions},
      {"ik_max_iters", insat.ik.max_iters},
      {"ik_damping", insat.ik.damping},
      {"ik_restarts", insat.ik.restarts},
      {"ik_pos_tol", insat.ik.pos_tol},
      {"ik_ang_tol_deg", insat.ik.ang_tol * 180.0 / M_PI},
      {"ik_align_axis_only", insat.ik.align_axis_only},
  };
  j["rrt"] = {
      {"step", rrt.step},
      {"goal_bias", rrt.goal_bias},
      {"budget_s", rrt.budget_s},
      {"check_resolution", rrt.check_resolution},
      {"max_iterations", rrt.max_iterations},
  };
  j["projectiles"] = {
      {"distance_range", {projectiles.distance_min, projectiles.distance_max}},
      {"speed_range", {projectiles.speed_min, projectiles.speed_max}},
      {"launch_height", projectiles.launch_height},
      {"azimuth_range_deg", projectiles.azimuth_range * 180.0 / M_PI},
  };
  j["database"] = {
      {"poses_per_tunnel", database.poses_per_tunnel},
      {"replan_K", database.replan_K},
      {"replan_depth", database.replan_depth},
      {"tunnel_budget_s", database.tunnel_budget_s},
      {"store_tensor_trajectories", database.store_tensor_trajectories},
      {"tensor_planner_fallback", database.tensor_planner_fallback},
      {"skip_planning", database.skip_planning},
  };
  j["benchmark"] = {
      {"n", benchmark.n},
      {"success_slack", benchmark.success_slack},
      {"blocking_rays", benchmark.blocking_rays},
      {"overhead_ms", benchmark.overhead_ms},
  };
  j["paths"] = {
      {"database", paths.database},
      {"report", paths.report},
  };
  return j;
}

inline HarnessConfig HarnessConfig::from_json(const nlohmann::json& root) {
  using detail::check_keys;
  using detail::get_or;
  using detail::vec3;
  using detail::vec3_or;
  check_keys(root,
             {"dome", "arm", "obstacles", "trajopt", "insat", "rrt", "projectiles", "database",
              "benchmark", "paths"},
             "<root>");
  HarnessConfig c;

  if (root.contains("dome")) {
    const auto& d = root.at("dome");
    check_keys(d,
               {"center", "inner_extents", "outer_extents", "active_faces", "cell_size",
                "shield_side", "pose_tolerance", "goal_margin"},
               "dome");
    c.dome.center = vec3_or(d, "center", c.dome.center);
    c.dome.inner_extents = vec3_or(d, "inner_extents", c.dome.inner_extents);
    c.dome.outer_extents = vec3_or(d, "outer_extents", c.dome.outer_extents);
    c.dome.cell_size = get_or(d, "cell_size", c.dome.cell_size);
    c.dome.shield_side = get_or(d, "shield_side", c.dome.shield_side);
    c.dome.pose_tolerance = get_or(d, "pose_tolerance", c.dome.pose_tolerance);
    c.dome.goal_margin = get_or(d, "goal_margin", c.dome.goal_margin);
    if (d.contains("active_faces")) {
      c.dome.active_faces.clear();
      for (const auto& f : d.at("active_faces")) {
        c.dome.active_faces.insert(face_from_name(f.get<std::string>()));
      }
    }
  }
  c.dome.validate();

  if (root.contains("arm")) {
    const auto& a = root.at("arm");
    check_keys(a, {"joints", "tool", "home"}, "arm");
    if (a.contains("joints")) {
      c.arm.joints.clear();
      for (const auto& jj : a.at("joints")) {
        check_keys(jj, {"axis", "origin", "limits", "vmax", "capsule"}, "arm.joints[]");
        Joint jt;
        jt.axis = vec3(jj, "axis").normalized();
        jt.origin = Eigen::Isometry3d(Eigen::Translation3d(vec3(jj, "origin")));
        const auto lim = jj.at("limits").get<std::vector<double>>();
        if (lim.size() != 2) throw ConfigError("joint limits must be [lo, hi]");
        jt.limit_lo = lim[0];
        jt.limit_hi = lim[1];
        jt.vmax = get_or(jj, "vmax", jt.vmax);
        if (jj.contains("capsule")) {
          const auto& cap = jj.at("capsule");
          check_keys(cap, {"a", "b", "radius"}, "arm.joints[].capsule");
          jt.cap_a = vec3(cap, "a");
          jt.cap_b = vec3(cap, "b");
          jt.cap_radius = get_or(cap, "radius", jt.cap_radius);
        }
        c.arm.joints.push_back(jt);
      }
    }
    if (a.contains("tool")) c.arm.tool = Eigen::Isometry3d(Eigen::Translation3d(vec3(a, "tool")));
    if (a.contains("home")) {
      const auto h = a.at("home").get<std::vector<double>>();
      c.arm.home = Eigen::Map<const Eigen::VectorXd>(h.data(), h.size());
    }
  }
  c.arm.validate();

  if (root.contains("obstacles")) {
    for (const auto& o : root.at("obstacles")) {
      const std::string type = o.at("type").get<std::string>();
      if (type == "cylinder") {
        check_keys(o, {"type", "base", "axis", "radius", "height"}, "obstacles[]");
        c.obstacles.push_back(Obstacle::cylinder(vec3(o, "base"), vec3(o, "axis"),
                                                 o.at("radius").get<double>(),
                                                 o.at("height").get<double>()));
      } else if (type == "box") {
        check_keys(o, {"type", "center", "half_extents"}, "obstacles[]");
        c.obstacles.push_back(Obstacle::box(vec3(o, "center"), vec3(o, "half_extents")));
      } else {
        throw ConfigError("unknown obstacle type '" + type + "'");
      }
    }
  }

  if (root.contains("trajopt")) {
    const auto& t = root.at("trajopt");
    check_keys(t,
               {"num_ctrl", "n_check", "w1", "w2", "t_min", "t_max", "collision_margin",
                "penalty_init", "penalty_growth", "penalty_rounds", "max_inner_iters", "step_tol",
                "quad_nodes"},
               "trajopt");
    c.trajopt.num_ctrl = get_or(t, "num_ctrl", c.trajopt.num_ctrl);
    c.trajopt.n_check = get_or(t, "n_check", c.trajopt.n_check);
    c.trajopt.w1 = get_or(t, "w1", c.trajopt.w1);
    c.trajopt.w2 = get_or(t, "w2", c.trajopt.w2);
    c.trajopt.t_min = get_or(t, "t_min", c.trajopt.t_min);
    c.trajopt.t_max = get_or(t, "t_max", c.trajopt.t_max);
    c.trajopt.collision_margin = get_or(t, "collision_margin", c.trajopt.collision_margin);
    c.trajopt.penalty_init = get_or(t, "penalty_init", c.trajopt.penalty_init);
    c.trajopt.penalty_growth = get_or(t, "penalty_growth", c.trajopt.penalty_growth);
    c.trajopt.penalty_rounds = get_or(t, "penalty_rounds", c.trajopt.penalty_rounds);
    c.trajopt.max_inner_iters = get_or(t, "max_inner_iters", c.trajopt.max_inner_iters);
    c.trajopt.step_tol = get_or(t, "step_tol", c.trajopt.step_tol);
    c.trajopt.quad_nodes = get_or(t, "quad_nodes", c.trajopt.quad_nodes);
  }
  c.trajopt.validate();

  if (root.contains("insat")) {
    const auto& i = root.at("insat");
    check_keys(i,
               {"resolution_deg", "weight", "first_valid_ancestor", "timeout_s", "max_expansions",
                "ik_max_iters", "ik_damping", "ik_restarts", "ik_pos_tol", "ik_ang_tol_deg",
                "ik_align_axis_only"},
               "insat");
    c.insat.resolution = get_or(i, "resolution_deg", 7.5) * M_PI / 180.0;
    c.insat.weight = get_or(i, "weight", c.insat.weight);
    c.insat.first_valid_ancestor = get_or(i, "first_valid_ancestor", c.insat.first_valid_ancestor);
    c.insat.timeout_s = get_or(i, "timeout_s", c.insat.timeout_s);
    c.insat.max_expansions = get_or(i, "max_expansions", c.insat.max_expansions);
    c.insat.ik.max_iters = get_or(i, "ik_max_iters", c.insat.ik.max_iters);
    c.insat.ik.damping = get_or(i, "ik_damping", c.insat.ik.damping);
    c.insat.ik.restarts = get_or(i, "ik_restarts", c.insat.ik.restarts);
    c.insat.ik.pos_tol = get_or(i, "ik_pos_tol", c.insat.ik.pos_tol);
    c.insat.ik.ang_tol = get_or(i, "ik_ang_tol_deg", c.insat.ik.ang_tol * 180.0 / M_PI) * M_PI / 180.0;
    c.insat.ik.align_axis_only = get_or(i, "ik_align_axis_only", c.insat.ik.align_axis_only);
  }
  c.insat.opt = c.trajopt;

  if (root.contains("rrt")) {
    const auto& r = root.at("rrt");
    check_keys(r, {"step", "goal_bias", "budget_s", "check_resolution", "max_iterations"}, "rrt");
    c.rrt.step = get_or(r, "step", c.rrt.step);
    c.rrt.goal_bias = get_or(r, "goal_bias", c.rrt.goal_bias);
    c.rrt.budget_s = get_or(r, "budget_s", c.rrt.budget_s);
    c.rrt.check_resolution = get_or(r, "check_resolution", c.rrt.check_resolution);
    c.rrt.max_iterations = get_or(r, "max_iterations", c.rrt.max_iterations);
    c.rrt.validate();
  }

  if (root.contains("projectiles")) {
    const auto& p = root.at("projectiles");
    check_keys(p, {"distance_range", "speed_range", "launch_height", "azimuth_range_deg"},
               "projectiles");
    if (p.contains("distance_range")) {
      const auto r = p.at("distance_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("distance_range must be [min, max]");
      c.projectiles.distance_min = r[0];
      c.projectiles.distance_max = r[1];
    }
    if (p.contains("speed_range")) {
      const auto r = p.at("speed_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("speed_range must be [min, max]");
      c.projectiles.speed_min = r[0];
      c.projectiles.speed_max = r[1];
    }
    c.projectiles.launch_height = get_or(p, "launch_height", c.projectiles.launch_height);
    c.projectiles.azimuth_range =
        get_or(p, "azimuth_range_deg", c.projectiles.azimuth_range * 180.0 / M_PI) * M_PI / 180.0;
    c.projectiles.validate();
  }

  if (root.contains("database")) {
    const auto& d = root.at("database");
    check_keys(d,
               {"poses_per_tunnel", "replan_K", "replan_depth", "tunnel_budget_s",
                "store_tensor_trajectories", "tensor_planner_fallback", "skip_planning"},
               "database");
    c.database.poses_per_tunnel = get_or(d, "poses_per_tunnel", c.database.poses_per_tunnel);
    c.database.replan_K = get_or(d, "replan_K", c.database.replan_K);
    c.database.replan_depth = get_or(d, "replan_depth", c.database.replan_depth);
    c.database.tunnel_budget_s = get_or(d, "tunnel_budget_s", c.database.tunnel_budget_s);
    c.database.store_tensor_trajectories =
        get_or(d, "store_tensor_trajectories", c.database.store_tensor_trajectories);
    c.database.tensor_planner_fallback =
        get_or(d, "tensor_planner_fallback", c.database.tensor_planner_fallback);
    c.database.skip_planning = get_or(d, "skip_planning", c.database.skip_planning);
    c.database.validate();
  }

  if (root.contains("benchmark")) {
    const auto& b = root.at("benchmark");
    check_keys(b, {"n", "success_slack", "blocking_rays", "overhead_ms"}, "benchmark");
    c.benchmark.n = get_or(b, "n", c.benchmark.n);
    c.benchmark.success_slack = get_or(b, "success_slack", c.benchmark.success_slack);
    c.benchmark.blocking_rays = get_or(b, "blocking_rays", c.benchmark.blocking_rays);
    c.benchmark.overhead_ms = get_or(b, "overhead_ms", c.benchmark.overhead_ms);
  }

  if (root.contains("paths")) {
    const auto& p = root.at("paths");
    check_keys(p, {"database", "report"}, "paths");
    c.paths.database = get_or<std::string>(p, "database", c.paths.database);
    c.paths.report = get_or<std::string>(p, "report", c.paths.report);
  }
  return c;
}

inline HarnessConfig HarnessConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

// Hash of everything that shapes the database: dome, arm, obstacles, and the
// planner/solver parameters. Benchmark knobs and paths do not invalidate a
// stored database.
inline uint64_t HarnessConfig::fingerprint() const {
  nlohmann::json j = to_json();
  j.erase("benchmark");
  j.erase("paths");
  j.erase("rrt");
  j.erase("projectiles");
  return fnv1a(j.dump());
}

}  // namespace ctmp
