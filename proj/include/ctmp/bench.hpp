#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ctmp/baseline.hpp"
#include "ctmp/config.hpp"
#include "ctmp/query.hpp"

namespace ctmp {

struct PlannerStats {
  int n = 0;
  int found = 0;
  int blocked = 0;  // found and geometrically blocking (success before the deadline test)
  int success = 0;
  std::vector<double> query_times_s;  // over found-solution episodes
  std::vector<double> exec_times_s;

  double find_rate() const { return n ? static_cast<double>(found) / n : 0.0; }
  double blocked_rate() const { return n ? static_cast<double>(blocked) / n : 0.0; }
  double success_rate() const { return n ? static_cast<double>(success) / n : 0.0; }
};

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct BenchmarkReport {
  uint64_t seed = 0;
  int n = 0;
  uint64_t fingerprint = 0;
  double success_slack = 1.0;
  double overhead_ms = 0.0;
  PlannerStats preprocessed;
  PlannerStats rrt;
  double mean_time_of_flight_s = 0.0;
  double mean_residual_budget_ms = 0.0;  // deadline minus execution, per found episode
};

// Head-to-head protocol: one projectile stream, both planners score against
// the same deadline (query + execution < time of flight). The preprocessed
// planner answers from the database; RRT-Connect plans online to the same IK
// targets under its budget.
inline BenchmarkReport run_benchmark(const HarnessConfig& cfg, const TrajectoryDatabase& db,
                                     uint64_t seed, const Clock& clock = Clock::steady()) {
  const DomeGrid grid(cfg.dome);
  if (db.fingerprint != cfg.fingerprint()) {
    throw FingerprintMismatch("benchmark: database does not match this configuration");
  }
  BenchmarkReport rep;
  rep.seed = seed;
  rep.n = cfg.benchmark.n;
  rep.fingerprint = db.fingerprint;
  rep.success_slack = cfg.benchmark.success_slack;
  rep.overhead_ms = cfg.benchmark.overhead_ms;

  ProjectileSampleSpec spec = cfg.projectiles;
  std::mt19937_64 rng(derive_seed(seed, 0xba11));
  std::vector<SampledProjectile> projectiles;
  projectiles.reserve(rep.n);
  for (int i = 0; i < rep.n; ++i) projectiles.push_back(sample_projectile(spec, grid, rng));

  InterceptionParams sim;
  sim.blocking_rays = cfg.benchmark.blocking_rays;
  sim.success_slack = cfg.benchmark.success_slack;
  sim.overhead_s = cfg.benchmark.overhead_ms * 1e-3;

  double tof_sum = 0.0;
  std::vector<double> residuals_ms;

  for (int i = 0; i < rep.n; ++i) {
    const auto& proj = projectiles[i];
    tof_sum += proj.time_of_flight;

    // preprocessed planner
    rep.preprocessed.n++;
    const InterceptionOutcome out =
        simulate_interception(proj.state, db, grid, cfg.arm, sim, clock);
    if (out.found_solution) {
      rep.preprocessed.found++;
      rep.preprocessed.query_times_s.push_back(out.query_time);
      rep.preprocessed.exec_times_s.push_back(out.execution_time);
      residuals_ms.push_back(
          (out.time_of_flight * sim.success_slack - sim.overhead_s - out.execution_time) * 1e3);
      if (out.blocked) rep.preprocessed.blocked++;
      if (out.success) rep.preprocessed.success++;
    }

    // RRT-Connect baseline: same tunnel, same IK targets, online budget
    rep.rrt.n++;
    const uint64_t t0 = clock.now_ns();
    const auto crossing = dome_crossing(proj.state, grid);
    if (!crossing) continue;
    const FaceGrid* og = grid.find(DomeSide::Outer, crossing->outer_face);
    const FaceGrid* ig = grid.find(DomeSide::Inner, crossing->inner_face);
    if (!og || !ig) continue;
    const auto [orow, ocol] = og->locate(crossing->p_outer);
    const auto [irow, icol] = ig->locate(crossing->p_inner);
    const int tunnel_id = grid.tunnel_id(og->offset + orow * og->nu + ocol,
                                         ig->offset + irow * ig->nu + icol);
    const Tunnel tunnel = grid.tunnel_from_id(tunnel_id);
    if (!tunnel.feasible) continue;

    const auto poses = sample_goal_poses(tunnel, cfg.database.poses_per_tunnel, cfg.dome);
    std::optional<std::vector<Eigen::VectorXd>> path;
    Eigen::VectorXd goal_q;
    for (int pi = 0; pi < static_cast<int>(poses.size()) && !path; ++pi) {
      const double elapsed = clock.seconds_since(t0);
      if (elapsed >= cfg.rrt.budget_s) break;
      IkParams ik = cfg.insat.ik;
      // identical IK targets to the ones the preprocessing stage used
      ik.seed = derive_seed(derive_seed(cfg.database.seed, tunnel_id, pi), 1000);
      const auto q_goal = inverse_kinematics(cfg.arm, poses[pi].pose(), cfg.arm.home, ik);
      if (!q_goal) continue;
      RrtParams rp = cfg.rrt;
      rp.seed = derive_seed(seed, 0x8877, static_cast<uint64_t>(i));
      rp.budget_s = cfg.rrt.budget_s - clock.seconds_since(t0);
      try {
        path = rrt_connect(cfg.arm, cfg.arm.home, *q_goal, cfg.obstacles, rp, clock);
      } catch (const InfeasibleBoundary&) {
        break;  // goal configuration itself collides
      }
      if (path) goal_q = *q_goal;
    }
    if (!path) continue;
    const TimedPath timed = time_parameterize(*path, cfg.arm.velocity_limits());
    const double query_time = clock.seconds_since(t0);
    rep.rrt.found++;
    rep.rrt.query_times_s.push_back(query_time);
    rep.rrt.exec_times_s.push_back(timed.duration);

    const FkResult fk = forward_kinematics(cfg.arm, goal_q);
    ShieldGoalPose end_pose;
    end_pose.position = fk.ee.translation();
    end_pose.orientation = Eigen::Quaterniond(fk.ee.linear());
    const bool blocked =
        shield_blocks_tunnel(end_pose, tunnel, cfg.dome, cfg.benchmark.blocking_rays);
    if (blocked) rep.rrt.blocked++;
    const double budget = proj.time_of_flight * sim.success_slack - sim.overhead_s;
    if (blocked && query_time + timed.duration < budget) rep.rrt.success++;
  }

  rep.mean_time_of_flight_s = rep.n ? tof_sum / rep.n : 0.0;
  rep.mean_residual_budget_ms = mean_of(residuals_ms);
  return rep;
}

// ---------------------------------------------------------------------------
// report emission

// one metric per line: `planner metric value`
inline void write_machine_report(const BenchmarkReport& r, std::ostream& os) {
  char buf[128];
  auto line = [&](const std::string& planner, const std::string& metric, double value) {
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    os << planner << " " << metric << " " << buf << "\n";
  };
  os << "meta seed " << r.seed << "\n";
  os << "meta n " << r.n << "\n";
  os << "meta fingerprint " << std::hex << r.fingerprint << std::dec << "\n";
  line("meta", "success_slack", r.success_slack);
  line("meta", "overhead_ms", r.overhead_ms);
  line("meta", "mean_time_of_flight_s", r.mean_time_of_flight_s);
  line("meta", "mean_residual_budget_ms", r.mean_residual_budget_ms);
  for (const auto* p : {&r.preprocessed, &r.rrt}) {
    const std::string name = p == &r.preprocessed ? "preprocessed" : "rrt_connect";
    line(name, "find_solution_count", p->found);
    line(name, "find_solution_rate", p->find_rate());
    line(name, "blocked_rate", p->blocked_rate());
    line(name, "success_count", p->success);
    line(name, "success_rate", p->success_rate());
    line(name, "query_time_mean_ms", mean_of(p->query_times_s) * 1e3);
    line(name, "query_time_std_ms", std_of(p->query_times_s) * 1e3);
    line(name, "execution_time_mean_ms", mean_of(p->exec_times_s) * 1e3);
    line(name, "execution_time_std_ms", std_of(p->exec_times_s) * 1e3);
  }
}

inline std::string format_table(const BenchmarkReport& r) {
  char buf[256];
  std::ostringstream os;
  os << "benchmark: n=" << r.n << " seed=" << r.seed
     << " mean_tof=" << static_cast<int>(r.mean_time_of_flight_s * 1000) << "ms\n";
  std::snprintf(buf, sizeof(buf), "%-22s %-18s %-18s\n", "metric", "preprocessed", "rrt_connect");
  os << buf;
  auto pct = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
    return std::string(buf);
  };
  auto ms = [&](const std::vector<double>& v) {
    std::snprintf(buf, sizeof(buf), "%.3g +/- %.3g", mean_of(v) * 1e3, std_of(v) * 1e3);
    return std::string(buf);
  };
  auto row = [&](const char* name, const std::string& a, const std::string& b) {
    std::snprintf(buf, sizeof(buf), "%-22s %-18s %-18s\n", name, a.c_str(), b.c_str());
    os << buf;
  };
  row("find solution", pct(r.preprocessed.find_rate()), pct(r.rrt.find_rate()));
  row("success rate", pct(r.preprocessed.success_rate()), pct(r.rrt.success_rate()));
  row("query time (ms)", ms(r.preprocessed.query_times_s), ms(r.rrt.query_times_s));
  row("execution time (ms)", ms(r.preprocessed.exec_times_s), ms(r.rrt.exec_times_s));
  if (r.overhead_ms > 0.0) {
    std::snprintf(buf, sizeof(buf),
                  "residual planner budget after %.1fms overhead: %.3gms mean\n", r.overhead_ms,
                  r.mean_residual_budget_ms);
    os << buf;
  }
  return os.str();
}

}  // namespace ctmp
