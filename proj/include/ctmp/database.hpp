#pragma once

#include <atomic>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ctmp/ballistics.hpp"
#include "ctmp/common.hpp"
#include "ctmp/errors.hpp"
#include "ctmp/geometry.hpp"
#include "ctmp/insat.hpp"

namespace ctmp {

enum class EntryStatus : uint8_t { Covered = 0, Unreachable = 1, Infeasible = 2 };

inline const char* to_string(EntryStatus s) {
  switch (s) {
    case EntryStatus::Covered: return "Covered";
    case EntryStatus::Unreachable: return "Unreachable";
    case EntryStatus::Infeasible: return "Infeasible";
  }
  return "?";
}

struct DbEntry {
  EntryStatus status = EntryStatus::Infeasible;
  int32_t goal_pose_index = -1;  // which sampled pose the stored plan reached
  double tf = 0.0;
  std::optional<BSplineTrajectory> trajectory;
};

struct TrajectoryDatabase {
  uint32_t version = 1;
  uint64_t fingerprint = 0;
  std::vector<DbEntry> entries;  // dense by tunnel id

  // build-time audit: every successful candidate tf per tunnel (not persisted)
  std::vector<std::vector<double>> audit_buffer_tfs;

  int covered_count() const {
    int n = 0;
    for (const auto& e : entries) n += e.status == EntryStatus::Covered ? 1 : 0;
    return n;
  }
  int feasible_count() const {
    int n = 0;
    for (const auto& e : entries) n += e.status != EntryStatus::Infeasible ? 1 : 0;
    return n;
  }
};

struct ReplanEntry {
  uint8_t feasible = 0;
  int32_t traj_id = -1;  // into ReplanTensor::pool, -1 if not stored
};

struct TensorLevel {
  std::vector<int32_t> sources;      // deeper levels: pool trajectory ids; empty for the primary level
  std::vector<ReplanEntry> entries;  // dense (source, k, target-tunnel)
};

// Goal-to-goal transition table: entry (g_i, k, g_j) answers whether the arm,
// part-way along g_i's stored trajectory, can still reach g_j's goal.
struct ReplanTensor {
  int32_t K = 0;          // states sampled per trajectory
  int32_t depth = 0;
  int32_t n_tunnels = 0;
  uint8_t has_trajectories = 1;
  TensorLevel primary;               // rows for every tunnel id
  std::vector<TensorLevel> deeper;   // recursion levels 2..depth
  std::vector<BSplineTrajectory> pool;

  const ReplanEntry& at(int gi, int k, int gj) const {
    return primary.entries[(static_cast<size_t>(gi) * K + k) * n_tunnels + gj];
  }
};

struct DatabaseParams {
  int poses_per_tunnel = 3;
  int replan_K = 3;
  int replan_depth = 1;            // 0 disables the tensor; hard cap 3
  double tunnel_budget_s = 10.0;   // planning budget per tunnel
  int blocking_rays = 4096;        // build-time blocking filter resolution
  bool store_tensor_trajectories = true;
  bool tensor_planner_fallback = false;  // full search when the direct fit fails
  bool skip_planning = false;            // structural build (timing studies)
  uint64_t seed = 1;

  void validate() const {
    if (poses_per_tunnel < 1) throw ConfigError("database: poses_per_tunnel must be >= 1");
    if (replan_K < 1) throw ConfigError("database: replan_K must be >= 1");
    if (replan_depth < 0 || replan_depth > 3) {
      throw ConfigError("database: replan_depth must be in [0,3]");
    }
    if (blocking_rays < 1) throw ConfigError("database: blocking_rays must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// preprocessing

namespace detail {

inline DbEntry plan_tunnel(const Tunnel& tunnel, const ManipulatorModel& model,
                           const DomeConfig& config, const std::vector<Obstacle>& obstacles,
                           const InsatParams& insat, const DatabaseParams& db,
                           std::vector<double>* audit) {
  DbEntry entry;
  if (!tunnel.feasible) {
    entry.status = EntryStatus::Infeasible;
    return entry;
  }
  entry.status = EntryStatus::Unreachable;
  if (db.skip_planning) return entry;

  const auto poses = sample_goal_poses(tunnel, db.poses_per_tunnel, config);
  const auto t_start = std::chrono::steady_clock::now();
  for (int pi = 0; pi < static_cast<int>(poses.size()); ++pi) {
    // a pose that cannot block even when reached exactly is not a goal;
    // oblique cell pairs may have no blockable pose at all
    if (!shield_blocks_tunnel(poses[pi], tunnel, config, db.blocking_rays)) continue;
    const double used =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    const double remaining = db.tunnel_budget_s - used;
    if (remaining <= 0.0) break;
    InsatParams ip = insat;
    ip.seed = derive_seed(db.seed, static_cast<uint64_t>(tunnel.id), static_cast<uint64_t>(pi));
    ip.timeout_s = std::min(ip.timeout_s, remaining);
    InsatPlanner planner(model, obstacles, ip);
    const PlanResult res = planner.plan(model.home, {poses[pi]});
    if (res.status != PlanStatus::Success) continue;
    // the achieved end pose must still block after IK and tracking error
    const FkResult fk = forward_kinematics(model, res.trajectory.end());
    ShieldGoalPose achieved;
    achieved.position = fk.ee.translation();
    achieved.orientation = Eigen::Quaterniond(fk.ee.linear());
    if (!shield_blocks_tunnel(achieved, tunnel, config, db.blocking_rays)) continue;
    if (audit) audit->push_back(res.trajectory.duration());
    const double tf = res.trajectory.duration();
    if (entry.status != EntryStatus::Covered || tf < entry.tf) {
      entry.status = EntryStatus::Covered;
      entry.tf = tf;
      entry.goal_pose_index = pi;
      entry.trajectory = res.trajectory;
    }
  }
  return entry;
}

}  // namespace detail

// Alg.: for every feasible tunnel, try a plan from the home configuration to
// each sampled goal pose, buffer the successes, and keep the least-time one.
// Tunnels are independent; distributing them over workers cannot change the
// result because each entry is planned with a seed derived from its id.
inline TrajectoryDatabase build_database(const ManipulatorModel& model, const DomeConfig& config,
                                         const std::vector<Obstacle>& obstacles,
                                         const InsatParams& insat, const DatabaseParams& params,
                                         uint64_t fingerprint, int n_workers = 1) {
  params.validate();
  model.validate();
  config.validate();
  if (in_collision(model, model.home, obstacles)) {
    throw ConfigError("build_database: home configuration is in collision");
  }
  const auto [inner_cells, outer_cells] = discretize_domes(config);
  const auto tunnels = enumerate_tunnels(inner_cells, outer_cells, config);

  TrajectoryDatabase db;
  db.fingerprint = fingerprint;
  db.entries.resize(tunnels.size());
  db.audit_buffer_tfs.resize(tunnels.size());

  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tunnels.size()) return;
      try {
        db.entries[i] = detail::plan_tunnel(tunnels[i], model, config, obstacles, insat, params,
                                            &db.audit_buffer_tfs[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return db;
}

// ---------------------------------------------------------------------------
// replan tensor

namespace detail {

struct ReplanTarget {
  int tunnel_id;
  Eigen::VectorXd config;      // goal configuration (stored trajectory end)
  ShieldGoalPose pose;         // for the planner fallback
};

inline ReplanEntry replan_transition(const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                                     const ReplanTarget& target, const ManipulatorModel& model,
                                     const std::vector<Obstacle>& obstacles,
                                     const InsatParams& insat, const DatabaseParams& params,
                                     std::vector<BSplineTrajectory>& pool) {
  ReplanEntry out;
  TrajOptProblem prob = TrajOptProblem::between(model, q, target.config, obstacles, insat.opt);
  prob.xdot0 = qdot;
  std::optional<BSplineTrajectory> found;
  try {
    const TrajOptResult res = optimize(prob);
    if (const BSplineTrajectory* t = res.usable()) found = *t;
  } catch (const InfeasibleBoundary&) {
    return out;
  }
  if (!found && params.tensor_planner_fallback) {
    InsatParams ip = insat;
    ip.seed = derive_seed(params.seed, 0x7e50u, static_cast<uint64_t>(target.tunnel_id));
    InsatPlanner planner(model, obstacles, ip);
    const PlanResult res = planner.plan(q, qdot, {target.pose});
    if (res.status == PlanStatus::Success) found = res.trajectory;
  }
  if (found) {
    out.feasible = 1;
    if (params.store_tensor_trajectories) {
      pool.push_back(std::move(*found));
      out.traj_id = static_cast<int32_t>(pool.size()) - 1;
    }
  }
  return out;
}

}  // namespace detail

// Additional transitions pre-computed from K equidistant states on every
// stored trajectory, recursively up to `replan_depth` levels. A transition is
// first attempted as a single trajectory optimization; the full planner is
// only used as a fallback when enabled.
inline ReplanTensor build_replan_tensor(const TrajectoryDatabase& db,
                                        const ManipulatorModel& model, const DomeConfig& config,
                                        const std::vector<Obstacle>& obstacles,
                                        const InsatParams& insat, const DatabaseParams& params) {
  params.validate();
  ReplanTensor tensor;
  tensor.K = params.replan_K;
  tensor.depth = params.replan_depth;
  tensor.n_tunnels = static_cast<int32_t>(db.entries.size());
  tensor.has_trajectories = params.store_tensor_trajectories ? 1 : 0;
  if (params.replan_depth == 0) return tensor;

  const auto [inner_cells, outer_cells] = discretize_domes(config);
  const auto tunnels = enumerate_tunnels(inner_cells, outer_cells, config);

  std::vector<detail::ReplanTarget> targets;
  for (int gj = 0; gj < tensor.n_tunnels; ++gj) {
    if (db.entries[gj].status != EntryStatus::Covered) continue;
    detail::ReplanTarget t;
    t.tunnel_id = gj;
    t.config = db.entries[gj].trajectory->end();
    const auto poses = sample_goal_poses(tunnels[gj], params.poses_per_tunnel, config);
    t.pose = poses[db.entries[gj].goal_pose_index];
    targets.push_back(std::move(t));
  }

  const int K = tensor.K;
  auto state_at = [K](const BSplineTrajectory& traj, int k, Eigen::VectorXd& q,
                      Eigen::VectorXd& qd) {
    const double frac = K == 1 ? 0.0 : static_cast<double>(k) / (K - 1);
    const double t = traj.t0 + frac * traj.duration();
    q = evaluate(traj, t);
    qd = velocity(traj, t);
  };

  // src by value: transitions append to the pool, which may reallocate
  auto fill_level = [&](const BSplineTrajectory src, size_t row_base, TensorLevel& level) {
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd q, qd;
      state_at(src, k, q, qd);
      for (const auto& target : targets) {
        level.entries[row_base + static_cast<size_t>(k) * tensor.n_tunnels + target.tunnel_id] =
            detail::replan_transition(q, qd, target, model, obstacles, insat, params,
                                      tensor.pool);
      }
    }
  };

  // level 1: rows for every tunnel id; only covered rows are populated
  tensor.primary.entries.assign(
      static_cast<size_t>(tensor.n_tunnels) * K * tensor.n_tunnels, ReplanEntry{});
  size_t level_pool_begin = 0;
  for (int gi = 0; gi < tensor.n_tunnels; ++gi) {
    if (db.entries[gi].status != EntryStatus::Covered) continue;
    fill_level(*db.entries[gi].trajectory, static_cast<size_t>(gi) * K * tensor.n_tunnels,
               tensor.primary);
  }

  // deeper levels: states on the transition trajectories added one level up
  size_t prev_begin = level_pool_begin, prev_end = tensor.pool.size();
  for (int level = 2; level <= params.replan_depth && tensor.has_trajectories; ++level) {
    TensorLevel lvl;
    for (size_t src = prev_begin; src < prev_end; ++src) {
      lvl.sources.push_back(static_cast<int32_t>(src));
    }
    lvl.entries.assign(lvl.sources.size() * K * tensor.n_tunnels, ReplanEntry{});
    for (size_t r = 0; r < lvl.sources.size(); ++r) {
      fill_level(tensor.pool[lvl.sources[r]], r * K * tensor.n_tunnels, lvl);
    }
    prev_begin = prev_end;
    prev_end = tensor.pool.size();
    tensor.deeper.push_back(std::move(lvl));
  }
  return tensor;
}

// ---------------------------------------------------------------------------
// persistence: little-endian binary, magic CTMPDB01, 64-bit floats

namespace detail {

constexpr char kMagic[8] = {'C', 'T', 'M', 'P', 'D', 'B', '0', '1'};
constexpr uint32_t kFormatVersion = 1;

struct Writer {
  std::string buf;
  template <typename T>
  void raw(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const char* p = reinterpret_cast<const char*>(&v);
    buf.append(p, sizeof(T));
  }
  void f64(double v) { raw(v); }
  void u8(uint8_t v) { raw(v); }
  void u32(uint32_t v) { raw(v); }
  void u64(uint64_t v) { raw(v); }
  void i32(int32_t v) { raw(v); }
};

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  template <typename T>
  T raw() {
    static_assert(std::is_trivially_copyable_v<T>);
    if (pos + sizeof(T) > buf.size()) throw IoError("database file truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  double f64() { return raw<double>(); }
  uint8_t u8() { return raw<uint8_t>(); }
  uint32_t u32() { return raw<uint32_t>(); }
  uint64_t u64() { return raw<uint64_t>(); }
  int32_t i32() { return raw<int32_t>(); }
};

inline void write_traj(Writer& w, const BSplineTrajectory& t) {
  w.i32(t.degree);
  w.i32(t.dim());
  w.f64(t.t0);
  w.f64(t.tf);
  w.u64(t.knots.size());
  for (double k : t.knots) w.f64(k);
  w.u64(t.control_points.size());
  for (const auto& p : t.control_points) {
    for (int j = 0; j < p.size(); ++j) w.f64(p[j]);
  }
}

inline BSplineTrajectory read_traj(Reader& r) {
  BSplineTrajectory t;
  t.degree = r.i32();
  const int dim = r.i32();
  t.t0 = r.f64();
  t.tf = r.f64();
  const uint64_t nk = r.u64();
  if (nk > (1u << 24)) throw IoError("implausible knot count");
  t.knots.resize(nk);
  for (auto& k : t.knots) k = r.f64();
  const uint64_t np = r.u64();
  if (np > (1u << 24) || dim < 0 || dim > 4096) throw IoError("implausible control point count");
  t.control_points.resize(np);
  for (auto& p : t.control_points) {
    p.resize(dim);
    for (int j = 0; j < dim; ++j) p[j] = r.f64();
  }
  return t;
}

inline void write_level(Writer& w, const TensorLevel& lvl) {
  w.u64(lvl.sources.size());
  for (int32_t s : lvl.sources) w.i32(s);
  w.u64(lvl.entries.size());
  for (const auto& e : lvl.entries) {
    w.u8(e.feasible);
    w.i32(e.traj_id);
  }
}

inline TensorLevel read_level(Reader& r) {
  TensorLevel lvl;
  const uint64_t ns = r.u64();
  if (ns > (1u << 26)) throw IoError("implausible tensor source count");
  lvl.sources.resize(ns);
  for (auto& s : lvl.sources) s = r.i32();
  const uint64_t ne = r.u64();
  if (ne > (1u << 28)) throw IoError("implausible tensor entry count");
  lvl.entries.resize(ne);
  for (auto& e : lvl.entries) {
    e.feasible = r.u8();
    e.traj_id = r.i32();
  }
  return lvl;
}

}  // namespace detail

inline void save(const TrajectoryDatabase& db, const ReplanTensor* tensor,
                 const std::string& path) {
  detail::Writer w;
  w.buf.append(detail::kMagic, sizeof(detail::kMagic));
  w.u32(detail::kFormatVersion);
  w.u64(db.fingerprint);
  w.u64(db.entries.size());
  for (const auto& e : db.entries) {
    detail::Writer ew;
    ew.u8(static_cast<uint8_t>(e.status));
    ew.i32(e.goal_pose_index);
    ew.f64(e.tf);
    ew.u8(e.trajectory ? 1 : 0);
    if (e.trajectory) detail::write_traj(ew, *e.trajectory);
    w.u32(static_cast<uint32_t>(ew.buf.size()));  // length-prefixed entry
    w.buf += ew.buf;
  }
  w.u8(tensor != nullptr ? 1 : 0);
  if (tensor) {
    w.i32(tensor->K);
    w.i32(tensor->depth);
    w.i32(tensor->n_tunnels);
    w.u8(tensor->has_trajectories);
    detail::write_level(w, tensor->primary);
    w.u32(static_cast<uint32_t>(tensor->deeper.size()));
    for (const auto& lvl : tensor->deeper) detail::write_level(w, lvl);
    w.u64(tensor->pool.size());
    for (const auto& t : tensor->pool) detail::write_traj(w, t);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

// Loads a database (and tensor, if present). When `expected_fingerprint` is
// given, a mismatch throws FingerprintMismatch: the database is stale for the
// current configuration.
inline std::pair<TrajectoryDatabase, std::optional<ReplanTensor>> load(
    const std::string& path, std::optional<uint64_t> expected_fingerprint = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::Reader r{buf};

  char magic[8];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, detail::kMagic, 8) != 0) {
    throw VersionMismatch("not a trajectory database (bad magic)");
  }
  const uint32_t version = r.u32();
  if (version != detail::kFormatVersion) {
    throw VersionMismatch("unsupported database version " + std::to_string(version));
  }
  TrajectoryDatabase db;
  db.version = version;
  db.fingerprint = r.u64();
  if (expected_fingerprint && *expected_fingerprint != db.fingerprint) {
    throw FingerprintMismatch("database was built from a different configuration");
  }
  const uint64_t n = r.u64();
  if (n > (1u << 26)) throw IoError("implausible tunnel count");
  db.entries.resize(n);
  for (auto& e : db.entries) {
    const uint32_t len = r.u32();
    const size_t entry_end = r.pos + len;
    if (entry_end > buf.size()) throw IoError("database file truncated");
    e.status = static_cast<EntryStatus>(r.u8());
    e.goal_pose_index = r.i32();
    e.tf = r.f64();
    if (r.u8() != 0) e.trajectory = detail::read_traj(r);
    if (r.pos != entry_end) throw IoError("entry length mismatch");
  }
  std::optional<ReplanTensor> tensor;
  if (r.u8() != 0) {
    ReplanTensor t;
    t.K = r.i32();
    t.depth = r.i32();
    t.n_tunnels = r.i32();
    t.has_trajectories = r.u8();
    t.primary = detail::read_level(r);
    const uint32_t nd = r.u32();
    for (uint32_t i = 0; i < nd; ++i) t.deeper.push_back(detail::read_level(r));
    const uint64_t np = r.u64();
    if (np > (1u << 26)) throw IoError("implausible pool size");
    t.pool.resize(np);
    for (auto& traj : t.pool) traj = detail::read_traj(r);
    tensor = std::move(t);
  }
  if (r.pos != buf.size()) throw IoError("trailing bytes in database file");
  return {std::move(db), std::move(tensor)};
}

// ---------------------------------------------------------------------------
// coverage audit

struct CoverageIssue {
  int tunnel_id = -1;
  std::string what;
};

// Re-checks every Covered entry: trajectory validity, home start with zero
// velocity, stored duration, goal orthogonality, and geometric blocking under
// the ray predicate.
inline std::vector<CoverageIssue> audit_coverage(const TrajectoryDatabase& db,
                                                 const ManipulatorModel& model,
                                                 const DomeConfig& config,
                                                 const std::vector<Obstacle>& obstacles,
                                                 const TrajOptParams& opt, int n_rays) {
  std::vector<CoverageIssue> issues;
  const auto [inner_cells, outer_cells] = discretize_domes(config);
  const auto tunnels = enumerate_tunnels(inner_cells, outer_cells, config);
  for (size_t i = 0; i < db.entries.size(); ++i) {
    const DbEntry& e = db.entries[i];
    if (e.status != EntryStatus::Covered) continue;
    auto fail = [&](const std::string& what) {
      issues.push_back({static_cast<int>(i), what});
    };
    if (!e.trajectory) {
      fail("covered entry without trajectory");
      continue;
    }
    const BSplineTrajectory& traj = *e.trajectory;
    if (std::abs(traj.duration() - e.tf) > 1e-12) fail("stored tf differs from trajectory");
    if ((traj.start() - model.home).cwiseAbs().maxCoeff() > 1e-9) fail("does not start at home");
    if (velocity(traj, traj.t0).cwiseAbs().maxCoeff() > 1e-6) fail("nonzero start velocity");
    TrajOptProblem prob = TrajOptProblem::between(model, traj.start(), traj.end(), obstacles, opt);
    if (validate(traj, prob) != TrajStatus::Valid) fail("trajectory does not validate");

    const Tunnel& tunnel = tunnels[i];
    const FkResult fk = forward_kinematics(model, traj.end());
    const Eigen::Vector3d normal = fk.ee.linear().col(2);
    const double align = std::abs(normal.dot(tunnel.direction()));
    if (align < std::cos(0.1)) fail("shield not orthogonal to the centerline");
    ShieldGoalPose pose;
    pose.position = fk.ee.translation();
    pose.orientation = Eigen::Quaterniond(fk.ee.linear());
    if (!shield_blocks_tunnel(pose, tunnel, config, n_rays)) fail("end pose does not block tunnel");
  }
  return issues;
}

}  // namespace ctmp
