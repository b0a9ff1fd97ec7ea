// Command-line front end: offline preprocessing, constant-time queries,
// benchmarking, ballistic estimation, and database validation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctmp/bench.hpp"
#include "ctmp/config.hpp"
#include "ctmp/database.hpp"
#include "ctmp/query.hpp"

namespace {

using namespace ctmp;

int cmd_preprocess(const std::string& config_path, std::string out_path, uint64_t seed,
                   int workers, int replan_depth) {
  HarnessConfig cfg = HarnessConfig::load_file(config_path);
  if (out_path.empty()) out_path = cfg.paths.database;
  cfg.database.seed = seed;
  if (replan_depth >= 0) cfg.database.replan_depth = replan_depth;
  cfg.database.validate();

  std::fprintf(stderr, "preprocess: %d tunnels, %d worker(s)\n",
               DomeGrid(cfg.dome).tunnel_count(), workers);
  const TrajectoryDatabase db = build_database(cfg.arm, cfg.dome, cfg.obstacles, cfg.insat,
                                               cfg.database, cfg.fingerprint(), workers);
  std::fprintf(stderr, "preprocess: %d covered / %d feasible\n", db.covered_count(),
               db.feasible_count());
  if (cfg.database.replan_depth > 0) {
    const ReplanTensor tensor =
        build_replan_tensor(db, cfg.arm, cfg.dome, cfg.obstacles, cfg.insat, cfg.database);
    save(db, &tensor, out_path);
  } else {
    save(db, nullptr, out_path);
  }
  std::printf("database written to %s\n", out_path.c_str());
  return 0;
}

int cmd_query(const std::string& config_path, const std::string& db_path,
              const std::vector<double>& theta) {
  HarnessConfig cfg = HarnessConfig::load_file(config_path);
  const auto [db, tensor] = load(db_path, cfg.fingerprint());
  const DomeGrid grid(cfg.dome);
  ProjectileState s;
  s.p0 = Eigen::Vector3d(theta[0], theta[1], theta[2]);
  s.v0 = Eigen::Vector3d(theta[3], theta[4], theta[5]);
  const QueryResult r = lookup(s, db, grid);
  // machine-readable single line
  std::printf("status %s tunnel %d tf %.9g lookup_ms %.6g crossing_ms %.6g table_ms %.6g\n",
              to_string(r.status), r.tunnel_id, r.entry ? r.entry->tf : 0.0,
              r.lookup_time_s * 1e3, r.crossing_time_s * 1e3, r.table_time_s * 1e3);
  return r.status == LookupStatus::Ok ? 0 : 1;
}

int cmd_bench(const std::string& config_path, const std::string& db_path, int n, uint64_t seed,
              std::string out_path, double overhead_ms, double success_slack) {
  HarnessConfig cfg = HarnessConfig::load_file(config_path);
  if (n > 0) cfg.benchmark.n = n;
  if (overhead_ms >= 0.0) cfg.benchmark.overhead_ms = overhead_ms;
  if (success_slack > 0.0) cfg.benchmark.success_slack = success_slack;
  if (out_path.empty()) out_path = cfg.paths.report;
  const auto [db, tensor] = load(db_path, cfg.fingerprint());
  const BenchmarkReport rep = run_benchmark(cfg, db, seed);
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open report file '" + out_path + "'");
  write_machine_report(rep, out);
  std::printf("%s", format_table(rep).c_str());
  std::printf("report written to %s\n", out_path.c_str());
  return 0;
}

int cmd_estimate(const std::string& obs_path) {
  std::ifstream in(obs_path);
  if (!in) throw IoError("cannot open observations file '" + obs_path + "'");
  std::vector<Observation> obs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Observation o;
    if (!(ls >> o.t >> o.position.x() >> o.position.y() >> o.position.z())) {
      throw ConfigError("bad observation line: '" + line + "' (expected: t x y z)");
    }
    obs.push_back(o);
  }
  const ProjectileState s = fit(obs);
  std::printf("theta %.9g %.9g %.9g %.9g %.9g %.9g\n", s.p0.x(), s.p0.y(), s.p0.z(), s.v0.x(),
              s.v0.y(), s.v0.z());
  return 0;
}

int cmd_validate_db(const std::string& config_path, const std::string& db_path, int rays) {
  HarnessConfig cfg = HarnessConfig::load_file(config_path);
  const auto [db, tensor] = load(db_path, cfg.fingerprint());
  const auto issues =
      audit_coverage(db, cfg.arm, cfg.dome, cfg.obstacles, cfg.trajopt, rays);
  std::printf("validate-db: %d covered entries, %zu issue(s)\n", db.covered_count(),
              issues.size());
  for (const auto& issue : issues) {
    std::printf("tunnel %d: %s\n", issue.tunnel_id, issue.what.c_str());
  }
  return issues.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shield interception planning: preprocess, query, benchmark"};
  app.require_subcommand(1);

  std::string config_path, db_path, out_path, obs_path;
  std::vector<double> theta;
  uint64_t seed = 1;
  int workers = 1, replan_depth = -1, n = 0, rays = 10000;
  double overhead_ms = -1.0, success_slack = -1.0;

  auto* pre = app.add_subcommand("preprocess", "build the trajectory database offline");
  pre->add_option("--config", config_path, "config file")->required();
  pre->add_option("--out", out_path, "output database path");
  pre->add_option("--seed", seed, "run seed");
  pre->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  pre->add_option("--replan-depth", replan_depth, "replan tensor recursion depth (0-3)");

  auto* q = app.add_subcommand("query", "look up the trajectory for a projectile estimate");
  q->add_option("--config", config_path, "config file")->required();
  q->add_option("--db", db_path, "database path")->required();
  q->add_option("--theta", theta, "x0 y0 z0 vx0 vy0 vz0")->expected(6)->required();

  auto* b = app.add_subcommand("bench", "run the interception benchmark");
  b->add_option("--config", config_path, "config file")->required();
  b->add_option("--db", db_path, "database path")->required();
  b->add_option("--n", n, "projectile count (overrides config)");
  b->add_option("--seed", seed, "run seed");
  b->add_option("--out", out_path, "machine-readable report path");
  b->add_option("--overhead-ms", overhead_ms, "fixed perception/system overhead deduction");
  b->add_option("--success-slack", success_slack, "multiplier on the time-of-flight deadline");

  auto* e = app.add_subcommand("estimate", "fit a ballistic state to observations (t x y z lines)");
  e->add_option("--observations", obs_path, "observation file")->required();

  auto* v = app.add_subcommand("validate-db", "re-check validity and blocking of covered entries");
  v->add_option("--config", config_path, "config file")->required();
  v->add_option("--db", db_path, "database path")->required();
  v->add_option("--rays", rays, "blocking-oracle ray count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);  // --help
    app.exit(err);
    return 2;
  }

  try {
    if (pre->parsed()) return cmd_preprocess(config_path, out_path, seed, workers, replan_depth);
    if (q->parsed()) return cmd_query(config_path, db_path, theta);
    if (b->parsed()) return cmd_bench(config_path, db_path, n, seed, out_path, overhead_ms,
                                      success_slack);
    if (e->parsed()) return cmd_estimate(obs_path);
    if (v->parsed()) return cmd_validate_db(config_path, db_path, rays);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 2;
}
