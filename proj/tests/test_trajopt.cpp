#include <gtest/gtest.h>

#include <random>

#include "ctmp/trajopt.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ctmp;

namespace {

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

ManipulatorModel one_dof(double vmax = 2.0) { return testutil::planar_arm({1.0}, vmax); }

TrajOptProblem simple_problem(const ManipulatorModel& model, const Eigen::VectorXd& x0,
                              const Eigen::VectorXd& xf,
                              const std::vector<Obstacle>& obstacles = {}) {
  TrajOptParams prm;
  prm.t_min = 0.05;
  prm.t_max = 3.0;
  return TrajOptProblem::between(model, x0, xf, obstacles, prm);
}

}  // namespace

TEST(Optimize, StationaryProblemPinsToMinTime) {
  const auto model = one_dof();
  const auto prob = simple_problem(model, vec1(0.3), vec1(0.3));
  const auto res = optimize(prob);
  EXPECT_EQ(res.status, TrajStatus::Valid);
  EXPECT_NEAR(res.trajectory.duration(), prob.params.t_min, 1e-9);
  // path-length share of the cost is negligible
  const double len = trajectory_cost(res.trajectory, 0.0, 1.0);
  EXPECT_LT(len, 1e-6);
}

TEST(Optimize, OneDofRespectsVelocityLowerBound) {
  const auto model = one_dof(2.0);
  const auto prob = simple_problem(model, vec1(0.0), vec1(1.0));
  const auto res = optimize(prob);
  ASSERT_EQ(res.status, TrajStatus::Valid);
  EXPECT_GE(res.trajectory.duration(), 0.5);  // 1 rad at 2 rad/s
  // endpoints interpolate exactly
  EXPECT_EQ(evaluate(res.trajectory, res.trajectory.t0)[0], 0.0);
  EXPECT_EQ(evaluate(res.trajectory, res.trajectory.tf)[0], 1.0);
  // boundary velocities within 1e-6
  EXPECT_LT(velocity(res.trajectory, res.trajectory.t0).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(velocity(res.trajectory, res.trajectory.tf).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Optimize, GradientMatchesCentralDifferences) {
  // analytic gradient of the penalized objective vs central differences on 20
  // random problems (mixed dims, obstacles, boundary velocities)
  std::mt19937_64 rng(20240917);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int dof = 1 + trial % 3;
    std::vector<double> lengths(dof, 0.6);
    const auto model = testutil::planar_arm(lengths, 2.0);
    std::vector<Obstacle> obstacles;
    if (trial % 2 == 1) {
      obstacles.push_back(Obstacle::cylinder(
          Eigen::Vector3d(0.35 + 0.1 * unit(rng), 0.35 + 0.1 * unit(rng), -1.0),
          Eigen::Vector3d::UnitZ(), 0.08, 2.0));
    }
    TrajOptParams prm;
    prm.num_ctrl = 6 + trial % 3;
    prm.n_check = 20;
    TrajOptProblem prob;
    prob.model = &model;
    prob.obstacles = obstacles;
    prob.params = prm;
    prob.x0 = Eigen::VectorXd::Zero(dof);
    prob.xf = Eigen::VectorXd::Zero(dof);
    prob.xdot0 = Eigen::VectorXd::Zero(dof);
    prob.xdotf = Eigen::VectorXd::Zero(dof);
    for (int j = 0; j < dof; ++j) {
      prob.x0[j] = 0.8 * unit(rng);
      prob.xf[j] = 0.8 * unit(rng);
      if (trial % 3 == 2) {
        prob.xdot0[j] = 0.5 * unit(rng);
        prob.xdotf[j] = 0.5 * unit(rng);
      }
    }
    TrajOpt opt(prob);
    // random (non-optimal) decision point
    Eigen::VectorXd z(opt.dim());
    for (int k = 0; k + 1 < opt.dim(); ++k) z[k] = 0.9 * unit(rng);
    z[opt.dim() - 1] = 0.4 + 0.3 * std::abs(unit(rng));
    const double mu = 50.0;
    const Eigen::VectorXd g = opt.penalized_gradient(z, mu);
    for (int k = 0; k < opt.dim(); ++k) {
      const double h = 1e-6;
      Eigen::VectorXd zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      const double numeric =
          (opt.penalized_objective(zp, mu) - opt.penalized_objective(zm, mu)) / (2 * h);
      const double scale = std::max({1.0, std::abs(g[k]), std::abs(numeric)});
      worst = std::max(worst, std::abs(g[k] - numeric) / scale);
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Optimize, ScalingWeightsLeavesArgminUnchanged) {
  // an obstacle forces the numeric path; scaling (w1, w2) together must not
  // move the optimum
  const auto model = testutil::planar_arm({0.6, 0.6}, 2.0);
  const auto obstacle = Obstacle::cylinder(Eigen::Vector3d(0.55, 0.45, -1.0),
                                           Eigen::Vector3d::UnitZ(), 0.1, 2.0);
  Eigen::VectorXd x0(2), xf(2);
  x0 << -0.3, 0.2;
  xf << 1.2, -0.4;
  for (double kappa : {2.0, 1.7}) {
    auto prob_a = simple_problem(model, x0, xf, {obstacle});
    auto prob_b = prob_a;
    prob_b.params.w1 *= kappa;
    prob_b.params.w2 *= kappa;
    const auto ra = optimize(prob_a);
    const auto rb = optimize(prob_b);
    EXPECT_NEAR(ra.trajectory.duration(), rb.trajectory.duration(), 1e-4);
    for (size_t i = 0; i < ra.trajectory.control_points.size(); ++i) {
      EXPECT_LT((ra.trajectory.control_points[i] - rb.trajectory.control_points[i])
                    .cwiseAbs()
                    .maxCoeff(),
                1e-4);
    }
  }
}

TEST(Optimize, MonotoneObjectiveWithinRounds) {
  const auto model = testutil::planar_arm({0.6, 0.6}, 2.0);
  const auto obstacle = Obstacle::cylinder(Eigen::Vector3d(0.55, 0.45, -1.0),
                                           Eigen::Vector3d::UnitZ(), 0.1, 2.0);
  Eigen::VectorXd x0(2), xf(2);
  x0 << -0.3, 0.2;
  xf << 1.2, -0.4;
  const auto res = optimize(simple_problem(model, x0, xf, {obstacle}));
  ASSERT_FALSE(res.round_objectives.empty());
  for (const auto& round : res.round_objectives) {
    for (size_t i = 1; i < round.size(); ++i) {
      ASSERT_LE(round[i], round[i - 1] + 1e-12);
    }
  }
}

TEST(Optimize, BestFeasibleRecoveryFromRegressingIterates) {
  // start from a valid detour around a box that blocks the straight sweep;
  // with a near-zero penalty the objective pulls the iterates into collision
  // and the iterate cache must hand back the last valid trajectory
  const auto model = testutil::planar_arm({0.6, 0.6}, 2.0);
  const auto obstacle =
      Obstacle::box(Eigen::Vector3d(1.15, 0.0, 0.0), Eigen::Vector3d(0.1, 0.1, 0.5));
  Eigen::VectorXd x0(2), xf(2);
  x0 << -0.6, -0.1;
  xf << 0.6, 0.1;  // straight line sweeps the stretched tip through the box
  TrajOptParams prm;
  prm.t_max = 10.0;
  prm.penalty_rounds = 1;
  prm.penalty_init = 1e-6;  // collisions barely penalized: iterates regress
  prm.max_inner_iters = 150;
  TrajOptProblem prob = TrajOptProblem::between(model, x0, xf, {obstacle}, prm);

  // valid hand-made detour: swing away while folding the elbow
  BSplineTrajectory init;
  init.degree = 3;
  init.t0 = 0.0;
  init.tf = 6.0;
  init.knots = clamped_uniform_knots(8, 3, 0.0, 6.0);
  Eigen::VectorXd via(2);
  via << -1.5, 3.0;
  init.control_points.resize(8);
  for (int k = 0; k < 8; ++k) {
    const double f = k / 7.0;
    init.control_points[k] = f < 0.5 ? (x0 + 2 * f * (via - x0)).eval()
                                     : (via + (2 * f - 1) * (xf - via)).eval();
  }
  init.control_points[1] = init.control_points[0];
  init.control_points[6] = init.control_points[7];
  ASSERT_EQ(validate(init, prob), TrajStatus::Valid);

  const auto res = TrajOpt(prob).optimize(init);
  ASSERT_EQ(res.status, TrajStatus::Collision);
  ASSERT_TRUE(res.best_feasible.has_value());
  EXPECT_EQ(validate(*res.best_feasible, prob), TrajStatus::Valid);
}

TEST(Validate, ThreeOutcomes) {
  const auto model = one_dof(1.0);
  const auto prob = simple_problem(model, vec1(0.0), vec1(0.0));

  // constant trajectory in free space
  BSplineTrajectory flat;
  flat.degree = 3;
  flat.t0 = 0;
  flat.tf = 1;
  flat.knots = clamped_uniform_knots(4, 3, 0, 1);
  flat.control_points.assign(4, vec1(0.2));
  EXPECT_EQ(validate(flat, prob), TrajStatus::Valid);

  // ramp exceeding vmax = 1: 2 rad in 1 s
  BSplineTrajectory ramp = flat;
  ramp.control_points = {vec1(0), vec1(0.6667), vec1(1.3333), vec1(2.0)};
  EXPECT_EQ(validate(ramp, prob), TrajStatus::DynamicViolation);

  // slow sweep through a pole at the arm's stretched tip position
  const auto obstacle = Obstacle::cylinder(Eigen::Vector3d(0.99, 0.0, -1.0),
                                           Eigen::Vector3d::UnitZ(), 0.05, 2.0);
  auto prob2 = simple_problem(model, vec1(-0.5), vec1(0.5), {obstacle});
  BSplineTrajectory sweep;
  sweep.degree = 3;
  sweep.t0 = 0;
  sweep.tf = 4;
  sweep.knots = clamped_uniform_knots(4, 3, 0, 4);
  sweep.control_points = {vec1(-0.5), vec1(-0.5), vec1(0.5), vec1(0.5)};
  EXPECT_EQ(validate(sweep, prob2), TrajStatus::Collision);
  // dense oracle agrees: some sample along the sweep collides
  bool any = false;
  for (int i = 0; i <= 200; ++i) {
    any = any || in_collision(model, evaluate(sweep, 4.0 * i / 200), {obstacle});
  }
  EXPECT_TRUE(any);
}

TEST(WarmStart, ConstantPairCollapsesToMinTime) {
  const auto model = one_dof();
  const Eigen::VectorXd q = vec1(0.4);
  BSplineTrajectory a;
  a.degree = 3;
  a.t0 = 0;
  a.tf = 1;
  a.knots = clamped_uniform_knots(4, 3, 0, 1);
  a.control_points.assign(4, q);
  const auto res = optimize_with_warm_start(a, a, simple_problem(model, q, q));
  EXPECT_EQ(res.status, TrajStatus::Valid);
  EXPECT_NEAR(res.trajectory.duration(), 0.05, 1e-9);
}

TEST(WarmStart, JunctionMismatchThrows) {
  const auto model = one_dof();
  BSplineTrajectory a;
  a.degree = 3;
  a.t0 = 0;
  a.tf = 1;
  a.knots = clamped_uniform_knots(4, 3, 0, 1);
  a.control_points.assign(4, vec1(0.0));
  BSplineTrajectory b = a;
  b.control_points.assign(4, vec1(0.1));  // starts 0.1 rad away
  EXPECT_THROW(optimize_with_warm_start(a, b, simple_problem(model, vec1(0), vec1(0.1))),
               MismatchedJunction);
}

TEST(WarmStart, NeverWorseThanColdOnFreePairs) {
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int dof = 1 + trial % 3;
    const auto model = testutil::planar_arm(std::vector<double>(dof, 0.5), 2.0);
    Eigen::VectorXd x0(dof), xm(dof), xf(dof);
    for (int j = 0; j < dof; ++j) {
      x0[j] = unit(rng);
      xm[j] = unit(rng);
      xf[j] = unit(rng);
    }
    auto prob = simple_problem(model, x0, xf);
    const auto leg1 = optimize(simple_problem(model, x0, xm));
    const auto leg2 = optimize(simple_problem(model, xm, xf));
    ASSERT_EQ(leg1.status, TrajStatus::Valid);
    ASSERT_EQ(leg2.status, TrajStatus::Valid);
    const auto warm = optimize_with_warm_start(leg1.trajectory, leg2.trajectory, prob);
    const auto cold = optimize(prob);
    ASSERT_EQ(warm.status, TrajStatus::Valid);
    ASSERT_EQ(cold.status, TrajStatus::Valid);
    EXPECT_LE(warm.cost, cold.cost + 1e-9);
  }
}

TEST(Optimize, InfeasibleBoundaryThrows) {
  const auto model = testutil::planar_arm({1.0, 1.0});
  const auto obstacle = Obstacle::cylinder(Eigen::Vector3d(0.5, 0.0, -1.0),
                                           Eigen::Vector3d::UnitZ(), 0.1, 2.0);
  // zero configuration lies inside the pole
  EXPECT_THROW(
      optimize(simple_problem(model, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2),
                              {obstacle})),
      InfeasibleBoundary);
}

TEST(Optimize, NonzeroBoundaryVelocitiesHonored) {
  const auto model = one_dof(3.0);
  TrajOptProblem prob = simple_problem(model, vec1(0.0), vec1(1.0));
  prob.xdot0 = vec1(0.5);
  prob.xdotf = vec1(-0.25);
  const auto res = optimize(prob);
  ASSERT_EQ(res.status, TrajStatus::Valid);
  EXPECT_NEAR(velocity(res.trajectory, res.trajectory.t0)[0], 0.5, 1e-6);
  EXPECT_NEAR(velocity(res.trajectory, res.trajectory.tf)[0], -0.25, 1e-6);
}

TEST(Cost, QuadratureMatchesClosedFormLine) {
  // straight 1-D ramp: cost = w1 T + w2 |dq|, up to the quadrature error of
  // the 32-node rule across the spline's knot spans
  const auto model = one_dof(10.0);
  const auto res = optimize(simple_problem(model, vec1(0.0), vec1(2.0)));
  ASSERT_EQ(res.status, TrajStatus::Valid);
  const double T = res.trajectory.duration();
  EXPECT_NEAR(trajectory_cost(res.trajectory, 1.0, 0.1), T + 0.1 * 2.0, 1e-4);
}
