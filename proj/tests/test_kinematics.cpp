#include <gtest/gtest.h>

#include <random>

#include "ctmp/kinematics.hpp"
#include "test_util.hpp"

using namespace ctmp;

TEST(ForwardKinematics, ZeroConfigPureZOffsets) {
  const auto model = testutil::z_chain({0.1, 0.2, 0.3},
                                       {Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY(),
                                        Eigen::Vector3d::UnitZ()});
  const auto fk = forward_kinematics(model, Eigen::VectorXd::Zero(3));
  EXPECT_LT((fk.ee.translation() - Eigen::Vector3d(0, 0, 0.6)).norm(), 1e-14);
  EXPECT_LT((fk.ee.linear() - Eigen::Matrix3d::Identity()).norm(), 1e-14);
}

TEST(ForwardKinematics, TwoLinkPlanar) {
  const auto model = testutil::planar_arm({1.0, 1.0});
  Eigen::VectorXd q(2);
  q << 0.0, 0.0;
  EXPECT_LT((forward_kinematics(model, q).ee.translation() - Eigen::Vector3d(2, 0, 0)).norm(),
            1e-14);
  q << M_PI / 2, 0.0;
  EXPECT_LT((forward_kinematics(model, q).ee.translation() - Eigen::Vector3d(0, 2, 0)).norm(),
            1e-12);
}

TEST(ForwardKinematics, JacobianMatchesFiniteDifferences) {
  const auto model = ManipulatorModel::default_arm();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd q(6);
    for (int i = 0; i < 6; ++i) q[i] = 0.8 * unit(rng);
    const auto fk = forward_kinematics(model, q);
    const auto J = geometric_jacobian(fk, 6);
    const double h = 1e-7;
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXd qp = q, qm = q;
      qp[j] += h;
      qm[j] -= h;
      const Eigen::Vector3d dp = (forward_kinematics(model, qp).ee.translation() -
                                  forward_kinematics(model, qm).ee.translation()) /
                                 (2 * h);
      EXPECT_LT((J.block<3, 1>(0, j) - dp).norm(), 1e-5);
    }
  }
}

TEST(Collision, NoObstaclesPlanarArmFree) {
  const auto model = testutil::planar_arm({0.5, 0.5});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(-M_PI, M_PI);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd q(2);
    q << unit(rng), unit(rng);
    EXPECT_FALSE(in_collision(model, q, {}));
  }
}

TEST(Collision, CylinderCoincidentWithLink) {
  const auto model = testutil::planar_arm({1.0, 1.0});
  // vertical pole through the first link's midpoint
  const auto obs = Obstacle::cylinder(Eigen::Vector3d(0.5, 0.0, -1.0), Eigen::Vector3d::UnitZ(),
                                      0.05, 2.0);
  EXPECT_TRUE(in_collision(model, Eigen::VectorXd::Zero(2), {obs}));
  // rotate the arm away: +90 degrees puts links along +Y
  Eigen::VectorXd q(2);
  q << M_PI / 2, 0.0;
  EXPECT_FALSE(in_collision(model, q, {obs}));
}

TEST(Collision, BoxObstacle) {
  const auto model = testutil::planar_arm({1.0, 1.0});
  const auto obs = Obstacle::box(Eigen::Vector3d(1.5, 0.0, 0.0), Eigen::Vector3d(0.2, 0.2, 0.2));
  EXPECT_TRUE(in_collision(model, Eigen::VectorXd::Zero(2), {obs}));
  Eigen::VectorXd q(2);
  q << M_PI / 2, 0.0;
  EXPECT_FALSE(in_collision(model, q, {obs}));
}

TEST(Collision, FarObstacleNeverCollides) {
  // obstacle beyond total reach + radius: false for random q
  const auto model = ManipulatorModel::default_arm();
  double reach = model.tool.translation().norm();
  for (const auto& j : model.joints) reach += j.origin.translation().norm() + j.cap_radius;
  const auto obs = Obstacle::box(Eigen::Vector3d(reach + 1.0, 0.0, 0.0),
                                 Eigen::Vector3d(0.3, 0.3, 0.3));
  std::mt19937_64 rng(77);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd q(6);
    for (int k = 0; k < 6; ++k) {
      std::uniform_real_distribution<double> d(model.joints[k].limit_lo,
                                               model.joints[k].limit_hi);
      q[k] = d(rng);
    }
    ASSERT_FALSE(in_collision(model, q, {obs}));
    // distance lower bound: every link point stays within `reach` of the base
    ASSERT_GT(clearance(model, q, {obs}), 0.0);
  }
}

TEST(Collision, OrderInvariance) {
  const auto model = testutil::planar_arm({1.0, 1.0});
  const auto a = Obstacle::cylinder(Eigen::Vector3d(0.5, 0.0, -1.0), Eigen::Vector3d::UnitZ(),
                                    0.05, 2.0);
  const auto b = Obstacle::box(Eigen::Vector3d(1.5, 0.5, 0.0), Eigen::Vector3d(0.2, 0.2, 0.2));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(-M_PI, M_PI);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd q(2);
    q << unit(rng), unit(rng);
    EXPECT_EQ(in_collision(model, q, {a, b}), in_collision(model, q, {b, a}));
  }
}

TEST(Distance, SegmentSegmentKnownCases) {
  Eigen::Vector3d c1, c2;
  // parallel unit-separated segments
  EXPECT_NEAR(segment_segment_closest({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, c1, c2), 1.0,
              1e-14);
  // crossing at right angles with vertical gap
  EXPECT_NEAR(segment_segment_closest({-1, 0, 0}, {1, 0, 0}, {0, -1, 0.5}, {0, 1, 0.5}, c1, c2),
              0.5, 1e-14);
  // degenerate: two points
  EXPECT_NEAR(segment_segment_closest({0, 0, 0}, {0, 0, 0}, {3, 4, 0}, {3, 4, 0}, c1, c2), 5.0,
              1e-14);
}

TEST(Distance, BoxSdfInsideOutside) {
  const Eigen::Vector3d c(0, 0, 0), h(1, 2, 3);
  EXPECT_NEAR(box_sdf({3, 0, 0}, c, h), 2.0, 1e-14);
  EXPECT_NEAR(box_sdf({0, 0, 0}, c, h), -1.0, 1e-14);  // nearest face is x
  Eigen::Vector3d g;
  box_sdf({3, 0, 0}, c, h, &g);
  EXPECT_LT((g - Eigen::Vector3d::UnitX()).norm(), 1e-14);
}

TEST(InverseKinematics, FixedPointAtSeed) {
  const auto model = ManipulatorModel::default_arm();
  const Eigen::VectorXd q_star = model.home;
  const auto target = forward_kinematics(model, q_star).ee;
  const auto q = inverse_kinematics(model, target, q_star);
  ASSERT_TRUE(q.has_value());
  EXPECT_LT((*q - q_star).norm(), 1e-12);  // converged before the first step
}

TEST(InverseKinematics, TwoLinkStretched) {
  const auto model = testutil::planar_arm({1.0, 1.0});
  Eigen::Isometry3d target = Eigen::Isometry3d::Identity();
  target.translation() = Eigen::Vector3d(2.0, 0.0, 0.0);
  IkParams params;
  params.ang_tol = M_PI;  // position-only for the planar arm
  Eigen::VectorXd seed(2);
  seed << 0.1, -0.1;
  const auto q = inverse_kinematics(model, target, seed, params);
  ASSERT_TRUE(q.has_value());
  const auto fk = forward_kinematics(model, *q);
  EXPECT_LT((fk.ee.translation() - target.translation()).norm(), 1e-3);
}

TEST(InverseKinematics, OutOfReachFails) {
  const auto model = testutil::planar_arm({1.0, 1.0});
  Eigen::Isometry3d target = Eigen::Isometry3d::Identity();
  target.translation() = Eigen::Vector3d(3.0, 0.0, 0.0);  // reach is 2
  IkParams params;
  params.ang_tol = M_PI;
  EXPECT_FALSE(inverse_kinematics(model, target, Eigen::VectorXd::Zero(2), params).has_value());
}

TEST(InverseKinematics, RoundTripRandomConfigs) {
  const auto model = ManipulatorModel::default_arm();
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> noise(0.0, 0.1);
  int failures = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    Eigen::VectorXd q(6);
    for (int k = 0; k < 6; ++k) {
      // stay away from the exact limits so the noisy seed remains inside
      std::uniform_real_distribution<double> d(model.joints[k].limit_lo * 0.9,
                                               model.joints[k].limit_hi * 0.9);
      q[k] = d(rng);
    }
    const auto target = forward_kinematics(model, q).ee;
    Eigen::VectorXd seed = q;
    for (int k = 0; k < 6; ++k) {
      seed[k] = std::clamp(seed[k] + noise(rng), model.joints[k].limit_lo,
                           model.joints[k].limit_hi);
    }
    IkParams params;
    params.seed = 1000 + i;
    const auto sol = inverse_kinematics(model, target, seed, params);
    if (!sol) {
      ++failures;
      continue;
    }
    ASSERT_TRUE(model.within_limits(*sol));
    const auto fk = forward_kinematics(model, *sol);
    EXPECT_LT((fk.ee.translation() - target.translation()).norm(), 1e-3 + 1e-12);
    const Eigen::AngleAxisd err(target.linear() * fk.ee.linear().transpose());
    EXPECT_LT(std::abs(err.angle()), 0.00873 + 1e-12);
  }
  EXPECT_EQ(failures, 0) << failures << "/" << trials << " round trips failed";
}

TEST(InverseKinematics, NeverLeavesLimits) {
  const auto model = ManipulatorModel::default_arm();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Eigen::Isometry3d target = Eigen::Isometry3d::Identity();
    target.translation() = Eigen::Vector3d(unit(rng), unit(rng), 0.5 + 0.5 * unit(rng));
    IkParams params;
    params.seed = i;
    const auto q = inverse_kinematics(model, target, model.home, params);
    if (q) EXPECT_TRUE(model.within_limits(*q, 1e-12));
  }
}

TEST(Model, ValidateRejectsBadInput) {
  auto model = ManipulatorModel::default_arm();
  model.home[1] = 5.0;  // outside limits
  EXPECT_THROW(model.validate(), ConfigError);
  model = ManipulatorModel::default_arm();
  model.joints[2].vmax = 0.0;
  EXPECT_THROW(model.validate(), ConfigError);
}
