// Copyright 2026 The HierDex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hierdex/deploy.h"

#include <cmath>

#include <gtest/gtest.h>

namespace hierdex {
namespace {

ObjectState Pose3(double x, double y, double z, double yaw = 0.0) {
  ObjectState s;
  s.translation = Vec3(x, y, z);
  s.rotation = Rot::FromAxisAngle(Vec3::UnitZ(), yaw);
  return s;
}

TEST(FuseTest, IdenticalEstimatesReturnThatPose) {
  ObjectState p = Pose3(0.1, 0.2, 0.3, 0.4);
  p.joint_angle = 0.7;
  std::vector<ObjectState> est(4, p);
  ObjectState f = FusePoses(est, p, FusionConfig{}, Pose3(0, 0, 0));
  EXPECT_NEAR((f.translation - p.translation).norm(), 0.0, 1e-12);
  EXPECT_NEAR(QuatAngle(f.rotation, p.rotation), 0.0, 1e-7);
  ASSERT_TRUE(f.joint_angle);
  EXPECT_NEAR(*f.joint_angle, 0.7, 1e-12);
}

TEST(FuseTest, OutlierIsExcluded) {
  ObjectState ref = Pose3(0, 0, 0);
  std::vector<ObjectState> est = {Pose3(0.01, 0, 0), Pose3(0, 0.01, 0),
                                  Pose3(0, 0, 0.01), Pose3(0.2, 0, 0)};
  ObjectState f = FusePoses(est, ref, FusionConfig{}, ref);
  EXPECT_NEAR(f.translation.x(), 0.01 / 3, 1e-12);
  EXPECT_NEAR(f.translation.y(), 0.01 / 3, 1e-12);
  EXPECT_NEAR(f.translation.z(), 0.01 / 3, 1e-12);
}

TEST(FuseTest, RotationGateExcludes) {
  ObjectState ref = Pose3(0, 0, 0);
  std::vector<ObjectState> est = {Pose3(0, 0, 0, 0.1), Pose3(0, 0, 0, 0.6)};
  ObjectState f = FusePoses(est, ref, FusionConfig{}, ref);
  EXPECT_NEAR(QuatAngle(f.rotation, est[0].rotation), 0.0, 1e-7);
}

TEST(FuseTest, NoSurvivorsKeepsPrevious) {
  ObjectState ref = Pose3(0, 0, 0);
  ObjectState prev = Pose3(0.5, 0.5, 0.5, 1.0);
  std::vector<ObjectState> est = {Pose3(0.1, 0, 0), Pose3(0, 0, 0, 0.9)};
  ObjectState f = FusePoses(est, ref, FusionConfig{}, prev);
  EXPECT_EQ(f.translation, prev.translation);
  EXPECT_EQ(f.rotation.Wxyz(), prev.rotation.Wxyz());
}

TEST(FuseTest, EmptyThrows) {
  EXPECT_THROW(FusePoses({}, Pose3(0, 0, 0), FusionConfig{}, Pose3(0, 0, 0)),
               std::invalid_argument);
}

TEST(FuseTest, AntipodalQuaternionsAverageCorrectly) {
  ObjectState a = Pose3(0, 0, 0, 0.2);
  auto w = a.rotation.Wxyz();
  ObjectState b = a;
  b.rotation = Rot(-w[0], -w[1], -w[2], -w[3]);
  std::vector<ObjectState> est = {a, b};
  ObjectState f = FusePoses(est, a, FusionConfig{}, a);
  EXPECT_NEAR(QuatAngle(f.rotation, a.rotation), 0.0, 1e-7);
}

TEST(FuseTest, RandomizedFusionNeverWorseThanWorstCamera) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    ObjectState truth = Pose3(rng.Uniform(-1, 1), rng.Uniform(-1, 1),
                              rng.Uniform(0, 1), rng.Uniform(-3, 3));
    const int k = rng.UniformInt(1, 6);
    std::vector<ObjectState> est;
    double worst = 0.0;
    for (int c = 0; c < k; ++c) {
      ObjectState e = truth;
      e.translation += Vec3(rng.Uniform(-0.02, 0.02), rng.Uniform(-0.02, 0.02),
                            rng.Uniform(-0.02, 0.02));
      e.rotation =
          Rot::FromRotationVector(Vec3(rng.Uniform(-0.1, 0.1),
                                       rng.Uniform(-0.1, 0.1),
                                       rng.Uniform(-0.1, 0.1))) *
          e.rotation;
      worst = std::max(worst, (e.translation - truth.translation).norm());
      est.push_back(e);
    }
    ObjectState f = FusePoses(est, truth, FusionConfig{}, truth);
    ASSERT_LE((f.translation - truth.translation).norm(), worst + 1e-12);
    auto q = f.rotation.Wxyz();
    ASSERT_NEAR(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3], 1.0,
                1e-12);
  }
}

TEST(CameraTest, NoiselessCamerasSeeTruth) {
  Rng rng(1);
  CameraNoise n{0.0, 0.0, 0.0, 0.2};
  ObjectState truth = Pose3(0.1, 0.2, 0.3, 0.5);
  for (const ObjectState& e : SimulateCameras(truth, 4, n, rng)) {
    EXPECT_NEAR((e.translation - truth.translation).norm(), 0.0, 1e-12);
  }
  n.outlier_prob = 1.0;
  for (const ObjectState& e : SimulateCameras(truth, 4, n, rng)) {
    EXPECT_NEAR((e.translation - truth.translation).norm(), 0.2, 1e-12);
  }
}

TEST(CameraTest, OneOutlierAmongFourIsRejected) {
  Rng rng(5);
  CameraNoise n{0.005, 0.01, 0.25, 0.2};
  ObjectState truth = Pose3(0, 0, 0.1);
  double fused = 0.0, naive = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto est = SimulateCameras(truth, 4, n, rng);
    fused += (FusePoses(est, truth, FusionConfig{}, truth).translation -
              truth.translation).norm();
    Vec3 mean = Vec3::Zero();
    for (const auto& e : est) mean += e.translation / 4.0;
    naive += (mean - truth.translation).norm();
  }
  EXPECT_LT(fused, 0.5 * naive);
}

TEST(EmaTest, AlphaOneIsIdentity) {
  EmaState s{1.0, std::nullopt};
  for (double v : {1.0, -2.0, 5.0}) {
    EXPECT_EQ(EmaFilter(s, Vector::Constant(2, v))[0], v);
  }
}

TEST(EmaTest, FirstCallPassesThrough) {
  EmaState s;
  Vector x(3);
  x << 1, 2, 3;
  EXPECT_EQ(EmaFilter(s, x), x);
}

TEST(EmaTest, ConstantInputConvergesGeometrically) {
  EmaState s{0.3, std::nullopt};
  EmaFilter(s, Vector::Constant(1, 0.0));
  const double c = 1.0;
  for (int k = 1; k <= 20; ++k) {
    double out = EmaFilter(s, Vector::Constant(1, c))[0];
    EXPECT_NEAR(std::abs(out - c), std::pow(0.7, k), 1e-12);
  }
}

TEST(EmaTest, AlternatingInputIsAttenuated) {
  EmaState s{0.5, std::nullopt};
  double peak = 0.0;
  for (int k = 0; k < 200; ++k) {
    double out = EmaFilter(s, Vector::Constant(1, k % 2 ? 1.0 : -1.0))[0];
    if (k > 10) peak = std::max(peak, std::abs(out));
  }
  EXPECT_LT(peak, 1.0);
}

TEST(EmaTest, FilterIsLinear) {
  Rng rng(2);
  EmaState sx{0.3, std::nullopt}, sy{0.3, std::nullopt}, sz{0.3, std::nullopt};
  const double a = 2.5, b = -0.7;
  for (int k = 0; k < 50; ++k) {
    Vector x = Vector::Constant(2, rng.Normal());
    Vector y = Vector::Constant(2, rng.Normal());
    Vector fx = EmaFilter(sx, x), fy = EmaFilter(sy, y);
    Vector fz = EmaFilter(sz, a * x + b * y);
    EXPECT_NEAR((fz - (a * fx + b * fy)).norm(), 0.0, 1e-12);
  }
}

TEST(EmaTest, RejectsBadAlpha) {
  EmaState s{0.0, std::nullopt};
  EXPECT_THROW(EmaFilter(s, Vector::Zero(1)), std::invalid_argument);
}

TEST(ResetTest, Bounds) {
  ObjectState g = Pose3(0.1, 0.1, 0.1);
  EXPECT_TRUE(CheckReset(g, g));
  EXPECT_FALSE(CheckReset(Pose3(0.131, 0.1, 0.1), g));
  EXPECT_TRUE(CheckReset(Pose3(0.129, 0.1, 0.1), g));
  EXPECT_TRUE(CheckReset(Pose3(0.1, 0.1, 0.1, 0.49), g));
  EXPECT_FALSE(CheckReset(Pose3(0.1, 0.1, 0.1, 0.51), g));
}

TEST(ConfigTest, StrictKeys) {
  EXPECT_THROW(FusionConfigFromJson({{"gate", 1}}), std::invalid_argument);
  EXPECT_THROW(DistillConfigFromJson({{"iterations", 0}}),
               std::invalid_argument);
  DistillConfig d = DistillConfigFromJson({{"epochs", 3}});
  EXPECT_EQ(d.epochs, 3);
  EXPECT_EQ(DistillConfigToJson(DistillConfigFromJson(DistillConfigToJson(d))),
            DistillConfigToJson(d));
  EXPECT_EQ(CameraNoiseFromJson({{"outlier_prob", 0.5}}).outlier_prob, 0.5);
}

struct DistillFixture {
  DemoSet set;
  Demo demo;
  RolloutContext ctx;
  Controller teacher;

  DistillFixture() {
    DatasetConfig cfg;
    cfg.per_category = 2;
    cfg.steps = 120;
    Rng rng(11);
    set = GenDataset(DefaultCategories(), cfg, rng);
    demo = set.demos[ReferenceDemo(set)];
    ctx.ppo.mode = ControlMode::kVanilla;
    ctx.ppo.hidden = 16;
    ctx.ppo.lanes = 2;
    teacher = Controller(ctx.ppo, ctx.obs_dim(), ctx.action_dim());
    Rng trng(4);
    teacher.Init(trng);
    teacher.policy.mean.Init(trng, 1.0);
  }

  TaskSampler Sampler() const {
    return MakeSampler({TaskItem{set.SpecFor(demo), demo.goal(), &demo,
                                 demo.task}},
                       AugmentConfig{});
  }
};

TEST(DistillTest, StudentViewDropsVelocity) {
  DistillFixture f;
  const ObsLayout l = MakeObsLayout(f.ctx.env.fingers, f.ctx.action_dim(),
                                    f.ctx.window, ObsMode::kTeacher);
  std::vector<double> obs(l.size, 1.0);
  auto view = StudentView(f.ctx, obs);
  EXPECT_EQ(static_cast<int>(view.size()), StudentContext(f.ctx).obs_dim());
  EXPECT_EQ(static_cast<int>(view.size()), l.size - l.velocity_size);
  EXPECT_GT(l.velocity_size, 0);
  obs.pop_back();
  EXPECT_THROW(StudentView(f.ctx, obs), std::invalid_argument);
}

TEST(DistillTest, SingleRoundFitsTeacher) {
  DistillFixture f;
  DistillConfig c;
  c.iterations = 1;
  c.labels_per_iteration = 512;
  c.epochs = 150;
  c.batch_size = 64;
  Rng rng(9);
  std::vector<DistillStats> log;
  Controller student = DaggerDistill(f.ctx, f.teacher, f.Sampler(), c, rng,
                                     &log);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].beta, 1.0);
  EXPECT_EQ(log[0].dataset_size, 512);
  EXPECT_LT(log[0].mse_after * 10, log[0].mse_before);
  EXPECT_EQ(student.obs_dim(), StudentContext(f.ctx).obs_dim());
  EXPECT_EQ(student.action_dim(), f.teacher.action_dim());
}

TEST(DistillTest, AggregateGrowsAndBetaAnneals) {
  DistillFixture f;
  DistillConfig c;
  c.iterations = 3;
  c.labels_per_iteration = 128;
  c.epochs = 2;
  Rng rng(9);
  std::vector<DistillStats> log;
  DaggerDistill(f.ctx, f.teacher, f.Sampler(), c, rng, &log);
  ASSERT_EQ(log.size(), 3u);
  EXPECT_DOUBLE_EQ(log[0].beta, 1.0);
  EXPECT_DOUBLE_EQ(log[1].beta, 0.5);
  EXPECT_DOUBLE_EQ(log[2].beta, 0.0);
  for (size_t i = 1; i < log.size(); ++i) {
    EXPECT_GT(log[i].dataset_size, log[i - 1].dataset_size);
  }
}

TEST(DistillTest, RejectsStudentContextAsTeacher) {
  DistillFixture f;
  Rng rng(1);
  EXPECT_THROW(DaggerDistill(StudentContext(f.ctx), f.teacher, f.Sampler(),
                             DistillConfig{}, rng),
               std::invalid_argument);
}

}  // namespace
}  // namespace hierdex
