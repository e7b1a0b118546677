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

#include "hierdex/env.h"

#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

namespace hierdex {
namespace {

GoalTrajectory Still(const ObjectState& s, int n) {
  GoalTrajectory g;
  g.states.assign(n, s);
  return g;
}

ObjectState OnTable(std::optional<double> joint = std::nullopt) {
  return ObjectState{Rot::Identity(), Vec3::Zero(), joint};
}

WristAction HoldWrists(const WorldState& s) {
  return WristAction{s.hands[0].wrist, s.hands[1].wrist};
}

FingerCommands Fingers(double v, int f = kDefaultFingers) {
  return {std::vector<double>(f, v), std::vector<double>(f, v)};
}

WristAction AtSites(const ObjectSpec& spec, const ObjectState& s) {
  Pose standoff{Vec3(0, 0, -0.025), Rot::Identity()};
  return WristAction{Compose(GraspSiteWorld(spec, s, 0), standoff),
                     Compose(GraspSiteWorld(spec, s, 1), standoff)};
}

// Drives the hands to the grasp sites and closes the fingers.
void Grasp(Env& env, double closure) {
  WristAction target = AtSites(env.spec(), env.state().nominal);
  for (int i = 0; i < 40; ++i) env.Step(target, Fingers(0.0));
  for (int i = 0; i < 10; ++i) env.Step(target, Fingers(closure));
}

TEST(ResetTest, UnperturbedMatchesFirstGoal) {
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  ObjectState s0{Rot::FromAxisAngle(Vec3::UnitZ(), 0.2), Vec3(0.1, -0.05, 0.0)};
  Rng rng(1);
  const WorldState& w = env.Reset(Still(s0, 20), rng, false);
  EXPECT_EQ(w.object.translation, s0.translation);
  EXPECT_EQ(w.object.rotation, s0.rotation);
  EXPECT_EQ(w.step, 0);
  for (const HandState& h : w.hands) {
    for (double f : h.fingers) EXPECT_EQ(f, 0.0);
  }
}

TEST(ResetTest, PerturbationWithinRanges) {
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  ObjectState s0 = OnTable();
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const WorldState& w = env.Reset(Still(s0, 20), rng, true);
    EXPECT_LE(TranslationErrorCm(w.object.translation, s0.translation),
              2.0 * std::sqrt(2.0) + 1e-12);
    EXPECT_EQ(w.object.translation.z(), 0.0);
    EXPECT_LE(QuatAngle(w.object.rotation, s0.rotation), M_PI / 6 + 1e-12);
    Vec3 axis = (s0.rotation.Inverse() * w.object.rotation).RotationVector();
    EXPECT_NEAR(axis.x(), 0.0, 1e-12);
    EXPECT_NEAR(axis.y(), 0.0, 1e-12);
  }
}

TEST(StepTest, HoldingStillLeavesObjectUnchanged) {
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  Rng rng(3);
  env.Reset(Still(OnTable(), 50), rng, false);
  ObjectState before = env.state().object;
  for (int i = 0; i < 20; ++i) env.Step(HoldWrists(env.state()), Fingers(0.0));
  EXPECT_EQ(env.state().object.translation, before.translation);
  EXPECT_EQ(env.state().object.rotation, before.rotation);
}

TEST(StepTest, AttachedObjectFollowsWrist) {
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  Rng rng(4);
  env.Reset(Still(OnTable(), 200), rng, false);
  Grasp(env, 1.0);
  ASSERT_TRUE(env.state().attach[0].has_value());
  ASSERT_TRUE(env.state().attach[1].has_value());
  Vec3 before = env.state().object.translation;
  WristAction moved = HoldWrists(env.state());
  moved.left.translation += Vec3(0.01, 0, 0);
  moved.right.translation += Vec3(0.01, 0, 0);
  env.Step(moved, Fingers(1.0));
  Vec3 delta = env.state().object.translation - before;
  EXPECT_NEAR((delta - Vec3(0.01, 0, 0)).norm(), 0.0, 1e-12);
}

TEST(StepTest, LowClosureDoesNotAttach) {
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  Rng rng(5);
  env.Reset(Still(OnTable(), 200), rng, false);
  Grasp(env, 0.3);
  EXPECT_FALSE(env.state().attach[0].has_value());
  Vec3 before = env.state().object.translation;
  WristAction moved = HoldWrists(env.state());
  moved.left.translation += Vec3(0.01, 0, 0.01);
  moved.right.translation += Vec3(0.01, 0, 0.01);
  env.Step(moved, Fingers(0.3));
  EXPECT_EQ(env.state().object.translation, before);
}

TEST(StepTest, RigidObjectNeedsBothHands) {
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  Rng rng(6);
  env.Reset(Still(OnTable(), 200), rng, false);
  WristAction target = AtSites(env.spec(), env.state().nominal);
  target.right = env.config().home_right;
  for (int i = 0; i < 40; ++i) env.Step(target, Fingers(1.0));
  EXPECT_FALSE(env.state().attach[0].has_value());
}

TEST(StepTest, FreeObjectFallsToTable) {
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  Rng rng(7);
  ObjectState raised = OnTable();
  raised.translation.z() = 0.12;
  env.Reset(Still(raised, 50), rng, false);
  env.Step(HoldWrists(env.state()), Fingers(0.0));
  EXPECT_NEAR(env.state().object.translation.z(), 0.07, 1e-12);
  env.Step(HoldWrists(env.state()), Fingers(0.0));
  env.Step(HoldWrists(env.state()), Fingers(0.0));
  EXPECT_EQ(env.state().object.translation.z(), 0.0);
}

TEST(StepTest, ArticulatedLidFollowsRightHand) {
  ObjectSpec spec = MakeObjectSpec(2, Vec3(0.24, 0.18, 0.03), true, {0.0, 2.0});
  Env env(spec, EnvConfig{});
  Rng rng(8);
  env.Reset(Still(OnTable(0.0), 300), rng, false);
  Grasp(env, 1.0);
  ASSERT_TRUE(env.state().attach[1].has_value());
  // open the lid by rotating the right wrist about the hinge
  for (int i = 1; i <= 40; ++i) {
    ObjectState target = OnTable(0.025 * i);
    env.Step(AtSites(spec, target), Fingers(1.0));
    EXPECT_NEAR(*env.state().object.joint_angle, 0.025 * i, 1e-9);
  }
  // held base with a released child keeps the angle
  double angle = *env.state().object.joint_angle;
  WristAction hold = HoldWrists(env.state());
  FingerCommands release = Fingers(1.0);
  release[1].assign(kDefaultFingers, 0.0);
  for (int i = 0; i < 5; ++i) env.Step(hold, release);
  EXPECT_FALSE(env.state().attach[1].has_value());
  EXPECT_EQ(*env.state().object.joint_angle, angle);
}

TEST(StepTest, Errors) {
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  Rng rng(9);
  env.Reset(Still(OnTable(), 3), rng, false);
  WristAction bad = HoldWrists(env.state());
  bad.left.translation.x() = NAN;
  EXPECT_THROW(env.Step(bad, Fingers(0.0)), std::invalid_argument);
  FingerCommands nan_fingers = Fingers(0.0);
  nan_fingers[0][0] = NAN;
  EXPECT_THROW(env.Step(HoldWrists(env.state()), nan_fingers),
               std::invalid_argument);
  env.Step(HoldWrists(env.state()), Fingers(0.0));
  env.Step(HoldWrists(env.state()), Fingers(0.0));
  EXPECT_THROW(env.Step(HoldWrists(env.state()), Fingers(0.0)),
               std::logic_error);
  env.Reset(Still(OnTable(), 3), rng, false);
  env.Terminate();
  EXPECT_THROW(env.Step(HoldWrists(env.state()), Fingers(0.0)),
               std::logic_error);
}

TEST(ScaleObjectTest, Examples) {
  ObjectSpec spec = MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false);
  ObjectSpec same = ScaleObject(spec, 1, 1, 1);
  EXPECT_EQ(same.dims, spec.dims);
  ObjectSpec wide = ScaleObject(spec, 1.1, 1, 1);
  EXPECT_NEAR(wide.dims.x(), 0.22, 1e-15);
  EXPECT_NEAR(wide.grasp_sites[1].translation.x(), 0.11, 1e-15);
  EXPECT_NEAR(wide.grasp_sites[0].translation.x(), -0.11, 1e-15);
  EXPECT_THROW(ScaleObject(spec, 0.0, 1, 1), std::invalid_argument);
}

TEST(RandomizeDomainTest, RangesAndDeterminism) {
  ObjectSpec spec = MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false);
  EnvConfig cfg;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    WorldState a, b;
    ObjectSpec sa = spec, sb = spec;
    Rng ra(seed), rb(seed);
    RandomizeDomain(a, sa, ra);
    RandomizeDomain(b, sb, rb);
    EXPECT_EQ(sa.mass_scale, sb.mass_scale);
    EXPECT_EQ(sa.friction_scale, sb.friction_scale);
    EXPECT_EQ(a.obs_noise_scale, b.obs_noise_scale);
    double r = EffectiveGraspRadius(cfg, sa);
    EXPECT_GE(r, 0.036 - 1e-15);
    EXPECT_LE(r, 0.044 + 1e-15);
    EXPECT_GE(a.obs_noise_scale, 0.0);
    EXPECT_LE(a.obs_noise_scale, 1.5);
  }
}

TEST(RandomizeDomainTest, TriggersOncePerThousandSteps) {
  EnvConfig cfg;
  cfg.randomize_domain = true;
  Env env(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), cfg);
  Rng rng(10);
  env.Reset(Still(OnTable(), 1001), rng, false);
  int triggered = 0;
  for (int i = 0; i < 1000; ++i) {
    triggered += env.Step(HoldWrists(env.state()), Fingers(0.0)).randomized;
  }
  EXPECT_EQ(triggered, 1);
  EXPECT_EQ(env.state().randomizations, 1);

  Env plain(MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false), EnvConfig{});
  plain.Reset(Still(OnTable(), 1001), rng, false);
  for (int i = 0; i < 1000; ++i) {
    plain.Step(HoldWrists(plain.state()), Fingers(0.0));
  }
  EXPECT_EQ(plain.spec().mass_scale, 1.0);
  EXPECT_EQ(plain.spec().friction_scale, 1.0);
}

// Random commands used by the invariant checks below.
struct Scripted {
  WristAction wrists;
  FingerCommands fingers;
};

Scripted RandomCommand(const ObjectSpec& spec, const WorldState& s, Rng& rng) {
  WristAction w = AtSites(spec, s.nominal);
  for (int h = 0; h < 2; ++h) {
    w.hand(h).translation += Vec3(rng.Uniform(-0.05, 0.05),
                                  rng.Uniform(-0.05, 0.05),
                                  rng.Uniform(-0.02, 0.08));
    w.hand(h).rotation =
        Rot::FromRotationVector(Vec3(rng.Uniform(-0.3, 0.3),
                                     rng.Uniform(-0.3, 0.3),
                                     rng.Uniform(-0.3, 0.3))) *
        w.hand(h).rotation;
  }
  double c = rng.Uniform(0.0, 1.0) < 0.8 ? 1.0 : 0.0;
  return {w, Fingers(c)};
}

TEST(EnvInvariantTest, DeterministicStream) {
  ObjectSpec spec = MakeObjectSpec(3, Vec3(0.18, 0.14, 0.1), true, {0.0, 1.8});
  EnvConfig cfg;
  cfg.process_noise = true;
  auto run = [&](uint64_t seed) {
    Env env(spec, cfg);
    Rng rng(seed);
    env.Reset(Still(OnTable(0.0), 300), rng, true);
    std::vector<std::string> log;
    for (int i = 0; i < 250; ++i) {
      Scripted c = RandomCommand(spec, env.state(), rng);
      env.Step(c.wrists, c.fingers);
      log.push_back(EpisodeLogRecord(env.state()).dump());
    }
    return log;
  };
  EXPECT_EQ(run(42), run(42));
  EXPECT_NE(run(42), run(43));
}

TEST(EnvInvariantTest, RateLimitsJointLimitsAndAttachment) {
  for (bool articulated : {false, true}) {
    ObjectSpec spec =
        articulated ? MakeObjectSpec(3, Vec3(0.18, 0.14, 0.1), true, {0.0, 1.8})
                    : MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false);
    Env env(spec, EnvConfig{});
    Rng rng(articulated ? 21 : 22);
    env.Reset(Still(OnTable(articulated ? std::optional<double>(0.0)
                                        : std::nullopt),
                    600),
              rng, false);
    for (int i = 0; i < 500; ++i) {
      WorldState before = env.state();
      Scripted c = RandomCommand(spec, before, rng);
      env.Step(c.wrists, c.fingers);
      const WorldState& s = env.state();
      for (int h = 0; h < 2; ++h) {
        double moved =
            (s.hands[h].wrist.translation - before.hands[h].wrist.translation)
                .norm();
        EXPECT_LE(moved, 0.02 + 1e-12);
        EXPECT_LE(QuatAngle(s.hands[h].wrist.rotation,
                            before.hands[h].wrist.rotation),
                  0.1 + 1e-7);
        for (double f : s.hands[h].fingers) {
          EXPECT_GE(f, 0.0);
          EXPECT_LE(f, 1.0);
        }
      }
      if (articulated) {
        EXPECT_GE(*s.object.joint_angle, spec.joint_limits[0]);
        EXPECT_LE(*s.object.joint_angle, spec.joint_limits[1]);
        // the base holder drives the base exactly
        if (s.attach[kLeft] && before.attach[kLeft]) {
          Pose implied = Compose(s.hands[kLeft].wrist, s.attach[kLeft]->grasp);
          EXPECT_LT((implied.translation - s.object.translation).norm(), 1e-9);
          EXPECT_LT(QuatAngle(implied.rotation, s.object.rotation), 1e-7);
          EXPECT_EQ(s.attach[kLeft]->grasp.translation,
                    before.attach[kLeft]->grasp.translation);
        }
      }
      EXPECT_EQ(s.step, before.step + 1);
    }
  }
}

TEST(EnvInvariantTest, ConsistentCarryConservesGraspFrames) {
  ObjectSpec spec = MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false);
  Env env(spec, EnvConfig{});
  Rng rng(23);
  env.Reset(Still(OnTable(), 300), rng, false);
  Grasp(env, 1.0);
  ASSERT_TRUE(env.state().attach[0].has_value());
  ObjectState goal = OnTable();
  for (int i = 0; i < 100; ++i) {
    goal.translation += Vec3(0.001, -0.0005, 0.002);
    goal.rotation = Rot::FromAxisAngle(Vec3(0.2, 0.1, 1.0), 0.01) * goal.rotation;
    env.Step(AtSites(spec, goal), Fingers(1.0));
    const WorldState& s = env.state();
    for (int h = 0; h < 2; ++h) {
      Pose implied = Compose(s.hands[h].wrist, s.attach[h]->grasp);
      EXPECT_LT((implied.translation - s.object.translation).norm(), 1e-9);
      EXPECT_LT(QuatAngle(implied.rotation, s.object.rotation), 1e-7);
    }
  }
}

TEST(ObserveTest, LayoutAndBlocks) {
  ObjectSpec spec = MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false);
  Env env(spec, EnvConfig{});
  Rng rng(30);
  GoalTrajectory g = Still(OnTable(), 50);
  env.Reset(g, rng, false);
  GoalWindow w = SampleGoalWindow(g, 0, nullptr, false);
  std::vector<WristAction> wrists(10, HoldWrists(env.state()));
  std::vector<double> prev(20, 0.0);
  auto teacher = Observe(env.state(), w, wrists, prev, ObsMode::kTeacher);
  auto student = Observe(env.state(), w, wrists, prev, ObsMode::kStudent);
  ObsLayout lt = MakeObsLayout(4, 20, 10, ObsMode::kTeacher);
  ObsLayout ls = MakeObsLayout(4, 20, 10, ObsMode::kStudent);
  ASSERT_EQ(static_cast<int>(teacher.size()), lt.size);
  ASSERT_EQ(static_cast<int>(student.size()), ls.size);
  EXPECT_EQ(student.size(), teacher.size() - lt.velocity_size);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(teacher[lt.prev_action + i], 0.0);
  for (int h = 0; h < 2; ++h) {
    Pose rel = Compose(Inverse(env.state().object.pose()),
                       env.state().hands[h].wrist);
    EXPECT_NEAR(teacher[lt.wrists_in_object + 7 * h], rel.translation.x(), 1e-15);
    EXPECT_NEAR(teacher[lt.wrists_in_object + 7 * h + 2], rel.translation.z(),
                1e-15);
  }
  for (int j = 0; j < 10; ++j) {
    const double* f = &teacher[lt.goal_window + 8 * j];
    EXPECT_EQ(f[0], 0.0);
    EXPECT_EQ(f[3], 1.0);
    EXPECT_EQ(f[7], 0.0);
  }
  for (int i = 0; i < ls.size; ++i) EXPECT_EQ(student[i], teacher[i]);
}

TEST(SpecFileTest, JsonRoundTripAndUnknownKeys) {
  ObjectSpec spec = MakeObjectSpec(3, Vec3(0.18, 0.14, 0.1), true, {0.0, 1.8});
  Json j = SpecToJson(spec);
  ObjectSpec back = SpecFromJson(Json::parse(j.dump()));
  EXPECT_EQ(back.dims, spec.dims);
  EXPECT_EQ(back.grasp_sites[1].translation, spec.grasp_sites[1].translation);
  j["bogus"] = 1;
  EXPECT_THROW(SpecFromJson(j), std::invalid_argument);
}

}  // namespace
}  // namespace hierdex
