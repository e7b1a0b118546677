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

#include "hierdex/expert.h"

#include <filesystem>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

namespace hierdex {
namespace {

ObjectSpec Box() { return MakeObjectSpec(0, Vec3(0.2, 0.15, 0.1), false); }

GoalTrajectory Rise(int hold, int rise_steps, double height) {
  ObjectState a, b;
  b.translation.z() = height;
  std::vector<Keypose> keys = {{a, 0}, {a, hold}, {b, hold + rise_steps}};
  return InterpolateKeyposes(keys, hold + rise_steps + 1);
}

TEST(PlanExpertTest, ConstantTrajectoryHoldsWrists) {
  GoalTrajectory g;
  g.states.assign(80, ObjectState{});
  Demo d = PlanExpert(Box(), g);
  ASSERT_EQ(d.length(), 80);
  for (const WristAction& w : d.wrist_poses) {
    EXPECT_EQ(w.left.translation, d.wrist_poses[0].left.translation);
    EXPECT_EQ(w.right.rotation, d.wrist_poses[0].right.rotation);
  }
  EXPECT_EQ(d.finger_closures.back()[0].front(), 1.0);
  EXPECT_EQ(d.finger_closures.front()[1].front(), 0.0);
}

TEST(PlanExpertTest, VerticalRiseCarriesWrists) {
  Demo d = PlanExpert(Box(), Rise(40, 100, 0.1));
  for (int h = 0; h < 2; ++h) {
    double rise = d.wrist_poses.back().hand(h).translation.z() -
                  d.wrist_poses.front().hand(h).translation.z();
    EXPECT_NEAR(rise, 0.1, 1e-12);
  }
  EXPECT_EQ(ReplayCompletion(d, Box(), EnvConfig{}), 1.0);
}

TEST(PlanExpertTest, ClosureRampsAfterArrival) {
  Demo d = PlanExpert(Box(), Rise(40, 100, 0.1));
  int first = -1;
  for (int i = 0; i < d.length(); ++i) {
    if (d.finger_closures[i][0][0] > 0) {
      first = i;
      break;
    }
  }
  ASSERT_GT(first, 0);
  for (int k = 0; k < 10; ++k) {
    EXPECT_NEAR(d.finger_closures[first + k][0][0], 0.1 * (k + 1), 1e-12);
  }
  EXPECT_EQ(d.finger_closures[first + 10][1][0], 1.0);
}

TEST(PlanExpertTest, InfeasibleJumpNamesStep) {
  GoalTrajectory g = Rise(40, 100, 0.1);
  g.states[60].translation.x() += 0.05;
  try {
    PlanExpert(Box(), g);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("step 60"), std::string::npos)
        << e.what();
  }
}

TEST(PlanExpertTest, EarlyMotionNamesStep) {
  try {
    PlanExpert(Box(), Rise(5, 100, 0.1));
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("step 6"), std::string::npos)
        << e.what();
  }
}

TEST(KeyposeTaskTest, Examples) {
  ObjectSpec spec = Box();
  GoalTrajectory flat = KeyposeTask(spec, 0.0, Vec3::Zero(), 200);
  for (const ObjectState& s : flat.states) {
    EXPECT_EQ(s.translation, Vec3::Zero());
  }
  GoalTrajectory lift = KeyposeTask(spec, 0.15, Vec3(0.1, -0.05, 0.0), 200);
  double top = 0.0;
  for (const ObjectState& s : lift.states) top = std::max(top, s.translation.z());
  EXPECT_EQ(top, 0.15);
  EXPECT_EQ(lift.states.back().translation, Vec3(0.1, -0.05, 0.0));
  EXPECT_EQ(ReplayCompletion(PlanExpert(spec, lift), spec, EnvConfig{}), 1.0);

  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    GoalTrajectory g = KeyposeTask(spec, rng, 200);
    EXPECT_EQ(ReplayCompletion(PlanExpert(spec, g), spec, EnvConfig{}), 1.0);
  }
}

TEST(GenDatasetTest, SplitsAndValidity) {
  Rng rng(11);
  DemoSet set = GenDataset(DefaultCategories(), DatasetConfig{}, rng);
  ASSERT_EQ(set.size(), 100);
  for (int c = 0; c < 4; ++c) {
    int trained = 0, unseen = 0;
    for (int i = 0; i < set.size(); ++i) {
      if (set.demos[i].category_id != c) continue;
      trained += set.splits[i] == Split::kTrained;
      unseen += set.splits[i] == Split::kUnseenTraj;
    }
    EXPECT_EQ(trained, 16);
    EXPECT_EQ(unseen, 4);
  }
  for (int i : set.Indices(Split::kUnseenObj)) {
    EXPECT_EQ(set.demos[i].category_id, 4);
  }
  for (int i : set.Indices(Split::kTrained)) {
    EXPECT_NE(set.demos[i].category_id, 4);
  }
  EnvConfig config;
  for (const Demo& d : set.demos) {
    EXPECT_NO_THROW(d.Validate(config));
    EXPECT_EQ(ReplayCompletion(d, set.SpecFor(d), config), 1.0);
  }
  EXPECT_EQ(set.demos[ReferenceDemo(set)].task, "lift_and_place");
}

TEST(GenDatasetTest, SeededDeterminism) {
  DatasetConfig cfg;
  cfg.per_category = 5;
  Rng a(5), b(5), c(6);
  DemoSet x = GenDataset(DefaultCategories(), cfg, a);
  DemoSet y = GenDataset(DefaultCategories(), cfg, b);
  DemoSet z = GenDataset(DefaultCategories(), cfg, c);
  ASSERT_EQ(x.size(), y.size());
  for (int i = 0; i < x.size(); ++i) {
    EXPECT_EQ(DemoToJson(x.demos[i]).dump(), DemoToJson(y.demos[i]).dump());
  }
  EXPECT_NE(DemoToJson(x.demos[0]).dump(), DemoToJson(z.demos[0]).dump());
  EXPECT_THROW(GenDataset({Box()}, cfg, a), std::invalid_argument);
}

TEST(DemoSetFileTest, RoundTrip) {
  DatasetConfig cfg;
  cfg.per_category = 3;
  cfg.steps = 120;
  Rng rng(8);
  DemoSet set = GenDataset(DefaultCategories(), cfg, rng);
  set.demos[0].scale = Vec3(1.1, 0.9, 1.0);
  set.demos[0].initial_state = set.demos[0].object_states[0];
  auto dir = std::filesystem::temp_directory_path() / "hierdex_demoset_test";
  SaveDemoSet(set, dir.string());
  DemoSet back = LoadDemoSet(dir.string());
  ASSERT_EQ(back.size(), set.size());
  for (int i = 0; i < set.size(); ++i) {
    EXPECT_EQ(DemoToJson(back.demos[i]).dump(), DemoToJson(set.demos[i]).dump());
    EXPECT_EQ(back.splits[i], set.splits[i]);
  }
  EXPECT_EQ(back.SpecFor(back.demos[0]).dims.x(),
            set.SpecFor(set.demos[0]).dims.x());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace hierdex
