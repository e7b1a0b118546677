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

#include "hierdex/rl.h"

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

namespace hierdex {
namespace {

ObjectState At(double x, double y, double z) {
  ObjectState s;
  s.translation = Vec3(x, y, z);
  return s;
}

TEST(RewardTest, KnownValues) {
  ObjectState g = At(0, 0, 0);
  EXPECT_DOUBLE_EQ(Reward(g, g), 1.0);
  EXPECT_NEAR(Reward(g, At(0.1, 0, 0)), std::exp(-0.1), 1e-15);
  ObjectState r = g;
  r.rotation = Rot::FromAxisAngle(Vec3::UnitZ(), 0.05);
  EXPECT_NEAR(Reward(g, r), std::exp(-1.0), 1e-12);
  ObjectState ja = g, jb = g;
  ja.joint_angle = 0.3;
  jb.joint_angle = 0.5;
  EXPECT_NEAR(Reward(ja, jb), std::exp(-1.0), 1e-12);
  // A joint only on one side is ignored.
  EXPECT_DOUBLE_EQ(Reward(ja, g), 1.0);
}

TEST(RewardTest, MonotoneInEachError) {
  ObjectState g = At(0, 0, 0);
  double prev = 2.0;
  for (double d = 0.0; d < 0.3; d += 0.01) {
    double r = Reward(g, At(d, 0, 0));
    EXPECT_LT(r, prev);
    EXPECT_GT(r, 0.0);
    prev = r;
  }
  prev = 2.0;
  for (double a = 0.0; a < 1.0; a += 0.05) {
    ObjectState c = g;
    c.rotation = Rot::FromAxisAngle(Vec3(1, 1, 0).normalized(), a);
    double r = Reward(g, c);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(ComposeTest, ClampsResiduals) {
  WristAction plan;
  plan.left = Pose{Vec3(0.1, 0.2, 0.3), Rot::FromAxisAngle(Vec3::UnitY(), 0.4)};
  plan.right = Pose{Vec3(-0.1, 0.2, 0.3), Rot()};
  std::array<HandResidual, 2> res;
  res[0].translation = Vec3(0.1, -0.1, 0.01);
  res[0].rotation = Vec3(0, 0, 1.2);
  res[1].rotation = Vec3(0.1, 0, 0);
  FingerCommands f = {std::vector<double>{-0.5, 0.3}, std::vector<double>{1.5, 1.0}};
  Command c = ComposeAction(plan, res, f, ResidualBounds{});
  EXPECT_TRUE(c.wrists.left.translation.isApprox(Vec3(0.14, 0.16, 0.31)));
  Rot expected = plan.left.rotation * Rot::FromAxisAngle(Vec3::UnitZ(), 0.5);
  EXPECT_LT(QuatAngle(c.wrists.left.rotation, expected), 1e-12);
  EXPECT_NEAR(QuatAngle(c.wrists.right.rotation, plan.right.rotation), 0.1, 1e-12);
  EXPECT_EQ(c.wrists.right.translation, plan.right.translation);
  EXPECT_EQ(c.fingers[0], (std::vector<double>{0.0, 0.3}));
  EXPECT_EQ(c.fingers[1], (std::vector<double>{1.0, 1.0}));
}

TEST(ComposeTest, BoundsHoldForRandomResiduals) {
  Rng rng(3);
  WristAction plan;
  for (int i = 0; i < 500; ++i) {
    std::array<HandResidual, 2> res;
    for (auto& r : res) {
      r.translation = Vec3::Random() * 0.3;
      r.rotation = Vec3::Random() * 3.0;
    }
    Command c = ComposeAction(plan, res, {}, ResidualBounds{});
    for (int h = 0; h < 2; ++h) {
      EXPECT_LE(c.wrists.hand(h).translation.cwiseAbs().maxCoeff(), 0.04 + 1e-15);
      EXPECT_LE(QuatAngle(c.wrists.hand(h).rotation, Rot()), 0.5 + 1e-12);
    }
  }
}

TEST(FingertipRewardTest, MeanDistance) {
  std::array<std::vector<Vec3>, 2> a = {std::vector<Vec3>{Vec3::Zero(), Vec3::Zero()},
                                        std::vector<Vec3>{Vec3::Zero(), Vec3::Zero()}};
  auto b = a;
  for (auto& hand : b) {
    for (Vec3& p : hand) p.x() = 0.1;
  }
  EXPECT_NEAR(FingertipReward(a, b), std::exp(-0.1), 1e-15);
  EXPECT_DOUBLE_EQ(FingertipReward(a, a), 1.0);
  b[1].pop_back();
  EXPECT_THROW(FingertipReward(a, b), std::invalid_argument);
}

TEST(GaeTest, HandComputed) {
  std::vector<double> r = {1, 0, 2}, v = {0.5, 0.25, 1.0}, adv, ret;
  std::vector<uint8_t> done = {0, 0, 1};
  Gae(r, v, done, 100.0, 0.9, 0.5, &adv, &ret);
  double d2 = 2 - 1.0;
  double d1 = 0 + 0.9 * 1.0 - 0.25;
  double d0 = 1 + 0.9 * 0.25 - 0.5;
  EXPECT_NEAR(adv[2], d2, 1e-15);
  EXPECT_NEAR(adv[1], d1 + 0.45 * d2, 1e-15);
  EXPECT_NEAR(adv[0], d0 + 0.45 * (d1 + 0.45 * d2), 1e-15);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(ret[k], adv[k] + v[k]);

  // Bootstrap enters only when the last step is not terminal.
  done = {0, 0, 0};
  Gae(r, v, done, 10.0, 0.9, 0.5, &adv, &ret);
  EXPECT_NEAR(adv[2], 2 + 9.0 - 1.0, 1e-15);
}

TEST(GaeTest, LambdaOneIsMonteCarlo) {
  Rng rng(5);
  std::vector<double> r(40), v(40);
  std::vector<uint8_t> done(40, 0);
  for (int k = 0; k < 40; ++k) {
    r[k] = rng.Uniform(-1, 1);
    v[k] = rng.Uniform(-1, 1);
  }
  done[17] = 1;
  done[39] = 1;
  std::vector<double> adv, ret;
  Gae(r, v, done, 0.0, 0.95, 1.0, &adv, &ret);
  for (int k = 0; k < 40; ++k) {
    double g = 0.0, disc = 1.0;
    for (int j = k; j < 40; ++j) {
      g += disc * r[j];
      disc *= 0.95;
      if (done[j]) break;
    }
    EXPECT_NEAR(ret[k], g, 1e-12) << k;
  }
}

TEST(ActionTest, Dimensions) {
  EXPECT_EQ(ActionDim(ControlMode::kHierarchical, 4), 20);
  EXPECT_EQ(ActionDim(ControlMode::kVanilla, 4), 20);
  EXPECT_EQ(ActionDim(ControlMode::kNoResidual, 4), 8);
  for (ControlMode m : {ControlMode::kHierarchical, ControlMode::kVanilla,
                        ControlMode::kNoResidual}) {
    EXPECT_EQ(ControlModeFromName(ControlModeName(m)), m);
  }
  EXPECT_THROW(ControlModeFromName("ppo"), std::invalid_argument);
}

TEST(ActionTest, ZeroActionFollowsPlanOrHome) {
  EnvConfig env;
  PpoConfig c;
  WristAction plan;
  plan.left.translation = Vec3(0.3, 0.1, 0.2);
  Vector a = Vector::Zero(20);
  Command cmd = ActionToCommand(c, env, &plan, a);
  EXPECT_EQ(cmd.wrists.left.translation, plan.left.translation);
  EXPECT_EQ(cmd.fingers[0], std::vector<double>(env.fingers, 0.85));
  c.mode = ControlMode::kVanilla;
  cmd = ActionToCommand(c, env, nullptr, a);
  EXPECT_EQ(cmd.wrists.right.translation, env.home(1).translation);
  c.mode = ControlMode::kHierarchical;
  EXPECT_THROW(ActionToCommand(c, env, nullptr, a), std::invalid_argument);
  EXPECT_THROW(ActionToCommand(c, env, &plan, Vector::Zero(8)),
               std::invalid_argument);
}

TEST(PpoConfigTest, JsonRoundTripAndStrictKeys) {
  PpoConfig c;
  c.mode = ControlMode::kVanilla;
  c.lanes = 3;
  c.reward.rotation = 7;
  PpoConfig back = PpoConfigFromJson(PpoConfigToJson(c));
  EXPECT_EQ(PpoConfigToJson(back), PpoConfigToJson(c));
  EXPECT_THROW(PpoConfigFromJson(Json{{"lr_typo", 1}}), std::invalid_argument);
  EXPECT_THROW(PpoConfigFromJson(Json{{"reward", {{"rot", 1}}}}),
               std::invalid_argument);
  EXPECT_THROW(PpoConfigFromJson(Json{{"clip", 0}}), std::invalid_argument);
  EXPECT_EQ(PpoConfigFromJson(Json{{"lr", 0.01}}).lr, 0.01);
  AugmentConfig a;
  a.scale = true;
  EXPECT_EQ(AugmentConfigToJson(AugmentConfigFromJson(AugmentConfigToJson(a))),
            AugmentConfigToJson(a));
}

PpoBatch RandomBatch(Controller& c, Rng& rng, int n) {
  PpoBatch b;
  b.obs = Matrix::Random(c.obs_dim(), n);
  b.actions.resize(c.action_dim(), n);
  b.log_probs.resize(n);
  for (int k = 0; k < n; ++k) {
    double lp;
    b.actions.col(k) = c.policy.Sample(b.obs.col(k), rng, &lp);
    b.log_probs[k] = lp;
  }
  b.advantages = Vector::Zero(n);
  b.returns = Vector::Zero(n);
  return b;
}

TEST(PpoUpdateTest, RatioStartsAtOneAndStatsAreFinite) {
  PpoConfig cfg;
  cfg.hidden = 16;
  Controller c(cfg, 3, 2);
  Rng rng(1);
  c.Init(rng);
  PpoBatch b = RandomBatch(c, rng, 64);
  for (int k = 0; k < 64; ++k) b.advantages[k] = rng.Normal();
  UpdateStats s = PpoUpdate(c, b, cfg, rng);
  EXPECT_NEAR(s.ratio_mean_start, 1.0, 1e-12);
  EXPECT_NE(s.ratio_mean_end, 1.0);
  EXPECT_GE(s.kl, 0.0);
  EXPECT_GE(s.clip_fraction, 0.0);
  EXPECT_LE(s.clip_fraction, 1.0);
  EXPECT_TRUE(std::isfinite(s.policy_loss) && std::isfinite(s.value_loss));
}

TEST(PpoUpdateTest, ZeroAdvantageOnlyMovesEntropy) {
  PpoConfig cfg;
  cfg.hidden = 16;
  cfg.entropy_coef = 0.0;
  Controller c(cfg, 3, 2);
  Rng rng(2);
  c.Init(rng);
  Vector before = c.policy.mean.params();
  Vector log_std = c.policy.log_std;
  PpoBatch b = RandomBatch(c, rng, 32);
  PpoUpdate(c, b, cfg, rng);
  EXPECT_EQ(c.policy.mean.params(), before);
  EXPECT_EQ(c.policy.log_std, log_std);
  cfg.entropy_coef = 0.01;
  PpoUpdate(c, b, cfg, rng);
  EXPECT_GT(c.policy.log_std.minCoeff(), log_std.maxCoeff());
}

TEST(PpoUpdateTest, NanBatchThrows) {
  PpoConfig cfg;
  cfg.hidden = 8;
  Controller c(cfg, 2, 1);
  Rng rng(4);
  c.Init(rng);
  PpoBatch b = RandomBatch(c, rng, 8);
  b.returns[3] = std::nan("");
  EXPECT_THROW(PpoUpdate(c, b, cfg, rng), std::runtime_error);
}

// A contextual bandit: the best action equals the observation.
TEST(PpoUpdateTest, LearnsToyBandit) {
  PpoConfig cfg;
  cfg.hidden = 32;
  cfg.lr = 3e-3;
  Controller c(cfg, 1, 1);
  Rng rng(7);
  c.Init(rng);
  auto round = [&](bool learn) {
    const int n = 256;
    PpoBatch b;
    b.obs.resize(1, n);
    b.actions.resize(1, n);
    b.log_probs.resize(n);
    b.returns.resize(n);
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      b.obs(0, k) = rng.Uniform(-1, 1);
      double lp;
      b.actions.col(k) = c.policy.Sample(b.obs.col(k), rng, &lp);
      b.log_probs[k] = lp;
      double d = b.actions(0, k) - b.obs(0, k);
      b.returns[k] = std::exp(-10 * d * d);
      total += b.returns[k];
    }
    b.advantages = b.returns - c.value.Forward(b.obs).row(0).transpose();
    if (learn) PpoUpdate(c, b, cfg, rng);
    return total / n;
  };
  double first = round(false);
  for (int u = 0; u < 50; ++u) round(true);
  double last = round(false);
  EXPECT_GT(last, 3.0 * first) << first << " -> " << last;
}

TEST(ControllerTest, CheckpointRoundTrip) {
  PpoConfig cfg;
  cfg.hidden = 8;
  Controller c(cfg, 5, 3);
  Rng rng(9);
  c.Init(rng);
  c.norm.Update(Matrix::Random(5, 20));
  auto path = std::filesystem::temp_directory_path() / "hierdex_ctrl.bin";
  c.ToCheckpoint().Save(path.string());
  Controller back = Controller::FromCheckpoint(Checkpoint::Load(path.string()));
  std::vector<double> obs = {0.1, -0.2, 0.3, 0.4, 2.0};
  EXPECT_EQ(back.MeanAction(obs), c.MeanAction(obs));
  EXPECT_EQ(back.value.params(), c.value.params());
}

struct Fixture {
  DemoSet set;
  Demo demo;
  RolloutContext ctx;

  Fixture() {
    DatasetConfig cfg;
    cfg.per_category = 2;
    cfg.steps = 120;
    Rng rng(11);
    set = GenDataset(DefaultCategories(), cfg, rng);
    demo = set.demos[ReferenceDemo(set)];
    ctx.ppo.mode = ControlMode::kVanilla;
    ctx.ppo.hidden = 16;
  }

  EpisodeSetup Setup(bool noise) const {
    EpisodeSetup s;
    s.spec = set.SpecFor(demo);
    s.goal = demo.goal();
    s.initial = s.goal[0];
    s.demo = &demo;
    s.task = demo.task;
    s.noise_seed = 77;
    s.process_noise = noise;
    return s;
  }
};

TEST(EpisodeTest, ExpertReplayEarnsNearMaxReward) {
  Fixture f;
  Rng rng(1);
  for (bool noise : {false, true}) {
    EpisodeResult r = RunEpisode(f.ctx, f.Setup(noise), ReplayActor(f.demo), rng);
    EXPECT_EQ(r.completion, 1.0);
    EXPECT_EQ(r.steps, f.demo.length() - 1);
    EXPECT_GE(r.total_reward / r.steps, std::exp(-0.101)) << noise;
  }
}

TEST(EpisodeTest, RandomPolicyFailsEarly) {
  Fixture f;
  Rng rng(2);
  Controller c = NewController(f.ctx, rng);
  c.policy.log_std.setConstant(0.5);
  EpisodeResult r = RunEpisode(f.ctx, f.Setup(false), PolicyActor(c, true), rng);
  EXPECT_LT(r.completion, 1.0);
  EXPECT_LT(r.steps, f.demo.length() - 1);
}

TEST(EpisodeTest, ToDemoReplaysItself) {
  Fixture f;
  Rng rng(3);
  std::optional<Demo> out;
  RunEpisode(f.ctx, f.Setup(false), ReplayActor(f.demo), rng, &out);
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ(out->length(), f.demo.length());
  EXPECT_EQ(ReplayCompletion(*out, f.set.SpecFor(f.demo), f.ctx.env,
                             f.ctx.thresholds),
            1.0);
}

TEST(EpisodeTest, ParallelMatchesSerial) {
  Fixture f;
  Rng rng(4);
  Controller c = NewController(f.ctx, rng);
  std::vector<EpisodeSetup> setups;
  AugmentConfig aug;
  aug.init = true;
  aug.scale = true;
  TaskItem item{f.set.SpecFor(f.demo), f.demo.goal(), &f.demo, f.demo.task};
  for (int i = 0; i < 4; ++i) setups.push_back(SampleEpisode(item, aug, rng));
  auto a = RunEpisodes(f.ctx, setups, PolicyActor(c, false), 9);
  auto b = RunEpisodes(f.ctx, setups, PolicyActor(c, false), 9);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(a[i].completion, b[i].completion);
    EXPECT_EQ(a[i].total_reward, b[i].total_reward);
  }
}

TEST(TrainerTest, UpdateProducesFiniteStatsAndEpisodes) {
  Fixture f;
  f.ctx.ppo.steps_per_update = 256;
  f.ctx.ppo.lanes = 2;
  Rng rng(5);
  TaskItem item{f.set.SpecFor(f.demo), f.demo.goal(), &f.demo, f.demo.task};
  Trainer t(f.ctx, MakeSampler({item}, AugmentConfig{}), NewController(f.ctx, rng),
            6);
  std::vector<TrainLogRow> rows = t.Train(2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GT(rows[0].episodes + rows[1].episodes, 0);
  EXPECT_TRUE(std::isfinite(rows[1].stats.policy_loss));
  EXPECT_GT(t.controller().norm.count(), 0.0);
}

}  // namespace
}  // namespace hierdex
