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

#ifndef HIERDEX_RL_H_
#define HIERDEX_RL_H_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hierdex/env.h"
#include "hierdex/expert.h"
#include "hierdex/metrics.h"
#include "hierdex/net.h"
#include "hierdex/planner.h"

namespace hierdex {

struct RewardWeights {
  double rotation = 20.0;
  double translation = 1.0;  // per meter
  double joint = 5.0;
};

// exp(-(wr * angle + wt * |dt| + wj * |dj|)); the joint term needs both.
double Reward(const ObjectState& goal, const ObjectState& current,
              const RewardWeights& w = RewardWeights{});

struct ResidualBounds {
  double max_translation = 0.04;  // per axis, meters
  double max_rotation = 0.5;      // axis-angle norm, radians
};

struct HandResidual {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();  // axis-angle, applied in the wrist frame
};

struct Command {
  WristAction wrists;
  FingerCommands fingers;
};

Command ComposeAction(const WristAction& planner,
                      const std::array<HandResidual, 2>& residual,
                      const FingerCommands& fingers, const ResidualBounds& b);

// exp(-mean fingertip distance); throws on mismatched finger counts.
double FingertipReward(const std::array<std::vector<Vec3>, 2>& demo,
                       const std::array<std::vector<Vec3>, 2>& robot);

// dones[t] marks a terminal transition; bootstrap values the state after
// the last step when it is not terminal.
void Gae(std::span<const double> rewards, std::span<const double> values,
         std::span<const uint8_t> dones, double bootstrap, double gamma,
         double lambda, std::vector<double>* advantages,
         std::vector<double>* returns);

enum class ControlMode { kHierarchical, kVanilla, kNoResidual };
std::string ControlModeName(ControlMode m);
ControlMode ControlModeFromName(const std::string& name);

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatches = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int steps_per_update = 2048;
  double lr = 3e-4;
  ControlMode mode = ControlMode::kHierarchical;
  double fingertip_reward_coef = 0.0;
  int updates = 200;
  int lanes = 8;
  int hidden = 128;
  double init_log_std = -0.7;
  double max_grad_norm = 0.5;
  double residual_translation_scale = 0.01;  // meters per unit action
  double residual_rotation_scale = 0.1;      // radians per unit action
  double vanilla_translation_scale = 0.2;
  double vanilla_rotation_scale = 0.5;
  // Finger command for a zero action, inside the attach band.
  double finger_offset = 0.85;
  double finger_scale = 0.5;
  RewardWeights reward;
  ResidualBounds bounds;
  int workers = 0;
};

Json PpoConfigToJson(const PpoConfig& c);
PpoConfig PpoConfigFromJson(const Json& j);

int ActionDim(ControlMode mode, int fingers);

// Maps a raw policy action to env commands for the given mode.
Command ActionToCommand(const PpoConfig& c, const EnvConfig& env,
                        const WristAction* plan, const Vector& action);

// Policy, value function and observation statistics of pi^L.
class Controller {
 public:
  Controller() = default;
  Controller(const PpoConfig& config, int obs_dim, int action_dim);

  void Init(Rng& rng);
  int obs_dim() const { return policy.obs_dim(); }
  int action_dim() const { return policy.action_dim(); }
  Vector Normalize(std::span<const double> obs) const;
  Vector MeanAction(std::span<const double> obs) const;

  Checkpoint ToCheckpoint() const;
  static Controller FromCheckpoint(const Checkpoint& c);

  GaussianPolicy policy;
  Mlp value;
  RunningNorm norm;
  Adam adam_mean, adam_log_std, adam_value;
};

struct PpoBatch {
  Matrix obs;      // normalized, obs_dim x N
  Matrix actions;  // action_dim x N
  Vector log_probs, advantages, returns;
  int size() const { return static_cast<int>(obs.cols()); }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double ratio_mean_start = 0.0;
  double ratio_mean_end = 0.0;
};

// Clipped-surrogate update. Throws std::runtime_error on a NaN loss.
UpdateStats PpoUpdate(Controller& c, const PpoBatch& batch,
                      const PpoConfig& config, Rng& rng);

struct AugmentConfig {
  bool scale = false;
  std::array<double, 2> scale_range = {0.9, 1.1};
  bool init = false;
  double init_offset = 0.02;
  double init_yaw = M_PI / 6;  // yaw drawn from [0, init_yaw]
  bool goal = false;
  double goal_offset = 0.02;
  int goal_min_span = 20;
  double time_gap_prob = 0.0;  // chance of a random-gap re-timed goal
  bool process_noise = false;
};

Json AugmentConfigToJson(const AugmentConfig& c);
AugmentConfig AugmentConfigFromJson(const Json& j);

struct TaskItem {
  ObjectSpec spec;
  GoalTrajectory goal;
  const Demo* demo = nullptr;  // fingertip targets, aligned with goal
  std::string task;
};

struct EpisodeSetup {
  ObjectSpec spec;
  GoalTrajectory goal;
  ObjectState initial;
  Vec3 scale = Vec3::Ones();
  InitPerturbation init;
  GoalPerturbation goal_perturbation;
  const Demo* demo = nullptr;
  std::string task;
  uint64_t noise_seed = 0;
  bool process_noise = false;
};

EpisodeSetup SampleEpisode(const TaskItem& item, const AugmentConfig& a,
                           Rng& rng);

// Fixed, shared inputs of every rollout.
struct RolloutContext {
  const Planner* planner = nullptr;  // unused in vanilla mode
  PpoConfig ppo;
  EnvConfig env;
  CompletionThresholds thresholds;
  ObsMode obs_mode = ObsMode::kTeacher;
  int window = kDefaultWindow;

  int obs_dim() const;
  int action_dim() const { return ActionDim(ppo.mode, env.fingers); }
};

struct StepContext {
  const WorldState& state;
  const GoalTrajectory& goal;
  const std::vector<WristAction>& plan;
  const std::vector<double>& obs;
  int t;
};

struct Decision {
  Vector action;
  double log_prob = 0.0;
  std::optional<Command> command;  // bypasses the action mapping
};

using Actor = std::function<Decision(const StepContext&, Rng&)>;

// Policy mean (deterministic) or sample (stochastic) actors.
Actor PolicyActor(const Controller& c, bool stochastic);
// Open-loop replay of a demo's commands, indexed by step.
Actor ReplayActor(const Demo& d);

struct EpisodeResult {
  double completion = 0.0;
  double total_reward = 0.0;
  int steps = 0;
  std::vector<ObjectState> states;
};

// Steps one episode; used directly by the lanes and by evaluation.
class EpisodeRunner {
 public:
  EpisodeRunner(const RolloutContext& ctx, EpisodeSetup setup);

  bool done() const { return done_; }
  int t() const { return t_; }
  const std::vector<double>& obs() const { return obs_; }
  StepContext context() const;
  double Apply(const Decision& d);
  EpisodeResult result() const;
  // Demo of this episode against its goal. With relabel, each hand that
  // grasped gets the canonical carry pose on the reached object states from
  // its first attach on, and its approach is bent onto that grasp.
  Demo ToDemo(bool relabel = true) const;
  const EpisodeSetup& setup() const { return setup_; }
  const Env& env() const { return env_; }

 private:
  void Prepare();

  const RolloutContext* ctx_;
  EpisodeSetup setup_;
  Env env_;
  Rng obs_rng_;
  std::vector<double> prev_action_;
  std::vector<WristAction> plan_;
  std::vector<double> obs_;
  std::vector<ObjectState> states_;
  std::vector<Command> commands_;
  std::vector<std::array<std::vector<Vec3>, 2>> tips_;
  std::array<int, 2> first_attach_ = {-1, -1};
  int t_ = 0;
  bool done_ = false;
  double completion_ = 0.0;
  double total_reward_ = 0.0;
};

EpisodeResult RunEpisode(const RolloutContext& ctx, const EpisodeSetup& setup,
                         const Actor& actor, Rng& rng,
                         std::optional<Demo>* demo = nullptr);

// Parallel over setups; actors must be safe to call concurrently.
std::vector<EpisodeResult> RunEpisodes(const RolloutContext& ctx,
                                       const std::vector<EpisodeSetup>& setups,
                                       const Actor& actor, uint64_t seed,
                                       std::vector<std::optional<Demo>>* demos =
                                           nullptr);

using TaskSampler = std::function<EpisodeSetup(Rng&)>;

// Uniform over items with the augmentation applied per episode.
TaskSampler MakeSampler(std::vector<TaskItem> items, AugmentConfig augment);

struct TrainLogRow {
  int update = 0;
  int episodes = 0;
  double mean_return = 0.0;
  double mean_completion = 0.0;
  UpdateStats stats;
};

void WriteTrainLogCsv(const std::vector<TrainLogRow>& rows,
                      const std::string& path, const std::string& header);

// Persistent parallel rollout lanes plus the PPO update loop.
class Trainer {
 public:
  Trainer(const RolloutContext& ctx, TaskSampler sampler, Controller controller,
          uint64_t seed);

  TrainLogRow Update();
  std::vector<TrainLogRow> Train(
      int updates, const std::function<void(const TrainLogRow&)>& on_update =
                       nullptr);

  const Controller& controller() const { return controller_; }
  Controller& controller() { return controller_; }
  void set_sampler(TaskSampler s) { sampler_ = std::move(s); }

 private:
  struct Lane {
    Rng rng;
    std::optional<EpisodeRunner> runner;
    double episode_return = 0.0;
  };
  struct LaneBuffer {
    std::vector<std::vector<double>> raw_obs;
    std::vector<Vector> actions;
    std::vector<double> log_probs, rewards, values;
    std::vector<uint8_t> dones;
    double bootstrap = 0.0;
    std::vector<double> completions, returns;
  };
  void Collect(Lane& lane, int steps, LaneBuffer& buf);

  const RolloutContext* ctx_;
  TaskSampler sampler_;
  Controller controller_;
  Rng rng_;
  std::vector<Lane> lanes_;
  int updates_ = 0;
};

Controller NewController(const RolloutContext& ctx, Rng& rng);

// The reference demo of the set as a task.
TaskItem ReferenceItem(const DemoSet& set);

// Fresh controller trained for ctx.ppo.updates updates; everything random
// derives from seed.
Controller TrainController(
    const RolloutContext& ctx, const std::vector<TaskItem>& items,
    const AugmentConfig& augment, uint64_t seed,
    const std::function<void(const TrainLogRow&)>& on_update = nullptr);

}  // namespace hierdex

#endif  // HIERDEX_RL_H_
