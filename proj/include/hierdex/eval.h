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

#ifndef HIERDEX_EVAL_H_
#define HIERDEX_EVAL_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hierdex/rl.h"

namespace hierdex {

// Sampling MPC over the flat (vanilla) action space. sigma < 0 means the
// policy's initial std.
struct MpcConfig {
  int horizon = 10;
  int samples = 64;
  double sigma = -1.0;
};

Json MpcConfigToJson(const MpcConfig& c);
MpcConfig MpcConfigFromJson(const Json& j);

// Receding horizon: each step perturbs the shifted previous plan K - 1
// times (the first candidate is the plan itself), scores every candidate
// by summed reward on a copy of the env and executes the best first action.
EpisodeResult RunMpcEpisode(const RolloutContext& ctx,
                            const EpisodeSetup& setup, const MpcConfig& c,
                            Rng& rng);

std::vector<EpisodeResult> RunMpcEpisodes(
    const RolloutContext& ctx, const std::vector<EpisodeSetup>& setups,
    const MpcConfig& c, uint64_t seed);

inline const std::vector<std::string>& SuiteMethods() {
  static const std::vector<std::string> m = {
      "ours", "ours_no_dal", "ours_fr", "vanilla_rl", "expert_replay", "mpc"};
  return m;
}

inline const std::vector<std::string>& SuiteTasks() {
  static const std::vector<std::string> t = {
      "single_obj_trained_traj", "single_obj_unseen_traj", "multi_obj_trained",
      "multi_obj_unseen"};
  return t;
}

struct SuiteConfig {
  std::vector<std::string> methods = SuiteMethods();
  std::vector<std::string> tasks = SuiteTasks();
  int seeds = 10;
  int episodes_per_seed = 4;
  AugmentConfig augment;  // evaluation perturbations, none by default
  MpcConfig mpc;
  int unseen_force_category = 0;
};

Json SuiteConfigToJson(const SuiteConfig& c);
SuiteConfig SuiteConfigFromJson(const Json& j);

// Trained pieces behind one learned method. One controller is shared by
// all seeds; otherwise there must be one per seed.
struct MethodArtifacts {
  ControlMode mode = ControlMode::kHierarchical;
  const Planner* planner = nullptr;
  std::vector<const Controller*> controllers;
};

struct EvalRow {
  std::string task;
  std::string method;
  int seed = 0;
  double completion = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  RotationRule rotation_rule = RotationRule::kDimScaled;
  std::string config_hash;
  std::vector<int> seeds;
};

struct EvalAggregate {
  std::string task;
  std::string method;
  int n = 0;
  double mean = 0.0;
  std::optional<double> std;  // sample std, absent below two seeds
};

// Rows grouped by (task, method) in first-appearance order.
std::vector<EvalAggregate> Aggregate(const EvalReport& r);

// Demos making up a suite task; throws on unknown names or empty pools.
std::vector<const Demo*> TaskDemos(const DemoSet& set, const std::string& task);

// Runs methods x tasks x seeds. Episodes are drawn from Rng(base_seed)
// per (task, seed), so every method sees the same setups. Throws
// std::invalid_argument naming the cell when an artifact is missing.
EvalReport RunTaskSuite(const SuiteConfig& config, const RolloutContext& ctx,
                        const DemoSet& set,
                        const std::map<std::string, MethodArtifacts>& artifacts,
                        uint64_t base_seed, const std::string& config_hash);

// CSV columns task, method, seed, completion, rotation_rule, config_hash.
void WriteEvalCsv(const EvalReport& r, const std::string& path);
EvalReport ReadEvalCsv(const std::string& path);

// {"config_hash", "rotation_rule", "seeds", "aggregates": [{task, method,
// n, mean, std}]}; std is null below two seeds.
Json EvalReportJson(const EvalReport& r);

}  // namespace hierdex

#endif  // HIERDEX_EVAL_H_
