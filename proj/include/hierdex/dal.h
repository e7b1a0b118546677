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

#ifndef HIERDEX_DAL_H_
#define HIERDEX_DAL_H_

#include <string>
#include <vector>

#include "hierdex/rl.h"

namespace hierdex {

struct DalConfig {
  int iterations = 4;
  std::array<double, 2> scale_range = {0.9, 1.1};
  double init_offset = 0.02;
  double init_yaw = M_PI / 6;
  double goal_offset = 0.02;
  int goal_min_span = 20;
  int rl_updates_per_iter = 50;
  int harvest_episodes = 32;
  // Harvest with sampled actions: reaches configurations the mean misses.
  bool harvest_stochastic = true;
};

Json DalConfigToJson(const DalConfig& c);
DalConfig DalConfigFromJson(const Json& j);

// Augmentation used for training and harvesting inside the loop.
AugmentConfig DalAugment(const DalConfig& c);

struct DalIterationStats {
  int iter = 0;
  int episodes = 0;
  int harvested = 0;
  double completion_mean = 0.0;
  double completion_std = 0.0;
};

// Everything the loop improves. The dataset only grows.
struct DalState {
  Planner planner;
  Controller controller;
  DemoSet dataset;
};

// Runs the setups with actor and keeps the fully completed episodes whose
// relabeled demo also replays to completion. Fills the episode statistics.
DemoSet Harvest(const RolloutContext& ctx,
                const std::vector<EpisodeSetup>& setups, const Actor& actor,
                uint64_t seed, DalIterationStats* stats);

// One round: RL under augmentation, harvest of fully
// completed episodes that also replay cleanly, then planner fine-tuning.
DalIterationStats DalIteration(DalState& state, const RolloutContext& base,
                               const std::vector<TaskItem>& items,
                               const DalConfig& config, int iter, Rng& rng,
                               DemoSet* harvest = nullptr);

std::vector<DalIterationStats> DalRun(
    DalState& state, const RolloutContext& base,
    const std::vector<TaskItem>& items, const DalConfig& config, Rng& rng,
    const std::function<void(const DalIterationStats&)>& on_iter = nullptr);

// Columns iter, episodes, harvested, completion_mean, completion_std.
void WriteDalReportCsv(const std::vector<DalIterationStats>& rows,
                       const std::string& path, const std::string& header);

}  // namespace hierdex

#endif  // HIERDEX_DAL_H_
