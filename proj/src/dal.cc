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

#include "hierdex/dal.h"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace hierdex {

Json DalConfigToJson(const DalConfig& c) {
  return {{"iterations", c.iterations},
          {"scale_range", c.scale_range},
          {"init_offset", c.init_offset},
          {"init_yaw", c.init_yaw},
          {"goal_offset", c.goal_offset},
          {"goal_min_span", c.goal_min_span},
          {"rl_updates_per_iter", c.rl_updates_per_iter},
          {"harvest_episodes", c.harvest_episodes},
          {"harvest_stochastic", c.harvest_stochastic}};
}

DalConfig DalConfigFromJson(const Json& j) {
  DalConfig c;
  Json d = OverlayKeys(DalConfigToJson(c), j, "dal");
  c.iterations = d["iterations"];
  c.scale_range = d["scale_range"];
  c.init_offset = d["init_offset"];
  c.init_yaw = d["init_yaw"];
  c.goal_offset = d["goal_offset"];
  c.goal_min_span = d["goal_min_span"];
  c.rl_updates_per_iter = d["rl_updates_per_iter"];
  c.harvest_episodes = d["harvest_episodes"];
  c.harvest_stochastic = d["harvest_stochastic"];
  if (c.iterations < 1) throw std::invalid_argument("dal needs iterations >= 1");
  if (!(c.scale_range[0] > 0 && c.scale_range[0] <= c.scale_range[1]) ||
      c.init_offset < 0 || c.init_yaw < 0 || c.goal_offset < 0) {
    throw std::invalid_argument("dal ranges must be nonnegative and ordered");
  }
  if (c.rl_updates_per_iter < 0 || c.harvest_episodes < 0) {
    throw std::invalid_argument("dal counts must be nonnegative");
  }
  return c;
}

AugmentConfig DalAugment(const DalConfig& c) {
  AugmentConfig a;
  a.scale = true;
  a.scale_range = c.scale_range;
  a.init = true;
  a.init_offset = c.init_offset;
  a.init_yaw = c.init_yaw;
  a.goal = true;
  a.goal_offset = c.goal_offset;
  a.goal_min_span = c.goal_min_span;
  return a;
}

DemoSet Harvest(const RolloutContext& ctx,
                const std::vector<EpisodeSetup>& setups, const Actor& actor,
                uint64_t seed, DalIterationStats* stats) {
  std::vector<std::optional<Demo>> demos;
  std::vector<EpisodeResult> results =
      RunEpisodes(ctx, setups, actor, seed, &demos);
  DemoSet harvested;
  double sum = 0.0, sq = 0.0;
  for (size_t e = 0; e < results.size(); ++e) {
    sum += results[e].completion;
    sq += results[e].completion * results[e].completion;
    if (results[e].completion < 1.0 || !demos[e]) continue;
    // keep only episodes the open-loop replay confirms
    if (ReplayCompletion(*demos[e], setups[e].spec, ctx.env, ctx.thresholds) <
        1.0) {
      continue;
    }
    harvested.Append(*demos[e], Split::kTrained);
  }
  if (stats) {
    stats->episodes = static_cast<int>(results.size());
    stats->harvested = harvested.size();
    if (stats->episodes > 0) {
      stats->completion_mean = sum / stats->episodes;
      const double var = sq / stats->episodes -
                         stats->completion_mean * stats->completion_mean;
      stats->completion_std = std::sqrt(std::max(0.0, var));
    }
  }
  return harvested;
}

DalIterationStats DalIteration(DalState& state, const RolloutContext& base,
                               const std::vector<TaskItem>& items,
                               const DalConfig& config, int iter, Rng& rng,
                               DemoSet* harvest) {
  RolloutContext ctx = base;
  ctx.planner = &state.planner;
  const AugmentConfig augment = DalAugment(config);
  TaskSampler sampler = MakeSampler(items, augment);

  if (config.rl_updates_per_iter > 0) {
    Trainer trainer(ctx, sampler, std::move(state.controller), rng.engine()());
    trainer.Train(config.rl_updates_per_iter);
    state.controller = std::move(trainer.controller());
  }

  std::vector<EpisodeSetup> setups;
  for (int e = 0; e < config.harvest_episodes; ++e) {
    setups.push_back(sampler(rng));
  }
  DalIterationStats stats;
  stats.iter = iter;
  DemoSet harvested =
      Harvest(ctx, setups,
              PolicyActor(state.controller, config.harvest_stochastic),
              rng.engine()(), &stats);
  harvested.categories = state.dataset.categories;

  if (harvested.demos.empty()) {
    std::cerr << "dal: iteration " << iter
              << " harvested no demos; planner fine-tune skipped\n";
  } else {
    Finetune(state.planner, state.dataset, harvested, rng);
    for (const Demo& d : harvested.demos) state.dataset.Append(d, Split::kTrained);
  }
  if (harvest) *harvest = std::move(harvested);
  return stats;
}

std::vector<DalIterationStats> DalRun(
    DalState& state, const RolloutContext& base,
    const std::vector<TaskItem>& items, const DalConfig& config, Rng& rng,
    const std::function<void(const DalIterationStats&)>& on_iter) {
  if (config.iterations < 1) throw std::invalid_argument("dal needs iterations >= 1");
  std::vector<DalIterationStats> rows;
  for (int i = 0; i < config.iterations; ++i) {
    rows.push_back(DalIteration(state, base, items, config, i, rng));
    if (on_iter) on_iter(rows.back());
  }
  return rows;
}

void WriteDalReportCsv(const std::vector<DalIterationStats>& rows,
                       const std::string& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# " << header << '\n';
  out << "iter,episodes,harvested,completion_mean,completion_std\n";
  out.precision(17);
  for (const DalIterationStats& r : rows) {
    out << r.iter << ',' << r.episodes << ',' << r.harvested << ','
        << r.completion_mean << ',' << r.completion_std << '\n';
  }
}

}  // namespace hierdex
