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

#include "hierdex/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hierdex/parallel.h"

namespace hierdex {

Json MpcConfigToJson(const MpcConfig& c) {
  return {{"horizon", c.horizon}, {"samples", c.samples}, {"sigma", c.sigma}};
}

MpcConfig MpcConfigFromJson(const Json& j) {
  Json m = OverlayKeys(MpcConfigToJson(MpcConfig{}), j, "mpc");
  MpcConfig c;
  c.horizon = m["horizon"];
  c.samples = m["samples"];
  c.sigma = m["sigma"];
  if (c.horizon < 1 || c.samples < 1) {
    throw std::invalid_argument("mpc needs horizon >= 1 and samples >= 1");
  }
  return c;
}

EpisodeResult RunMpcEpisode(const RolloutContext& ctx,
                            const EpisodeSetup& setup, const MpcConfig& c,
                            Rng& rng) {
  RolloutContext flat = ctx;
  flat.ppo.mode = ControlMode::kVanilla;
  const double sigma = c.sigma >= 0 ? c.sigma : std::exp(ctx.ppo.init_log_std);
  const int adim = flat.action_dim();
  const int n = setup.goal.size();
  const double dim = setup.spec.LongestDim();
  EpisodeRunner run(flat, setup);
  Matrix plan = Matrix::Zero(adim, c.horizon);
  while (!run.done()) {
    const int t = run.t();
    const int steps = std::min(c.horizon, n - 1 - t);
    // shift the previous plan by one step
    Matrix prior = Matrix::Zero(adim, c.horizon);
    prior.leftCols(c.horizon - 1) = plan.rightCols(c.horizon - 1);
    double best = -std::numeric_limits<double>::infinity();
    Matrix best_plan = prior;
    for (int k = 0; k < c.samples; ++k) {
      Matrix candidate = prior;
      if (k > 0) {
        for (int i = 0; i < candidate.size(); ++i) {
          candidate.data()[i] += sigma * rng.Normal();
        }
      }
      Env sim = run.env();
      double score = 0.0;
      for (int j = 0; j < steps; ++j) {
        Command cmd = ActionToCommand(flat.ppo, flat.env, nullptr,
                                      candidate.col(j));
        sim.Step(cmd.wrists, cmd.fingers);
        const ObjectState& goal = setup.goal[t + 1 + j];
        score += Reward(goal, sim.state().object, flat.ppo.reward);
        if (!WithinThresholds(sim.state().object, goal, flat.thresholds, dim)) {
          break;
        }
      }
      if (score > best) {
        best = score;
        best_plan = std::move(candidate);
      }
    }
    plan = std::move(best_plan);
    Decision d;
    d.action = plan.col(0);
    run.Apply(d);
  }
  return run.result();
}

std::vector<EpisodeResult> RunMpcEpisodes(
    const RolloutContext& ctx, const std::vector<EpisodeSetup>& setups,
    const MpcConfig& c, uint64_t seed) {
  std::vector<EpisodeResult> out(setups.size());
  const Rng master(seed);
  ParallelFor(static_cast<int>(setups.size()), WorkerCount(ctx.ppo.workers),
              [&](int i) {
                Rng rng = master.Derive(i);
                out[i] = RunMpcEpisode(ctx, setups[i], c, rng);
              });
  return out;
}

Json SuiteConfigToJson(const SuiteConfig& c) {
  return {{"methods", c.methods},
          {"tasks", c.tasks},
          {"seeds", c.seeds},
          {"episodes_per_seed", c.episodes_per_seed},
          {"augment", AugmentConfigToJson(c.augment)},
          {"mpc", MpcConfigToJson(c.mpc)},
          {"unseen_force_category", c.unseen_force_category}};
}

SuiteConfig SuiteConfigFromJson(const Json& j) {
  Json m = OverlayKeys(SuiteConfigToJson(SuiteConfig{}), j, "suite");
  SuiteConfig c;
  c.methods = m["methods"].get<std::vector<std::string>>();
  c.tasks = m["tasks"].get<std::vector<std::string>>();
  c.seeds = m["seeds"];
  c.episodes_per_seed = m["episodes_per_seed"];
  c.augment = AugmentConfigFromJson(m["augment"]);
  c.mpc = MpcConfigFromJson(m["mpc"]);
  c.unseen_force_category = m["unseen_force_category"];
  for (const std::string& x : c.methods) {
    if (std::find(SuiteMethods().begin(), SuiteMethods().end(), x) ==
        SuiteMethods().end()) {
      throw std::invalid_argument("unknown suite method: " + x);
    }
  }
  for (const std::string& x : c.tasks) {
    if (std::find(SuiteTasks().begin(), SuiteTasks().end(), x) ==
        SuiteTasks().end()) {
      throw std::invalid_argument("unknown suite task: " + x);
    }
  }
  if (c.seeds < 1 || c.episodes_per_seed < 1) {
    throw std::invalid_argument("suite needs seeds >= 1 and episodes >= 1");
  }
  return c;
}

std::vector<EvalAggregate> Aggregate(const EvalReport& r) {
  std::vector<EvalAggregate> out;
  std::vector<std::vector<double>> values;
  for (const EvalRow& row : r.rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const EvalAggregate& a) {
      return a.task == row.task && a.method == row.method;
    });
    if (it == out.end()) {
      EvalAggregate a;
      a.task = row.task;
      a.method = row.method;
      out.push_back(std::move(a));
      values.emplace_back();
      it = out.end() - 1;
    }
    values[it - out.begin()].push_back(row.completion);
  }
  for (size_t i = 0; i < out.size(); ++i) {
    const std::vector<double>& v = values[i];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    out[i].n = static_cast<int>(v.size());
    out[i].mean = mean;
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      out[i].std = std::sqrt(ss / (v.size() - 1));
    }
  }
  return out;
}

std::vector<const Demo*> TaskDemos(const DemoSet& set,
                                   const std::string& task) {
  const Demo& ref = set.demos.at(ReferenceDemo(set));
  std::vector<const Demo*> out;
  for (int i = 0; i < set.size(); ++i) {
    const Demo& d = set.demos[i];
    const Split s = set.splits[i];
    bool take = false;
    if (task == "single_obj_trained_traj") {
      take = s == Split::kTrained && d.category_id == ref.category_id &&
             d.task == ref.task;
    } else if (task == "single_obj_unseen_traj") {
      take = s == Split::kUnseenTraj && d.category_id == ref.category_id;
    } else if (task == "multi_obj_trained") {
      take = s == Split::kTrained;
    } else if (task == "multi_obj_unseen") {
      take = s == Split::kUnseenObj;
    } else {
      throw std::invalid_argument("unknown suite task: " + task);
    }
    if (take) out.push_back(&d);
  }
  if (out.empty()) throw std::invalid_argument("no demos for task " + task);
  return out;
}

namespace {

std::string Cell(const std::string& task, const std::string& method) {
  return "(" + task + ", " + method + ")";
}

int TaskIndex(const std::string& task) {
  auto it = std::find(SuiteTasks().begin(), SuiteTasks().end(), task);
  return static_cast<int>(it - SuiteTasks().begin());
}

double Mean(const std::vector<EpisodeResult>& r) {
  double s = 0.0;
  for (const EpisodeResult& e : r) s += e.completion;
  return r.empty() ? 0.0 : s / r.size();
}

}  // namespace

EvalReport RunTaskSuite(const SuiteConfig& config, const RolloutContext& ctx,
                        const DemoSet& set,
                        const std::map<std::string, MethodArtifacts>& artifacts,
                        uint64_t base_seed, const std::string& config_hash) {
  // validate every cell before running any
  for (const std::string& task : config.tasks) {
    TaskDemos(set, task);
    for (const std::string& method : config.methods) {
      if (method == "expert_replay" || method == "mpc") continue;
      auto it = artifacts.find(method);
      if (it == artifacts.end() || it->second.controllers.empty()) {
        throw std::invalid_argument("missing controller for cell " +
                                    Cell(task, method));
      }
      const MethodArtifacts& a = it->second;
      const int nc = static_cast<int>(a.controllers.size());
      if (nc != 1 && nc != config.seeds) {
        throw std::invalid_argument("cell " + Cell(task, method) +
                                    " needs 1 or one controller per seed");
      }
      if (a.mode != ControlMode::kVanilla && a.planner == nullptr) {
        throw std::invalid_argument("missing planner for cell " +
                                    Cell(task, method));
      }
      RolloutContext m = ctx;
      m.ppo.mode = a.mode;
      for (const Controller* c : a.controllers) {
        if (c == nullptr || c->obs_dim() != m.obs_dim() ||
            c->action_dim() != m.action_dim()) {
          throw std::invalid_argument("controller does not fit cell " +
                                      Cell(task, method));
        }
      }
    }
  }

  EvalReport report;
  report.rotation_rule = ctx.thresholds.rotation_rule;
  report.config_hash = config_hash;
  for (int s = 0; s < config.seeds; ++s) report.seeds.push_back(s);
  const Rng master(base_seed);

  for (const std::string& task : config.tasks) {
    std::vector<TaskItem> items;
    for (const Demo* d : TaskDemos(set, task)) {
      items.push_back(TaskItem{set.SpecFor(*d), d->goal(), d, d->task});
    }
    TaskSampler sampler = MakeSampler(items, config.augment);
    for (int s = 0; s < config.seeds; ++s) {
      Rng draw = master.Derive(1000 * TaskIndex(task) + s);
      std::vector<EpisodeSetup> setups;
      for (int e = 0; e < config.episodes_per_seed; ++e) {
        setups.push_back(sampler(draw));
      }
      const uint64_t run_seed = draw.engine()();
      for (const std::string& method : config.methods) {
        double completion = 0.0;
        if (method == "expert_replay") {
          RolloutContext m = ctx;
          m.ppo.mode = ControlMode::kVanilla;
          std::vector<EpisodeResult> r;
          for (size_t e = 0; e < setups.size(); ++e) {
            if (setups[e].demo == nullptr) {
              throw std::invalid_argument("expert replay needs demo-aligned "
                                          "goals in cell " +
                                          Cell(task, method));
            }
            Rng rng = Rng(run_seed).Derive(e);
            r.push_back(
                RunEpisode(m, setups[e], ReplayActor(*setups[e].demo), rng));
          }
          completion = Mean(r);
        } else if (method == "mpc") {
          completion = Mean(RunMpcEpisodes(ctx, setups, config.mpc, run_seed));
        } else {
          const MethodArtifacts& a = artifacts.at(method);
          const Controller& c =
              *a.controllers[a.controllers.size() == 1 ? 0 : s];
          std::optional<Planner> forced;
          RolloutContext m = ctx;
          m.ppo.mode = a.mode;
          m.planner = a.planner;
          if (task == "multi_obj_unseen" && a.planner != nullptr &&
              config.unseen_force_category >= 0) {
            forced = *a.planner;
            forced->mutable_config().force_category =
                config.unseen_force_category;
            m.planner = &*forced;
          }
          completion =
              Mean(RunEpisodes(m, setups, PolicyActor(c, false), run_seed));
        }
        report.rows.push_back(EvalRow{task, method, s, completion});
      }
    }
  }
  return report;
}

void WriteEvalCsv(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "task,method,seed,completion,rotation_rule,config_hash\n";
  const std::string rule = RotationRuleName(r.rotation_rule);
  for (const EvalRow& row : r.rows) {
    char num[32];
    std::snprintf(num, sizeof(num), "%.17g", row.completion);
    out << row.task << ',' << row.method << ',' << row.seed << ',' << num
        << ',' << rule << ',' << r.config_hash << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

EvalReport ReadEvalCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "task,method,seed,completion,rotation_rule,config_hash") {
    throw std::runtime_error(path + ": not an eval report");
  }
  EvalReport r;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 6) throw std::runtime_error(path + ": bad row: " + line);
    EvalRow row{f[0], f[1], std::stoi(f[2]), std::stod(f[3])};
    if (first) {
      r.rotation_rule = RotationRuleFromName(f[4]);
      r.config_hash = f[5];
      first = false;
    }
    if (std::find(r.seeds.begin(), r.seeds.end(), row.seed) == r.seeds.end()) {
      r.seeds.push_back(row.seed);
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

Json EvalReportJson(const EvalReport& r) {
  Json aggregates = Json::array();
  for (const EvalAggregate& a : Aggregate(r)) {
    aggregates.push_back({{"task", a.task},
                          {"method", a.method},
                          {"n", a.n},
                          {"mean", a.mean},
                          {"std", a.std ? Json(*a.std) : Json(nullptr)}});
  }
  return {{"config_hash", r.config_hash},
          {"rotation_rule", RotationRuleName(r.rotation_rule)},
          {"seeds", r.seeds},
          {"aggregates", aggregates}};
}

}  // namespace hierdex
