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

#ifndef HIERDEX_EXPERT_H_
#define HIERDEX_EXPERT_H_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hierdex/env.h"
#include "hierdex/geom.h"
#include "hierdex/json_io.h"
#include "hierdex/metrics.h"
#include "hierdex/rng.h"
#include "hierdex/traj.h"

namespace hierdex {

// Wrist frame relative to its grasp site: backed off along the site normal.
inline const Pose kGraspStandoff{Vec3(0.0, 0.0, -0.025), Rot::Identity()};

// Finger closure ramp once both hands reach their sites.
inline constexpr double kClosureRamp = 0.1;

// Wrist poses that rigidly carry both grasp sites with the object at s.
WristAction CarryWrists(const ObjectSpec& spec, const ObjectState& s);

enum class TaskFamily { kLift, kLiftAndPlace, kLidOpen, kLiftWhileArticulate };

std::string TaskFamilyName(TaskFamily f);
TaskFamily TaskFamilyFromName(const std::string& name);

enum class Split { kTrained, kUnseenTraj, kUnseenObj };

std::string SplitName(Split s);
Split SplitFromName(const std::string& name);

struct Demo {
  int category_id = 0;
  std::string task;
  std::vector<ObjectState> object_states;
  std::vector<WristAction> wrist_poses;  // command issued to reach state i
  std::vector<FingerCommands> finger_closures;
  std::vector<std::array<std::vector<Vec3>, 2>> fingertips;
  Vec3 scale = Vec3::Ones();  // applied to the category's spec
  // Set when the object does not start on object_states[0], e.g. for
  // episodes harvested under an initial perturbation.
  std::optional<ObjectState> initial_state;
  // Object states actually reached, when they differ from the goal.
  std::vector<ObjectState> achieved_states;

  int length() const { return static_cast<int>(object_states.size()); }
  GoalTrajectory goal() const;
  // Throws std::invalid_argument on ragged sequences or wrist jumps beyond
  // the rate limits.
  void Validate(const EnvConfig& config) const;
};

struct DemoSet {
  std::vector<ObjectSpec> categories;  // indexed by category id
  std::vector<Demo> demos;
  std::vector<Split> splits;  // parallel to demos

  int size() const { return static_cast<int>(demos.size()); }
  std::vector<int> Indices(Split s) const;
  DemoSet Subset(Split s) const;
  void Append(const Demo& d, Split s);
  // Category spec with the demo's scale applied.
  ObjectSpec SpecFor(const Demo& d) const;
  const ObjectSpec& Category(int id) const;
};

// Steps for the hands to travel from home to the grasp standoff and close.
int GraspReadyStep(const ObjectSpec& spec, const ObjectState& s,
                   const EnvConfig& config);

// Builds the demo that carries the object along g. Throws
// std::invalid_argument naming the first infeasible step.
Demo PlanExpert(const ObjectSpec& spec, const GoalTrajectory& g,
                const EnvConfig& config = EnvConfig{});

// Open-loop replay on an env already reset; returns the observed object
// states, starting with the reset state.
std::vector<ObjectState> ReplayInEnv(const Demo& d, Env& env);

// Replays with noise off from the demo's initial state.
double ReplayCompletion(const Demo& d, const ObjectSpec& spec,
                        const EnvConfig& config,
                        const CompletionThresholds& th = {});

GoalTrajectory SampleTask(const ObjectSpec& spec, TaskFamily family, int steps,
                          Rng& rng, const EnvConfig& config = EnvConfig{});

// Lift-and-drop: start on the table, raise, land at a lateral offset.
GoalTrajectory KeyposeTask(const ObjectSpec& spec, double raise,
                           const Vec3& landing_offset, int steps,
                           const EnvConfig& config = EnvConfig{});
GoalTrajectory KeyposeTask(const ObjectSpec& spec, Rng& rng, int steps,
                           const EnvConfig& config = EnvConfig{});

std::vector<ObjectSpec> DefaultCategories();

struct DatasetConfig {
  int per_category = 20;
  int steps = 200;
  int workers = 0;
};

Json DatasetConfigToJson(const DatasetConfig& c);
DatasetConfig DatasetConfigFromJson(const Json& j);

// The last category is held out as unseen_obj; the last ceil(n/5)
// trajectories of every other category are unseen_traj.
DemoSet GenDataset(const std::vector<ObjectSpec>& categories,
                   const DatasetConfig& config, Rng& rng,
                   const EnvConfig& env_config = EnvConfig{});

// First trained lift_and_place demo of category 0.
int ReferenceDemo(const DemoSet& set);

Json DemoToJson(const Demo& d);
Demo DemoFromJson(const Json& j);

// Writes demos.jsonl, splits.json and objects.json under dir.
void SaveDemoSet(const DemoSet& set, const std::string& dir,
                 const Json& meta = Json::object());
DemoSet LoadDemoSet(const std::string& dir);

}  // namespace hierdex

#endif  // HIERDEX_EXPERT_H_
