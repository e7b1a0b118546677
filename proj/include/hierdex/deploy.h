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

#ifndef HIERDEX_DEPLOY_H_
#define HIERDEX_DEPLOY_H_

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hierdex/rl.h"

namespace hierdex {

struct FusionConfig {
  double translation_gate = 0.05;
  double rotation_gate = 0.5;
  int cameras = 4;
};

Json FusionConfigToJson(const FusionConfig& c);
FusionConfig FusionConfigFromJson(const Json& j);

// Drops estimates at or beyond either gate from the reference and averages
// the rest; falls back to previous when none survive.
ObjectState FusePoses(std::span<const ObjectState> estimates,
                      const ObjectState& reference, const FusionConfig& c,
                      const ObjectState& previous);

struct CameraNoise {
  double translation_sigma = 0.01;  // meters, per axis
  double rotation_sigma = 0.05;     // radians, per axis
  double outlier_prob = 0.1;
  double outlier_offset = 0.2;  // meters, along a random direction
};

Json CameraNoiseToJson(const CameraNoise& c);
CameraNoise CameraNoiseFromJson(const Json& j);

// One noisy estimate of truth per camera.
std::vector<ObjectState> SimulateCameras(const ObjectState& truth, int cameras,
                                         const CameraNoise& noise, Rng& rng);

struct EmaState {
  double alpha = 0.3;
  std::optional<Vector> previous;
};

// alpha * raw + (1 - alpha) * previous; the first call passes raw through.
Vector EmaFilter(EmaState& state, const Vector& raw);

// Reset acceptance: within 3 cm and 0.5 rad of the initial pose.
bool CheckReset(const ObjectState& pose, const ObjectState& goal_init);

struct DistillConfig {
  int iterations = 5;
  int labels_per_iteration = 2048;
  int epochs = 30;
  int batch_size = 256;
  double lr = 1e-3;
};

Json DistillConfigToJson(const DistillConfig& c);
DistillConfig DistillConfigFromJson(const Json& j);

struct DistillStats {
  int iteration = 0;
  double beta = 0.0;
  int dataset_size = 0;
  double mse_before = 0.0;  // on the aggregate, before this round's fit
  double mse_after = 0.0;
  double mean_completion = 0.0;  // of this round's mixed rollouts
};

// DAgger: rollouts mix teacher and student mean actions with probability
// beta for the teacher, beta going 1 -> 0 linearly. Every visited state is
// labeled with the teacher's mean action and the student regresses the
// aggregate. The student sees the velocity-free observation.
Controller DaggerDistill(const RolloutContext& teacher_ctx,
                         const Controller& teacher, const TaskSampler& sampler,
                         const DistillConfig& config, Rng& rng,
                         std::vector<DistillStats>* log = nullptr);

// Velocity-free view of a teacher observation.
std::vector<double> StudentView(const RolloutContext& teacher_ctx,
                                std::span<const double> teacher_obs);

// Context with the same env and planner but the student observation.
RolloutContext StudentContext(const RolloutContext& teacher_ctx);

}  // namespace hierdex

#endif  // HIERDEX_DEPLOY_H_
