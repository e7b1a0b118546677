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

#ifndef HIERDEX_CONFIG_H_
#define HIERDEX_CONFIG_H_

#include <cstdint>
#include <string>

#include "hierdex/dal.h"
#include "hierdex/deploy.h"
#include "hierdex/eval.h"

namespace hierdex {

// One document configuring every pipeline stage.
struct RunConfig {
  uint64_t seed = 0;
  std::string dataset_dir = "data";
  std::string checkpoint_dir = "checkpoints";
  std::string report_dir = "reports";
  int workers = 0;  // 0 = all cores

  DatasetConfig dataset;
  EnvConfig env;
  CompletionThresholds thresholds;
  PlannerConfig planner;
  PpoConfig ppo;
  AugmentConfig augment;  // train-controller only; dal brings its own
  DalConfig dal;
  DistillConfig distill;
  FusionConfig fusion;
  CameraNoise camera;
  SuiteConfig eval;
};

Json RunConfigToJson(const RunConfig& c);
// Missing keys keep their defaults; unknown keys throw.
RunConfig RunConfigFromJson(const Json& j);
RunConfig LoadRunConfig(const std::string& path);

// Stable digest of the canonical document, worker counts excluded.
std::string RunConfigHash(const RunConfig& c);

// Pushes the worker count (HIERDEX_WORKERS wins over the document) into
// every stage that runs a pool.
void ApplyWorkers(RunConfig& c);

RolloutContext MakeRolloutContext(const RunConfig& c, const Planner* planner);

}  // namespace hierdex

#endif  // HIERDEX_CONFIG_H_
