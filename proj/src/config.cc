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

#include "hierdex/config.h"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace hierdex {

Json RunConfigToJson(const RunConfig& c) {
  return {{"seed", c.seed},
          {"paths",
           {{"dataset", c.dataset_dir},
            {"checkpoints", c.checkpoint_dir},
            {"reports", c.report_dir}}},
          {"workers", c.workers},
          {"dataset", DatasetConfigToJson(c.dataset)},
          {"env", EnvConfigToJson(c.env)},
          {"thresholds", ThresholdsToJson(c.thresholds)},
          {"planner", PlannerConfigToJson(c.planner)},
          {"ppo", PpoConfigToJson(c.ppo)},
          {"augment", AugmentConfigToJson(c.augment)},
          {"dal", DalConfigToJson(c.dal)},
          {"distill", DistillConfigToJson(c.distill)},
          {"fusion", FusionConfigToJson(c.fusion)},
          {"camera", CameraNoiseToJson(c.camera)},
          {"eval", SuiteConfigToJson(c.eval)}};
}

RunConfig RunConfigFromJson(const Json& j) {
  Json m = OverlayKeys(RunConfigToJson(RunConfig{}), j, "config");
  RunConfig c;
  c.seed = m["seed"];
  c.dataset_dir = m["paths"]["dataset"];
  c.checkpoint_dir = m["paths"]["checkpoints"];
  c.report_dir = m["paths"]["reports"];
  c.workers = m["workers"];
  if (c.workers < 0) throw std::invalid_argument("workers must be >= 0");
  c.dataset = DatasetConfigFromJson(m["dataset"]);
  c.env = EnvConfigFromJson(m["env"]);
  c.thresholds = ThresholdsFromJson(m["thresholds"]);
  c.planner = PlannerConfigFromJson(m["planner"]);
  c.ppo = PpoConfigFromJson(m["ppo"]);
  c.augment = AugmentConfigFromJson(m["augment"]);
  c.dal = DalConfigFromJson(m["dal"]);
  c.distill = DistillConfigFromJson(m["distill"]);
  c.fusion = FusionConfigFromJson(m["fusion"]);
  c.camera = CameraNoiseFromJson(m["camera"]);
  c.eval = SuiteConfigFromJson(m["eval"]);
  return c;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return RunConfigFromJson(j);
}

std::string RunConfigHash(const RunConfig& c) {
  // worker counts never change results, so they stay out of the digest
  RunConfig h = c;
  h.workers = h.dataset.workers = h.planner.workers = h.ppo.workers = 0;
  return ConfigHash(RunConfigToJson(h));
}

void ApplyWorkers(RunConfig& c) {
  if (const char* env = std::getenv("HIERDEX_WORKERS")) {
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 0) {
      throw std::invalid_argument("HIERDEX_WORKERS must be a count >= 0");
    }
    c.workers = static_cast<int>(n);
  }
  c.dataset.workers = c.workers;
  c.planner.workers = c.workers;
  c.ppo.workers = c.workers;
}

RolloutContext MakeRolloutContext(const RunConfig& c, const Planner* planner) {
  RolloutContext ctx;
  ctx.planner = planner;
  ctx.ppo = c.ppo;
  ctx.env = c.env;
  ctx.thresholds = c.thresholds;
  ctx.window = c.planner.window;
  return ctx;
}

}  // namespace hierdex
