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

#ifndef HIERDEX_PLANNER_H_
#define HIERDEX_PLANNER_H_

#include <array>
#include <string>
#include <vector>

#include "hierdex/env.h"
#include "hierdex/expert.h"
#include "hierdex/net.h"
#include "hierdex/traj.h"

namespace hierdex {

struct PlannerConfig {
  int window = kDefaultWindow;
  int category_count = 5;
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-3;
  int hidden = 128;
  int attention_dim = 16;
  double random_gap_prob = 0.5;  // share of training windows with gaps
  int max_gap = 3;
  double translation_weight = 100.0;  // loss weight on squared meters
  double finetune_lr_scale = 1.0;
  int finetune_epochs = 10;
  int force_category = -1;  // trained id used for untrained categories
  int workers = 0;
};

Json PlannerConfigToJson(const PlannerConfig& c);
PlannerConfig PlannerConfigFromJson(const Json& j);

// Grasp-standoff guess for hand h given an object state.
Pose PlannerPrior(const ObjectState& s, int hand);

// One planner query: where the object should go and where it is.
struct PlannerQuery {
  int category_id = 0;
  GoalWindow window;
  ObjectState current;
};

class Planner {
 public:
  Planner() = default;
  explicit Planner(PlannerConfig config);

  void Init(Rng& rng);

  // window.states.size() wrist actions in world frame.
  std::vector<WristAction> Forward(int category_id, const GoalWindow& window,
                                   const ObjectState& current) const;

  const PlannerConfig& config() const { return config_; }
  PlannerConfig& mutable_config() { return config_; }
  const std::vector<int>& trained_categories() const { return trained_; }
  void MarkTrained(int category_id);
  int input_size() const;
  int output_size() const { return 14 * config_.window; }

  // Mean loss over the queries and their targets.
  double Loss(const std::vector<PlannerQuery>& queries,
              const std::vector<std::vector<WristAction>>& targets) const;
  // One Adam step on a minibatch; returns the minibatch loss before it.
  double TrainStep(const std::vector<PlannerQuery>& queries,
                   const std::vector<std::vector<WristAction>>& targets,
                   double lr);

  Checkpoint ToCheckpoint() const;
  static Planner FromCheckpoint(const Checkpoint& c);

  Attention attention;
  Mlp mlp;

 private:
  int ResolveCategory(int category_id) const;
  // Builds network inputs; tokens are kept for the attention pass.
  Matrix Inputs(const std::vector<PlannerQuery>& queries,
                std::vector<Matrix>* tokens, AttentionCache* cache) const;
  static std::vector<WristAction> Decode(const PlannerQuery& q,
                                         const Eigen::Ref<const Vector>& out);

  PlannerConfig config_;
  std::vector<int> trained_;
  Adam adam_attention_, adam_mlp_;
};

struct TrainCurve {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
};

// Behavior cloning on every demo of the set (pass the trained subset).
Planner TrainBc(const DemoSet& data, const PlannerConfig& config, Rng& rng,
                TrainCurve* curve = nullptr);

// Continues training on original + harvested at lr * finetune_lr_scale.
// An empty harvest performs no steps.
void Finetune(Planner& planner, const DemoSet& original,
              const DemoSet& harvested, Rng& rng, TrainCurve* curve = nullptr);

enum class OeMetric { kAngle, kFrobenius };
std::string OeMetricName(OeMetric m);
OeMetric OeMetricFromName(const std::string& name);

struct SequenceError {
  int demo = 0;
  int steps = 0;
  double te_cm = 0.0;  // cumulative, mean of both hands
  double oe = 0.0;
};

struct PlannerReport {
  std::string split;
  OeMetric metric = OeMetric::kAngle;
  int sequences = 0;
  double te_cum_cm = 0.0;  // averaged over sequences
  double oe_cum = 0.0;
  double te_per_step_cm = 0.0;
  std::vector<SequenceError> per_sequence;
};

// Slides a unit-gap window over every t and compares the first predicted
// wrists with the demo wrists one step ahead.
PlannerReport EvalPlanner(const Planner& planner, const DemoSet& data,
                          Split split, OeMetric metric = OeMetric::kAngle);
// Same over an explicit list of demos (e.g. scaled harvests).
PlannerReport EvalPlannerOn(const Planner& planner,
                            const std::vector<Demo>& demos,
                            const std::string& name, OeMetric metric);

// CSV with columns split, sequences, TE_cum_cm, OE_cum, metric.
void WritePlannerReportCsv(const std::vector<PlannerReport>& reports,
                           const std::string& path, const std::string& header);

// Training windows for every t of every demo; exposed for tests.
void BuildBcSamples(const std::vector<const Demo*>& demos,
                    const PlannerConfig& config, Rng& rng,
                    std::vector<PlannerQuery>* queries,
                    std::vector<std::vector<WristAction>>* targets);

}  // namespace hierdex

#endif  // HIERDEX_PLANNER_H_
