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

#include "hierdex/planner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "hierdex/parallel.h"

namespace hierdex {
namespace {

constexpr int kTokenFeatures = kRelativeFeaturesPerState + 1;
constexpr double kTranslationUnit = 0.1;  // network translation unit, meters

const Pose& NominalOffset(int hand) {
  static const Pose left{Vec3(-0.12, 0.0, 0.05),
                         Rot::FromAxisAngle(Vec3::UnitY(), M_PI / 2)};
  static const Pose right{Vec3(0.12, 0.0, 0.05),
                          Rot::FromAxisAngle(Vec3::UnitY(), -M_PI / 2)};
  return hand == kLeft ? left : right;
}

Eigen::Vector4d Wxyz(const Rot& r) { return {r.w(), r.x(), r.y(), r.z()}; }

}  // namespace

Json PlannerConfigToJson(const PlannerConfig& c) {
  return {{"window", c.window},
          {"category_count", c.category_count},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"hidden", c.hidden},
          {"attention_dim", c.attention_dim},
          {"random_gap_prob", c.random_gap_prob},
          {"max_gap", c.max_gap},
          {"translation_weight", c.translation_weight},
          {"finetune_lr_scale", c.finetune_lr_scale},
          {"finetune_epochs", c.finetune_epochs},
          {"force_category", c.force_category},
          {"workers", c.workers}};
}

PlannerConfig PlannerConfigFromJson(const Json& j) {
  PlannerConfig c;
  Json defaults = PlannerConfigToJson(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw std::invalid_argument("unknown planner key: " + key);
    }
    defaults[key] = value;
  }
  c.window = defaults["window"];
  c.category_count = defaults["category_count"];
  c.epochs = defaults["epochs"];
  c.batch_size = defaults["batch_size"];
  c.lr = defaults["lr"];
  c.hidden = defaults["hidden"];
  c.attention_dim = defaults["attention_dim"];
  c.random_gap_prob = defaults["random_gap_prob"];
  c.max_gap = defaults["max_gap"];
  c.translation_weight = defaults["translation_weight"];
  c.finetune_lr_scale = defaults["finetune_lr_scale"];
  c.finetune_epochs = defaults["finetune_epochs"];
  c.force_category = defaults["force_category"];
  c.workers = defaults["workers"];
  if (c.window < 1 || c.category_count < 1 || c.batch_size < 1) {
    throw std::invalid_argument("planner needs window, categories, batch >= 1");
  }
  return c;
}

Pose PlannerPrior(const ObjectState& s, int hand) {
  return Compose(s.pose(), NominalOffset(hand));
}

Planner::Planner(PlannerConfig config) : config_(std::move(config)) {
  attention = Attention(kTokenFeatures, config_.attention_dim);
  mlp = Mlp({input_size(), config_.hidden, config_.hidden, output_size()});
  adam_attention_ = Adam(attention.param_count());
  adam_mlp_ = Adam(mlp.param_count());
}

void Planner::Init(Rng& rng) {
  attention.Init(rng);
  mlp.Init(rng, 0.01);
}

int Planner::input_size() const {
  return config_.category_count +
         config_.window * (kTokenFeatures + config_.attention_dim) + 1;
}

void Planner::MarkTrained(int category_id) {
  if (std::find(trained_.begin(), trained_.end(), category_id) ==
      trained_.end()) {
    trained_.push_back(category_id);
    std::sort(trained_.begin(), trained_.end());
  }
}

int Planner::ResolveCategory(int category_id) const {
  bool known = category_id >= 0 && category_id < config_.category_count;
  bool trained = std::find(trained_.begin(), trained_.end(), category_id) !=
                 trained_.end();
  if (config_.force_category >= 0 && (!known || !trained)) {
    return config_.force_category;
  }
  if (!known) {
    throw std::invalid_argument("planner: unknown category " +
                                std::to_string(category_id));
  }
  return category_id;
}

Matrix Planner::Inputs(const std::vector<PlannerQuery>& queries,
                       std::vector<Matrix>* tokens,
                       AttentionCache* cache) const {
  const int T = config_.window, C = config_.category_count;
  const int d = config_.attention_dim;
  tokens->clear();
  for (const PlannerQuery& q : queries) {
    if (static_cast<int>(q.window.states.size()) != T) {
      throw std::invalid_argument("planner: window has wrong length");
    }
    std::vector<double> rel = RelativeGoalWindow(q.window, q.current);
    Matrix tok(kTokenFeatures, T);
    for (int j = 0; j < T; ++j) {
      for (int f = 0; f < kRelativeFeaturesPerState; ++f) {
        tok(f, j) = rel[j * kRelativeFeaturesPerState + f];
      }
      tok(kRelativeFeaturesPerState, j) =
          q.window.states[j].joint_angle.value_or(0.0);
    }
    tokens->push_back(std::move(tok));
  }
  std::vector<Matrix> att = attention.Forward(*tokens, cache);
  Matrix x = Matrix::Zero(input_size(), static_cast<Eigen::Index>(queries.size()));
  for (size_t n = 0; n < queries.size(); ++n) {
    x(ResolveCategory(queries[n].category_id), n) = 1.0;
    x.block(C, n, kTokenFeatures * T, 1) =
        Eigen::Map<const Vector>((*tokens)[n].data(), kTokenFeatures * T);
    x.block(C + kTokenFeatures * T, n, d * T, 1) =
        Eigen::Map<const Vector>(att[n].data(), d * T);
    x(input_size() - 1, n) = queries[n].current.joint_angle.value_or(0.0);
  }
  return x;
}

std::vector<WristAction> Planner::Decode(const PlannerQuery& q,
                                         const Eigen::Ref<const Vector>& out) {
  std::vector<WristAction> wrists(q.window.states.size());
  for (size_t j = 0; j < wrists.size(); ++j) {
    for (int h = 0; h < 2; ++h) {
      const double* o = out.data() + 14 * j + 7 * h;
      Pose offset{kTranslationUnit * Vec3(o[0], o[1], o[2]),
                  Rot(1.0 + o[3], o[4], o[5], o[6])};
      wrists[j].hand(h) = Compose(PlannerPrior(q.window.states[j], h), offset);
    }
  }
  return wrists;
}

std::vector<WristAction> Planner::Forward(int category_id,
                                          const GoalWindow& window,
                                          const ObjectState& current) const {
  std::vector<PlannerQuery> q = {{category_id, window, current}};
  std::vector<Matrix> tokens;
  Matrix y = mlp.Forward(Inputs(q, &tokens, nullptr));
  return Decode(q[0], y.col(0));
}

namespace {

// Loss and output gradient for one sample. Translation is compared in
// meters (weighted), rotation as sign-aligned quaternions.
double SampleLoss(const PlannerQuery& q, const std::vector<WristAction>& target,
                  const Eigen::Ref<const Vector>& out, double tw,
                  Eigen::Ref<Vector> grad) {
  const int T = static_cast<int>(target.size());
  const double norm = 1.0 / (2.0 * T);
  double loss = 0.0;
  for (int j = 0; j < T; ++j) {
    for (int h = 0; h < 2; ++h) {
      const int base = 14 * j + 7 * h;
      Pose want = Compose(Inverse(PlannerPrior(q.window.states[j], h)),
                          target[j].hand(h));
      Vec3 dt = kTranslationUnit * out.segment<3>(base) - want.translation;
      Eigen::Vector4d qhat(1.0 + out[base + 3], out[base + 4], out[base + 5],
                           out[base + 6]);
      Eigen::Vector4d qt = Wxyz(want.rotation);
      if (qhat.dot(qt) < 0) qt = -qt;
      Eigen::Vector4d dq = qhat - qt;
      loss += norm * (tw * dt.squaredNorm() + dq.squaredNorm());
      grad.segment<3>(base) = norm * 2.0 * tw * kTranslationUnit * dt;
      grad.segment<4>(base + 3) = norm * 2.0 * dq;
    }
  }
  return loss;
}

}  // namespace

double Planner::Loss(const std::vector<PlannerQuery>& queries,
                     const std::vector<std::vector<WristAction>>& targets) const {
  if (queries.empty()) return 0.0;
  double total = 0.0;
  const size_t chunk = 256;
  Vector scratch(output_size());
  for (size_t begin = 0; begin < queries.size(); begin += chunk) {
    size_t end = std::min(queries.size(), begin + chunk);
    std::vector<PlannerQuery> part(queries.begin() + begin, queries.begin() + end);
    std::vector<Matrix> tokens;
    Matrix y = mlp.Forward(Inputs(part, &tokens, nullptr));
    for (size_t n = 0; n < part.size(); ++n) {
      total += SampleLoss(part[n], targets[begin + n], y.col(n),
                          config_.translation_weight, scratch);
    }
  }
  return total / queries.size();
}

double Planner::TrainStep(const std::vector<PlannerQuery>& queries,
                          const std::vector<std::vector<WristAction>>& targets,
                          double lr) {
  const int B = static_cast<int>(queries.size());
  std::vector<Matrix> tokens;
  AttentionCache att_cache;
  MlpCache cache;
  Matrix y = mlp.Forward(Inputs(queries, &tokens, &att_cache), &cache);
  Matrix dy(output_size(), B);
  double loss = 0.0;
  for (int n = 0; n < B; ++n) {
    loss += SampleLoss(queries[n], targets[n], y.col(n),
                       config_.translation_weight, dy.col(n));
  }
  dy /= B;
  Vector grad_mlp = Vector::Zero(mlp.param_count());
  Matrix dx = mlp.Backward(cache, dy, grad_mlp);
  const int T = config_.window, d = config_.attention_dim;
  const int att_row = config_.category_count + kTokenFeatures * T;
  std::vector<Matrix> datt(B);
  for (int n = 0; n < B; ++n) {
    datt[n] = Eigen::Map<const Matrix>(dx.col(n).data() + att_row, d, T);
  }
  Vector grad_att = Vector::Zero(attention.param_count());
  attention.Backward(att_cache, datt, grad_att);
  AdamConfig c;
  c.lr = lr;
  adam_mlp_.Step(mlp.params(), grad_mlp, c);
  adam_attention_.Step(attention.params(), grad_att, c);
  return loss / B;
}

Checkpoint Planner::ToCheckpoint() const {
  Checkpoint c;
  c.meta = {{"kind", "planner"},
            {"config", PlannerConfigToJson(config_)},
            {"trained_categories", trained_},
            {"mlp_sizes", mlp.sizes()}};
  c.Add("attention", attention.params());
  c.Add("mlp", mlp.params());
  return c;
}

Planner Planner::FromCheckpoint(const Checkpoint& c) {
  if (c.meta.value("kind", "") != "planner") {
    throw std::invalid_argument("checkpoint is not a planner");
  }
  Planner p(PlannerConfigFromJson(c.meta.at("config")));
  const Vector& att = c.Get("attention");
  const Vector& mlp = c.Get("mlp");
  if (att.size() != p.attention.param_count() ||
      mlp.size() != p.mlp.param_count()) {
    throw std::invalid_argument("planner checkpoint shape mismatch");
  }
  p.attention.params() = att;
  p.mlp.params() = mlp;
  for (int id : c.meta.at("trained_categories")) p.MarkTrained(id);
  return p;
}

void BuildBcSamples(const std::vector<const Demo*>& demos,
                    const PlannerConfig& config, Rng& rng,
                    std::vector<PlannerQuery>* queries,
                    std::vector<std::vector<WristAction>>* targets) {
  queries->clear();
  targets->clear();
  for (const Demo* d : demos) {
    GoalTrajectory g = d->goal();
    for (int t = 0; t + 1 < g.size(); ++t) {
      bool gaps = rng.Uniform(0.0, 1.0) < config.random_gap_prob;
      GoalWindow w =
          SampleGoalWindow(g, t, &rng, gaps, config.window, config.max_gap);
      std::vector<WristAction> target;
      for (int idx : w.indices) target.push_back(d->wrist_poses[idx]);
      const ObjectState& current =
          d->achieved_states.empty() ? g[t] : d->achieved_states[t];
      queries->push_back({d->category_id, std::move(w), current});
      targets->push_back(std::move(target));
    }
  }
}

namespace {

// Runs epochs of shuffled minibatch Adam; returns per-epoch mean loss.
void RunEpochs(Planner& planner, const std::vector<const Demo*>& demos,
               int epochs, double lr, Rng& rng, TrainCurve* curve) {
  const PlannerConfig& c = planner.config();
  std::vector<PlannerQuery> queries;
  std::vector<std::vector<WristAction>> targets;
  for (int e = 0; e < epochs; ++e) {
    BuildBcSamples(demos, c, rng, &queries, &targets);
    if (e == 0 && curve) curve->initial_loss = planner.Loss(queries, targets);
    std::vector<int> order(queries.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    double sum = 0.0;
    int batches = 0;
    for (size_t b = 0; b < order.size(); b += c.batch_size) {
      std::vector<PlannerQuery> q;
      std::vector<std::vector<WristAction>> t;
      for (size_t k = b; k < std::min(order.size(), b + c.batch_size); ++k) {
        q.push_back(queries[order[k]]);
        t.push_back(targets[order[k]]);
      }
      sum += planner.TrainStep(q, t, lr);
      ++batches;
    }
    if (curve) curve->epoch_loss.push_back(batches ? sum / batches : 0.0);
  }
}

}  // namespace

Planner TrainBc(const DemoSet& data, const PlannerConfig& config, Rng& rng,
                TrainCurve* curve) {
  if (data.demos.empty()) throw std::invalid_argument("TrainBc: empty dataset");
  Planner planner(config);
  planner.Init(rng);
  std::vector<const Demo*> demos;
  for (const Demo& d : data.demos) {
    demos.push_back(&d);
    planner.MarkTrained(d.category_id);
  }
  RunEpochs(planner, demos, config.epochs, config.lr, rng, curve);
  return planner;
}

void Finetune(Planner& planner, const DemoSet& original,
              const DemoSet& harvested, Rng& rng, TrainCurve* curve) {
  if (harvested.demos.empty()) return;
  std::vector<const Demo*> demos;
  for (const Demo& d : original.demos) demos.push_back(&d);
  for (const Demo& d : harvested.demos) {
    demos.push_back(&d);
    planner.MarkTrained(d.category_id);
  }
  const PlannerConfig& c = planner.config();
  RunEpochs(planner, demos, c.finetune_epochs, c.lr * c.finetune_lr_scale, rng,
            curve);
}

std::string OeMetricName(OeMetric m) {
  return m == OeMetric::kAngle ? "angle" : "frobenius";
}

OeMetric OeMetricFromName(const std::string& name) {
  if (name == "angle") return OeMetric::kAngle;
  if (name == "frobenius") return OeMetric::kFrobenius;
  throw std::invalid_argument("unknown OE metric: " + name);
}

PlannerReport EvalPlannerOn(const Planner& planner,
                            const std::vector<Demo>& demos,
                            const std::string& name, OeMetric metric) {
  PlannerReport r;
  r.split = name;
  r.metric = metric;
  r.sequences = static_cast<int>(demos.size());
  r.per_sequence.resize(demos.size());
  const int T = planner.config().window;
  ParallelFor(r.sequences, WorkerCount(planner.config().workers), [&](int i) {
    const Demo& d = demos[i];
    GoalTrajectory g = d.goal();
    SequenceError e;
    e.demo = i;
    e.steps = g.size();
    for (int t = 0; t < g.size(); ++t) {
      GoalWindow w = SampleGoalWindow(g, t, nullptr, false, T);
      WristAction pred = planner.Forward(d.category_id, w, g[t]).front();
      const WristAction& truth = d.wrist_poses[std::min(t + 1, g.size() - 1)];
      for (int h = 0; h < 2; ++h) {
        e.te_cm += 0.5 * TranslationErrorCm(pred.hand(h).translation,
                                            truth.hand(h).translation);
        e.oe += 0.5 * (metric == OeMetric::kAngle
                           ? QuatAngle(pred.hand(h).rotation,
                                       truth.hand(h).rotation)
                           : RotFrobeniusError(pred.hand(h).rotation,
                                               truth.hand(h).rotation));
      }
    }
    r.per_sequence[i] = e;
  });
  long steps = 0;
  for (const SequenceError& e : r.per_sequence) {
    r.te_cum_cm += e.te_cm;
    r.oe_cum += e.oe;
    steps += e.steps;
  }
  if (r.sequences > 0) {
    r.te_per_step_cm = r.te_cum_cm / steps;
    r.te_cum_cm /= r.sequences;
    r.oe_cum /= r.sequences;
  }
  return r;
}

PlannerReport EvalPlanner(const Planner& planner, const DemoSet& data,
                          Split split, OeMetric metric) {
  DemoSet sub = data.Subset(split);
  if (sub.demos.empty()) {
    throw std::invalid_argument("EvalPlanner: split " + SplitName(split) +
                                " is empty");
  }
  return EvalPlannerOn(planner, sub.demos, SplitName(split), metric);
}

void WritePlannerReportCsv(const std::vector<PlannerReport>& reports,
                           const std::string& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# " << header << "; TE/OE are the mean of left and right hands\n";
  out << "split,sequences,TE_cum_cm,OE_cum,metric\n";
  out.precision(17);
  for (const PlannerReport& r : reports) {
    out << r.split << ',' << r.sequences << ',' << r.te_cum_cm << ','
        << r.oe_cum << ',' << OeMetricName(r.metric) << '\n';
  }
}

}  // namespace hierdex
