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

#include "hierdex/rl.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hierdex/parallel.h"

namespace hierdex {

double Reward(const ObjectState& goal, const ObjectState& current,
              const RewardWeights& w) {
  double cost = w.rotation * QuatAngle(goal.rotation, current.rotation) +
                w.translation * (goal.translation - current.translation).norm();
  if (goal.joint_angle && current.joint_angle) {
    cost += w.joint * std::abs(*goal.joint_angle - *current.joint_angle);
  }
  return std::exp(-cost);
}

Command ComposeAction(const WristAction& planner,
                      const std::array<HandResidual, 2>& residual,
                      const FingerCommands& fingers, const ResidualBounds& b) {
  Command c;
  for (int h = 0; h < 2; ++h) {
    Vec3 dt = residual[h].translation.cwiseMax(-b.max_translation)
                  .cwiseMin(b.max_translation);
    Vec3 dr = residual[h].rotation;
    double n = dr.norm();
    if (n > b.max_rotation) dr *= b.max_rotation / n;
    const Pose& p = planner.hand(h);
    c.wrists.hand(h) = Pose{p.translation + dt,
                            p.rotation * Rot::FromRotationVector(dr)};
    c.fingers[h] = fingers[h];
    for (double& f : c.fingers[h]) f = std::clamp(f, 0.0, 1.0);
  }
  return c;
}

double FingertipReward(const std::array<std::vector<Vec3>, 2>& demo,
                       const std::array<std::vector<Vec3>, 2>& robot) {
  double sum = 0.0;
  int n = 0;
  for (int h = 0; h < 2; ++h) {
    if (demo[h].size() != robot[h].size()) {
      throw std::invalid_argument("fingertip count mismatch");
    }
    for (size_t k = 0; k < demo[h].size(); ++k) {
      sum += (demo[h][k] - robot[h][k]).norm();
      ++n;
    }
  }
  return std::exp(-(n ? sum / n : 0.0));
}

void Gae(std::span<const double> rewards, std::span<const double> values,
         std::span<const uint8_t> dones, double bootstrap, double gamma,
         double lambda, std::vector<double>* advantages,
         std::vector<double>* returns) {
  const size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw std::invalid_argument("Gae: length mismatch");
  }
  advantages->assign(n, 0.0);
  returns->assign(n, 0.0);
  double next_value = bootstrap, acc = 0.0;
  for (size_t k = n; k-- > 0;) {
    double nonterminal = dones[k] ? 0.0 : 1.0;
    double delta = rewards[k] + gamma * next_value * nonterminal - values[k];
    acc = delta + gamma * lambda * nonterminal * acc;
    (*advantages)[k] = acc;
    (*returns)[k] = acc + values[k];
    next_value = values[k];
  }
}

std::string ControlModeName(ControlMode m) {
  switch (m) {
    case ControlMode::kHierarchical: return "hierarchical";
    case ControlMode::kVanilla: return "vanilla";
    case ControlMode::kNoResidual: return "hierarchical_no_residual";
  }
  return "";
}

ControlMode ControlModeFromName(const std::string& name) {
  for (ControlMode m : {ControlMode::kHierarchical, ControlMode::kVanilla,
                        ControlMode::kNoResidual}) {
    if (ControlModeName(m) == name) return m;
  }
  throw std::invalid_argument("unknown control mode: " + name);
}

Json PpoConfigToJson(const PpoConfig& c) {
  return {{"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"clip", c.clip},
          {"epochs", c.epochs},
          {"minibatches", c.minibatches},
          {"value_coef", c.value_coef},
          {"entropy_coef", c.entropy_coef},
          {"steps_per_update", c.steps_per_update},
          {"lr", c.lr},
          {"mode", ControlModeName(c.mode)},
          {"fingertip_reward_coef", c.fingertip_reward_coef},
          {"updates", c.updates},
          {"lanes", c.lanes},
          {"hidden", c.hidden},
          {"init_log_std", c.init_log_std},
          {"max_grad_norm", c.max_grad_norm},
          {"residual_translation_scale", c.residual_translation_scale},
          {"residual_rotation_scale", c.residual_rotation_scale},
          {"vanilla_translation_scale", c.vanilla_translation_scale},
          {"vanilla_rotation_scale", c.vanilla_rotation_scale},
          {"finger_offset", c.finger_offset},
          {"finger_scale", c.finger_scale},
          {"reward",
           {{"rotation", c.reward.rotation},
            {"translation", c.reward.translation},
            {"joint", c.reward.joint}}},
          {"bounds",
           {{"max_translation", c.bounds.max_translation},
            {"max_rotation", c.bounds.max_rotation}}},
          {"workers", c.workers}};
}

PpoConfig PpoConfigFromJson(const Json& j) {
  Json m = OverlayKeys(PpoConfigToJson(PpoConfig{}), j, "ppo");
  PpoConfig c;
  c.gamma = m["gamma"];
  c.gae_lambda = m["gae_lambda"];
  c.clip = m["clip"];
  c.epochs = m["epochs"];
  c.minibatches = m["minibatches"];
  c.value_coef = m["value_coef"];
  c.entropy_coef = m["entropy_coef"];
  c.steps_per_update = m["steps_per_update"];
  c.lr = m["lr"];
  c.mode = ControlModeFromName(m["mode"]);
  c.fingertip_reward_coef = m["fingertip_reward_coef"];
  c.updates = m["updates"];
  c.lanes = m["lanes"];
  c.hidden = m["hidden"];
  c.init_log_std = m["init_log_std"];
  c.max_grad_norm = m["max_grad_norm"];
  c.residual_translation_scale = m["residual_translation_scale"];
  c.residual_rotation_scale = m["residual_rotation_scale"];
  c.vanilla_translation_scale = m["vanilla_translation_scale"];
  c.vanilla_rotation_scale = m["vanilla_rotation_scale"];
  c.finger_offset = m["finger_offset"];
  c.finger_scale = m["finger_scale"];
  c.reward.rotation = m["reward"]["rotation"];
  c.reward.translation = m["reward"]["translation"];
  c.reward.joint = m["reward"]["joint"];
  c.bounds.max_translation = m["bounds"]["max_translation"];
  c.bounds.max_rotation = m["bounds"]["max_rotation"];
  c.workers = m["workers"];
  if (!(c.gamma > 0 && c.gamma <= 1) || !(c.clip > 0)) {
    throw std::invalid_argument("ppo needs gamma in (0, 1] and clip > 0");
  }
  if (c.steps_per_update < 1 || c.lanes < 1 || c.minibatches < 1 ||
      c.epochs < 1) {
    throw std::invalid_argument("ppo sizes must be positive");
  }
  if (c.reward.rotation < 0 || c.reward.translation < 0 || c.reward.joint < 0) {
    throw std::invalid_argument("reward weights must be nonnegative");
  }
  if (!(c.bounds.max_translation > 0 && c.bounds.max_rotation > 0)) {
    throw std::invalid_argument("residual bounds must be positive");
  }
  return c;
}

int ActionDim(ControlMode mode, int fingers) {
  return mode == ControlMode::kNoResidual ? 2 * fingers : 2 * fingers + 12;
}

Command ActionToCommand(const PpoConfig& c, const EnvConfig& env,
                        const WristAction* plan, const Vector& a) {
  const int F = env.fingers;
  if (a.size() != ActionDim(c.mode, F)) {
    throw std::invalid_argument("action has the wrong dimension");
  }
  FingerCommands fingers;
  for (int h = 0; h < 2; ++h) {
    fingers[h].resize(F);
    for (int k = 0; k < F; ++k) {
      fingers[h][k] = c.finger_offset + c.finger_scale * a[h * F + k];
    }
  }
  std::array<HandResidual, 2> residual;
  if (c.mode == ControlMode::kVanilla) {
    Command cmd;
    for (int h = 0; h < 2; ++h) {
      const double* w = a.data() + 2 * F + 6 * h;
      const Pose& home = env.home(h);
      cmd.wrists.hand(h) = Pose{
          home.translation + c.vanilla_translation_scale * Vec3(w[0], w[1], w[2]),
          home.rotation * Rot::FromRotationVector(c.vanilla_rotation_scale *
                                                  Vec3(w[3], w[4], w[5]))};
      cmd.fingers[h] = fingers[h];
      for (double& f : cmd.fingers[h]) f = std::clamp(f, 0.0, 1.0);
    }
    return cmd;
  }
  if (plan == nullptr) throw std::invalid_argument("hierarchical mode needs a plan");
  if (c.mode == ControlMode::kHierarchical) {
    for (int h = 0; h < 2; ++h) {
      const double* r = a.data() + 2 * F + 6 * h;
      residual[h].translation =
          c.residual_translation_scale * Vec3(r[0], r[1], r[2]);
      residual[h].rotation = c.residual_rotation_scale * Vec3(r[3], r[4], r[5]);
    }
  }
  return ComposeAction(*plan, residual, fingers, c.bounds);
}

Controller::Controller(const PpoConfig& config, int obs_dim, int action_dim)
    : policy({obs_dim, config.hidden, config.hidden, action_dim},
             config.init_log_std),
      value({obs_dim, config.hidden, config.hidden, 1}),
      norm(obs_dim),
      adam_mean(policy.mean.param_count()),
      adam_log_std(action_dim),
      adam_value(value.param_count()) {}

void Controller::Init(Rng& rng) {
  policy.Init(rng, 0.01);
  value.Init(rng, 1.0);
}

Vector Controller::Normalize(std::span<const double> obs) const {
  return norm.Normalize(Vector(Eigen::Map<const Vector>(obs.data(), obs.size())));
}

Vector Controller::MeanAction(std::span<const double> obs) const {
  return policy.Mean(Normalize(obs));
}

Checkpoint Controller::ToCheckpoint() const {
  Checkpoint c;
  c.meta = {{"kind", "controller"},
            {"policy_sizes", policy.mean.sizes()},
            {"value_sizes", value.sizes()}};
  c.Add("policy_mean", policy.mean.params());
  c.Add("policy_log_std", policy.log_std);
  c.Add("value", value.params());
  c.Add("obs_norm", norm.Pack());
  return c;
}

Controller Controller::FromCheckpoint(const Checkpoint& c) {
  if (c.meta.value("kind", "") != "controller") {
    throw std::invalid_argument("checkpoint is not a controller");
  }
  std::vector<int> ps = c.meta.at("policy_sizes");
  std::vector<int> vs = c.meta.at("value_sizes");
  PpoConfig cfg;
  cfg.hidden = ps[1];
  Controller out(cfg, ps.front(), ps.back());
  out.policy.mean = Mlp(ps);
  out.value = Mlp(vs);
  out.policy.mean.params() = c.Get("policy_mean");
  out.policy.log_std = c.Get("policy_log_std");
  out.value.params() = c.Get("value");
  out.norm = RunningNorm::Unpack(c.Get("obs_norm"));
  if (out.policy.mean.params().size() != out.policy.mean.param_count() ||
      out.norm.dim() != ps.front()) {
    throw std::invalid_argument("controller checkpoint shape mismatch");
  }
  out.adam_mean = Adam(out.policy.mean.param_count());
  out.adam_log_std = Adam(ps.back());
  out.adam_value = Adam(out.value.param_count());
  return out;
}

namespace {

// Scales v in place so its norm is at most max_norm.
void ClipNorm(Vector& v, double max_norm) {
  double n = v.norm();
  if (n > max_norm && n > 0) v *= max_norm / n;
}

Vector LogProbs(const GaussianPolicy& pol, const Matrix& mu,
                const Matrix& actions) {
  Vector out(mu.cols());
  for (Eigen::Index n = 0; n < mu.cols(); ++n) {
    out[n] = pol.LogProb(mu.col(n), actions.col(n));
  }
  return out;
}

}  // namespace

UpdateStats PpoUpdate(Controller& c, const PpoBatch& batch,
                      const PpoConfig& config, Rng& rng) {
  UpdateStats stats;
  const int n = batch.size();
  if (n == 0) return stats;
  Vector adv = batch.advantages;
  double mean = adv.mean();
  double stdev = std::sqrt((adv.array() - mean).square().mean());
  adv = (adv.array() - mean) / (stdev + 1e-8);

  auto full_ratio = [&] {
    Matrix mu = c.policy.mean.Forward(batch.obs);
    return (LogProbs(c.policy, mu, batch.actions) - batch.log_probs)
        .array()
        .exp()
        .matrix()
        .eval();
  };
  stats.ratio_mean_start = full_ratio().mean();

  AdamConfig adam;
  adam.lr = config.lr;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int mb = std::max(1, n / config.minibatches);
  double pl = 0, vl = 0, kl = 0, cf = 0;
  int count = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (int begin = 0; begin < n; begin += mb) {
      const int m = std::min(mb, n - begin);
      Matrix x(batch.obs.rows(), m), a(batch.actions.rows(), m);
      Vector old(m), ad(m), ret(m);
      for (int k = 0; k < m; ++k) {
        int i = order[begin + k];
        x.col(k) = batch.obs.col(i);
        a.col(k) = batch.actions.col(i);
        old[k] = batch.log_probs[i];
        ad[k] = adv[i];
        ret[k] = batch.returns[i];
      }
      MlpCache pc, vc;
      Matrix mu = c.policy.mean.Forward(x, &pc);
      Matrix v = c.value.Forward(x, &vc);
      Vector inv_var = (-2.0 * c.policy.log_std).array().exp();
      Matrix dmu(mu.rows(), m);
      Vector dlog = Vector::Zero(c.action_dim());
      double policy_loss = 0, value_loss = 0;
      Matrix dv(1, m);
      for (int k = 0; k < m; ++k) {
        double logp = c.policy.LogProb(mu.col(k), a.col(k));
        double r = std::exp(logp - old[k]);
        double clipped = std::clamp(r, 1.0 - config.clip, 1.0 + config.clip);
        policy_loss -= std::min(r * ad[k], clipped * ad[k]) / m;
        bool active = !((ad[k] > 0 && r > 1.0 + config.clip) ||
                        (ad[k] < 0 && r < 1.0 - config.clip));
        double g = active ? -ad[k] * r / m : 0.0;  // dL/dlogp
        Vector diff = a.col(k) - mu.col(k);
        dmu.col(k) = g * diff.cwiseProduct(inv_var);
        dlog += g * (diff.cwiseAbs2().cwiseProduct(inv_var).array() - 1.0)
                        .matrix();
        kl += (r - 1.0) - std::log(r);
        cf += std::abs(r - 1.0) > config.clip ? 1.0 : 0.0;
        ++count;
        double e = v(0, k) - ret[k];
        value_loss += e * e / m;
        dv(0, k) = config.value_coef * 2.0 * e / m;
      }
      dlog.array() -= config.entropy_coef;
      if (!std::isfinite(policy_loss) || !std::isfinite(value_loss)) {
        std::ostringstream msg;
        msg << "PPO loss is not finite (policy " << policy_loss << ", value "
            << value_loss << ")";
        throw std::runtime_error(msg.str());
      }
      pl += policy_loss;
      vl += value_loss;
      Vector gmean = Vector::Zero(c.policy.mean.param_count());
      c.policy.mean.Backward(pc, dmu, gmean);
      Vector gvalue = Vector::Zero(c.value.param_count());
      c.value.Backward(vc, dv, gvalue);
      // joint clip over the policy parameters
      double pn = std::sqrt(gmean.squaredNorm() + dlog.squaredNorm());
      if (pn > config.max_grad_norm) {
        gmean *= config.max_grad_norm / pn;
        dlog *= config.max_grad_norm / pn;
      }
      ClipNorm(gvalue, config.max_grad_norm);
      c.adam_mean.Step(c.policy.mean.params(), gmean, adam);
      c.adam_log_std.Step(c.policy.log_std, dlog, adam);
      c.adam_value.Step(c.value.params(), gvalue, adam);
      c.policy.ClampLogStd();
    }
  }
  const int steps = config.epochs * ((n + mb - 1) / mb);
  stats.policy_loss = pl / steps;
  stats.value_loss = vl / steps;
  stats.kl = kl / count;
  stats.clip_fraction = cf / count;
  stats.entropy = c.policy.Entropy();
  stats.ratio_mean_end = full_ratio().mean();
  return stats;
}

Json AugmentConfigToJson(const AugmentConfig& c) {
  return {{"scale", c.scale},
          {"scale_range", c.scale_range},
          {"init", c.init},
          {"init_offset", c.init_offset},
          {"init_yaw", c.init_yaw},
          {"goal", c.goal},
          {"goal_offset", c.goal_offset},
          {"goal_min_span", c.goal_min_span},
          {"time_gap_prob", c.time_gap_prob},
          {"process_noise", c.process_noise}};
}

AugmentConfig AugmentConfigFromJson(const Json& j) {
  Json m = OverlayKeys(AugmentConfigToJson(AugmentConfig{}), j, "augment");
  AugmentConfig c;
  c.scale = m["scale"];
  c.scale_range = m["scale_range"];
  c.init = m["init"];
  c.init_offset = m["init_offset"];
  c.init_yaw = m["init_yaw"];
  c.goal = m["goal"];
  c.goal_offset = m["goal_offset"];
  c.goal_min_span = m["goal_min_span"];
  c.time_gap_prob = m["time_gap_prob"];
  c.process_noise = m["process_noise"];
  if (!(c.scale_range[0] > 0 && c.scale_range[0] <= c.scale_range[1])) {
    throw std::invalid_argument("augment scale_range must be positive and ordered");
  }
  return c;
}

EpisodeSetup SampleEpisode(const TaskItem& item, const AugmentConfig& a,
                           Rng& rng) {
  EpisodeSetup s;
  s.spec = item.spec;
  s.goal = item.goal;
  s.demo = item.demo;
  s.task = item.task;
  s.process_noise = a.process_noise;
  if (a.time_gap_prob > 0 && rng.Uniform(0.0, 1.0) < a.time_gap_prob) {
    s.goal = ResampleRandomGaps(s.goal, rng);
    s.demo = nullptr;  // fingertip targets no longer line up
  }
  if (a.scale) {
    for (int k = 0; k < 3; ++k) {
      s.scale[k] = rng.Uniform(a.scale_range[0], a.scale_range[1]);
    }
    s.spec = ScaleObject(s.spec, s.scale.x(), s.scale.y(), s.scale.z());
  }
  s.initial = s.goal[0];
  if (a.init) {
    s.init = SampleInitPerturbation(rng, a.init_offset, a.init_yaw);
    s.initial = PerturbState(s.goal[0], s.init);
    s.goal = ApplyYawToGoal(s.goal, s.init.yaw);
  }
  if (a.goal) {
    s.goal_perturbation =
        SampleGoalPerturbation(s.goal, rng, a.goal_offset, a.goal_min_span);
    s.goal = PerturbGoalTrajectoryWith(s.goal, s.goal_perturbation.offset,
                                       s.goal_perturbation.begin,
                                       s.goal_perturbation.end);
  }
  s.noise_seed = rng.engine()();
  return s;
}

int RolloutContext::obs_dim() const {
  return MakeObsLayout(env.fingers, action_dim(), window, obs_mode).size;
}

Actor PolicyActor(const Controller& c, bool stochastic) {
  return [&c, stochastic](const StepContext& ctx, Rng& rng) {
    Decision d;
    Vector x = c.Normalize(ctx.obs);
    if (stochastic) {
      d.action = c.policy.Sample(x, rng, &d.log_prob);
    } else {
      d.action = c.policy.Mean(x);
    }
    return d;
  };
}

Actor ReplayActor(const Demo& demo) {
  return [&demo](const StepContext& ctx, Rng&) {
    Decision d;
    int i = std::min(ctx.t + 1, demo.length() - 1);
    d.command = Command{demo.wrist_poses[i], demo.finger_closures[i]};
    return d;
  };
}

EpisodeRunner::EpisodeRunner(const RolloutContext& ctx, EpisodeSetup setup)
    : ctx_(&ctx),
      setup_(std::move(setup)),
      env_(setup_.spec,
           [&] {
             EnvConfig e = ctx.env;
             e.process_noise = setup_.process_noise;
             return e;
           }()),
      obs_rng_(setup_.noise_seed ^ 0x5bd1e995ULL) {
  if (ctx.ppo.mode != ControlMode::kVanilla && ctx.planner == nullptr) {
    throw std::invalid_argument("hierarchical rollout needs a planner");
  }
  env_.ResetTo(setup_.initial, setup_.goal.size() - 1, setup_.noise_seed);
  prev_action_.assign(ctx.action_dim(), 0.0);
  states_.push_back(env_.state().object);
  tips_.push_back({env_.state().hands[0].fingertips,
                   env_.state().hands[1].fingertips});
  if (!WithinThresholds(states_[0], setup_.goal[0], ctx.thresholds,
                        setup_.spec.LongestDim())) {
    done_ = true;
    return;
  }
  Prepare();
}

void EpisodeRunner::Prepare() {
  GoalWindow w =
      SampleGoalWindow(setup_.goal, t_, nullptr, false, ctx_->window);
  const WorldState& s = env_.state();
  if (ctx_->ppo.mode == ControlMode::kVanilla) {
    plan_.clear();
  } else {
    plan_ = ctx_->planner->Forward(setup_.spec.category_id, w, s.object);
  }
  obs_ = Observe(s, w, plan_, prev_action_, ctx_->obs_mode, &obs_rng_);
}

StepContext EpisodeRunner::context() const {
  return StepContext{env_.state(), setup_.goal, plan_, obs_, t_};
}

double EpisodeRunner::Apply(const Decision& d) {
  if (done_) throw std::logic_error("EpisodeRunner::Apply after the end");
  Command cmd = d.command ? *d.command
                          : ActionToCommand(ctx_->ppo, ctx_->env,
                                            plan_.empty() ? nullptr : &plan_[0],
                                            d.action);
  env_.Step(cmd.wrists, cmd.fingers);
  commands_.push_back(cmd);
  if (d.command) {
    std::fill(prev_action_.begin(), prev_action_.end(), 0.0);
  } else {
    prev_action_.assign(d.action.data(), d.action.data() + d.action.size());
  }
  ++t_;
  const WorldState& s = env_.state();
  states_.push_back(s.object);
  tips_.push_back({s.hands[0].fingertips, s.hands[1].fingertips});
  for (int h = 0; h < 2; ++h) {
    if (first_attach_[h] < 0 && s.attach[h]) first_attach_[h] = t_;
  }
  const ObjectState& goal = setup_.goal[t_];
  double r = Reward(goal, s.object, ctx_->ppo.reward);
  if (ctx_->ppo.fingertip_reward_coef != 0.0 && setup_.demo != nullptr &&
      t_ < setup_.demo->length()) {
    r += ctx_->ppo.fingertip_reward_coef *
         FingertipReward(setup_.demo->fingertips[t_], tips_.back());
  }
  total_reward_ += r;
  const int n = setup_.goal.size();
  if (!WithinThresholds(s.object, goal, ctx_->thresholds,
                        setup_.spec.LongestDim())) {
    completion_ = static_cast<double>(t_) / n;
    done_ = true;
  } else if (t_ == n - 1) {
    completion_ = 1.0;
    done_ = true;
  } else {
    Prepare();
  }
  return r;
}

EpisodeResult EpisodeRunner::result() const {
  EpisodeResult r;
  r.completion = completion_;
  r.total_reward = total_reward_;
  r.steps = t_;
  r.states = states_;
  return r;
}

Demo EpisodeRunner::ToDemo(bool relabel) const {
  Demo d;
  d.category_id = setup_.spec.category_id;
  d.task = setup_.task;
  d.object_states = setup_.goal.states;
  d.scale = setup_.scale;
  d.initial_state = setup_.initial;
  const int n = static_cast<int>(commands_.size()) + 1;
  d.object_states.resize(n);
  d.wrist_poses.resize(n);
  d.finger_closures.resize(n);
  for (int i = 1; i < n; ++i) {
    d.wrist_poses[i] = commands_[i - 1].wrists;
    d.finger_closures[i] = commands_[i - 1].fingers;
  }
  if (n > 1) {
    d.wrist_poses[0] = d.wrist_poses[1];
    d.finger_closures[0] = d.finger_closures[1];
  }
  d.fingertips = tips_;
  d.achieved_states = states_;
  if (relabel) {
    for (int h = 0; h < 2; ++h) {
      const int ta = first_attach_[h];
      if (ta < 0) continue;
      // offset from the executed grasp command to the canonical one
      const Pose canon = CarryWrists(setup_.spec, states_[ta]).hand(h);
      const Pose done = d.wrist_poses[ta].hand(h);
      const Vec3 shift = canon.translation - done.translation;
      const Rot turn = canon.rotation * Inverse(done).rotation;
      for (int i = 0; i < n; ++i) {
        Pose& w = d.wrist_poses[i].hand(h);
        if (i >= ta) {
          w = CarryWrists(setup_.spec, states_[i]).hand(h);
          continue;
        }
        const double u = static_cast<double>(i) / ta;
        w.translation += u * shift;
        w.rotation = Slerp(Rot(), turn, u) * w.rotation;
      }
    }
  }
  return d;
}

EpisodeResult RunEpisode(const RolloutContext& ctx, const EpisodeSetup& setup,
                         const Actor& actor, Rng& rng,
                         std::optional<Demo>* demo) {
  EpisodeRunner runner(ctx, setup);
  while (!runner.done()) runner.Apply(actor(runner.context(), rng));
  if (demo) {
    if (runner.t() > 0) *demo = runner.ToDemo();
    else demo->reset();
  }
  return runner.result();
}

std::vector<EpisodeResult> RunEpisodes(const RolloutContext& ctx,
                                       const std::vector<EpisodeSetup>& setups,
                                       const Actor& actor, uint64_t seed,
                                       std::vector<std::optional<Demo>>* demos) {
  std::vector<EpisodeResult> out(setups.size());
  if (demos) demos->assign(setups.size(), std::nullopt);
  Rng master(seed);
  ParallelFor(static_cast<int>(setups.size()), WorkerCount(ctx.ppo.workers),
              [&](int i) {
                Rng rng = master.Derive(i);
                out[i] = RunEpisode(ctx, setups[i], actor, rng,
                                    demos ? &(*demos)[i] : nullptr);
              });
  return out;
}

TaskSampler MakeSampler(std::vector<TaskItem> items, AugmentConfig augment) {
  if (items.empty()) throw std::invalid_argument("task sampler needs items");
  return [items = std::move(items), augment](Rng& rng) {
    int k = rng.UniformInt(0, static_cast<int>(items.size()) - 1);
    return SampleEpisode(items[k], augment, rng);
  };
}

void WriteTrainLogCsv(const std::vector<TrainLogRow>& rows,
                      const std::string& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# " << header << '\n';
  out << "update,episodes,mean_return,mean_completion,policy_loss,value_loss,"
         "kl,clip_fraction\n";
  out.precision(17);
  for (const TrainLogRow& r : rows) {
    out << r.update << ',' << r.episodes << ',' << r.mean_return << ','
        << r.mean_completion << ',' << r.stats.policy_loss << ','
        << r.stats.value_loss << ',' << r.stats.kl << ','
        << r.stats.clip_fraction << '\n';
  }
}

Controller NewController(const RolloutContext& ctx, Rng& rng) {
  Controller c(ctx.ppo, ctx.obs_dim(), ctx.action_dim());
  c.Init(rng);
  return c;
}

TaskItem ReferenceItem(const DemoSet& set) {
  const Demo& d = set.demos.at(ReferenceDemo(set));
  return TaskItem{set.SpecFor(d), d.goal(), &d, d.task};
}

Controller TrainController(
    const RolloutContext& ctx, const std::vector<TaskItem>& items,
    const AugmentConfig& augment, uint64_t seed,
    const std::function<void(const TrainLogRow&)>& on_update) {
  Rng rng(seed);
  Trainer trainer(ctx, MakeSampler(items, augment), NewController(ctx, rng),
                  seed);
  trainer.Train(ctx.ppo.updates, on_update);
  return std::move(trainer.controller());
}

Trainer::Trainer(const RolloutContext& ctx, TaskSampler sampler,
                 Controller controller, uint64_t seed)
    : ctx_(&ctx),
      sampler_(std::move(sampler)),
      controller_(std::move(controller)),
      rng_(seed) {
  if (controller_.obs_dim() != ctx.obs_dim() ||
      controller_.action_dim() != ctx.action_dim()) {
    throw std::invalid_argument("controller does not match the rollout shapes");
  }
  for (int l = 0; l < ctx.ppo.lanes; ++l) {
    lanes_.push_back(Lane{rng_.Derive(1000 + l), std::nullopt, 0.0});
  }
}

void Trainer::Collect(Lane& lane, int steps, LaneBuffer& buf) {
  Actor actor = PolicyActor(controller_, true);
  for (int k = 0; k < steps; ++k) {
    while (!lane.runner || lane.runner->done()) {
      if (lane.runner) {
        buf.completions.push_back(lane.runner->result().completion);
        buf.returns.push_back(lane.episode_return);
      }
      lane.runner.emplace(*ctx_, sampler_(lane.rng));
      lane.episode_return = 0.0;
    }
    EpisodeRunner& run = *lane.runner;
    buf.raw_obs.push_back(run.obs());
    Vector x = controller_.Normalize(run.obs());
    Decision d;
    d.action = controller_.policy.Sample(x, lane.rng, &d.log_prob);
    buf.values.push_back(controller_.value.Forward(x)[0]);
    buf.actions.push_back(d.action);
    buf.log_probs.push_back(d.log_prob);
    double r = run.Apply(d);
    lane.episode_return += r;
    buf.rewards.push_back(r);
    buf.dones.push_back(run.done() ? 1 : 0);
  }
  buf.bootstrap =
      lane.runner->done()
          ? 0.0
          : controller_.value.Forward(controller_.Normalize(lane.runner->obs()))[0];
}

TrainLogRow Trainer::Update() {
  const int L = static_cast<int>(lanes_.size());
  const int per_lane = (ctx_->ppo.steps_per_update + L - 1) / L;
  std::vector<LaneBuffer> bufs(L);
  ParallelFor(L, WorkerCount(ctx_->ppo.workers),
              [&](int l) { Collect(lanes_[l], per_lane, bufs[l]); });
  const int n = per_lane * L;
  const int od = controller_.obs_dim(), ad = controller_.action_dim();
  PpoBatch batch;
  batch.obs.resize(od, n);
  batch.actions.resize(ad, n);
  batch.log_probs.resize(n);
  batch.advantages.resize(n);
  batch.returns.resize(n);
  Matrix raw(od, n);
  TrainLogRow row;
  row.update = updates_;
  double completion_sum = 0, return_sum = 0;
  int col = 0;
  for (LaneBuffer& b : bufs) {
    std::vector<double> adv, ret;
    Gae(b.rewards, b.values, b.dones, b.bootstrap, ctx_->ppo.gamma,
        ctx_->ppo.gae_lambda, &adv, &ret);
    for (size_t k = 0; k < b.rewards.size(); ++k, ++col) {
      raw.col(col) = Eigen::Map<const Vector>(b.raw_obs[k].data(), od);
      batch.obs.col(col) = controller_.Normalize(b.raw_obs[k]);
      batch.actions.col(col) = b.actions[k];
      batch.log_probs[col] = b.log_probs[k];
      batch.advantages[col] = adv[k];
      batch.returns[col] = ret[k];
    }
    for (size_t e = 0; e < b.completions.size(); ++e) {
      completion_sum += b.completions[e];
      return_sum += b.returns[e];
      ++row.episodes;
    }
  }
  row.stats = PpoUpdate(controller_, batch, ctx_->ppo, rng_);
  controller_.norm.Update(raw);
  if (row.episodes > 0) {
    row.mean_completion = completion_sum / row.episodes;
    row.mean_return = return_sum / row.episodes;
  }
  ++updates_;
  return row;
}

std::vector<TrainLogRow> Trainer::Train(
    int updates, const std::function<void(const TrainLogRow&)>& on_update) {
  std::vector<TrainLogRow> rows;
  for (int u = 0; u < updates; ++u) {
    rows.push_back(Update());
    if (on_update) on_update(rows.back());
  }
  return rows;
}

}  // namespace hierdex
