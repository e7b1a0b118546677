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

#include "hierdex/env.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hierdex {
namespace {

Rot RotY(double a) { return Rot::FromAxisAngle(Vec3::UnitY(), a); }
Rot RotX(double a) { return Rot::FromAxisAngle(Vec3::UnitX(), a); }
Rot RotZ(double a) { return Rot::FromAxisAngle(Vec3::UnitZ(), a); }

Vec3 RandomUnit(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.Normal(), rng.Normal(), rng.Normal());
  } while (v.norm() < 1e-9);
  return v.normalized();
}

void CheckKeys(const Json& j, std::initializer_list<const char*> keys,
               const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) {
      throw std::invalid_argument(std::string(what) + ": unknown key '" +
                                  it.key() + "'");
    }
  }
}

}  // namespace

void ObjectSpec::Validate() const {
  if (!(dims.array() > 0.0).all()) {
    throw std::invalid_argument("ObjectSpec: dims must be positive");
  }
  if (articulated && !(joint_limits[0] < joint_limits[1])) {
    throw std::invalid_argument("ObjectSpec: joint limits need lo < hi");
  }
}

ObjectSpec MakeObjectSpec(int category_id, const Vec3& dims, bool articulated,
                          std::array<double, 2> joint_limits) {
  ObjectSpec s;
  s.category_id = category_id;
  s.dims = dims;
  s.articulated = articulated;
  s.joint_limits = joint_limits;
  s.grasp_sites[0] = Pose{Vec3(-dims.x() / 2, 0.0, dims.z() / 2), RotY(M_PI / 2)};
  if (articulated) {
    s.grasp_sites[1] = Pose{Vec3(0.0, dims.y(), 0.0), RotX(M_PI)};
  } else {
    s.grasp_sites[1] =
        Pose{Vec3(dims.x() / 2, 0.0, dims.z() / 2), RotY(-M_PI / 2)};
  }
  s.Validate();
  return s;
}

ObjectSpec ScaleObject(const ObjectSpec& spec, double sx, double sy,
                       double sz) {
  if (!(sx > 0.0 && sy > 0.0 && sz > 0.0)) {
    throw std::invalid_argument("ScaleObject: scales must be positive");
  }
  ObjectSpec out = spec;
  Vec3 s(sx, sy, sz);
  out.dims = spec.dims.cwiseProduct(s);
  for (Pose& site : out.grasp_sites) {
    site.translation = site.translation.cwiseProduct(s);
  }
  return out;
}

Pose HingeTransform(const ObjectSpec& spec, double joint_angle) {
  return Pose{Vec3(0.0, -spec.dims.y() / 2, spec.dims.z()), RotX(joint_angle)};
}

Pose PartPose(const ObjectSpec& spec, const ObjectState& s, int part) {
  if (part == 0) return s.pose();
  return Compose(s.pose(), HingeTransform(spec, s.joint_angle.value_or(0.0)));
}

Pose GraspSiteWorld(const ObjectSpec& spec, const ObjectState& s, int site) {
  return Compose(PartPose(spec, s, spec.PartOfSite(site)),
                 spec.grasp_sites[site]);
}

Json SpecToJson(const ObjectSpec& spec) {
  return Json{{"category_id", spec.category_id},
              {"dims", Vec3ToJson(spec.dims)},
              {"articulated", spec.articulated},
              {"joint_limits", spec.joint_limits},
              {"grasp_sites", {PoseToJson(spec.grasp_sites[0]),
                               PoseToJson(spec.grasp_sites[1])}},
              {"mass_scale", spec.mass_scale},
              {"friction_scale", spec.friction_scale}};
}

ObjectSpec SpecFromJson(const Json& j) {
  CheckKeys(j,
            {"category_id", "dims", "articulated", "joint_limits",
             "grasp_sites", "mass_scale", "friction_scale"},
            "ObjectSpec");
  ObjectSpec s;
  s.category_id = j.at("category_id").get<int>();
  s.dims = Vec3FromJson(j.at("dims"));
  s.articulated = j.at("articulated").get<bool>();
  s.joint_limits = j.at("joint_limits").get<std::array<double, 2>>();
  const Json& sites = j.at("grasp_sites");
  if (sites.size() != 2) {
    throw std::invalid_argument("ObjectSpec: exactly two grasp sites");
  }
  s.grasp_sites[0] = PoseFromJson(sites[0]);
  s.grasp_sites[1] = PoseFromJson(sites[1]);
  s.mass_scale = j.value("mass_scale", 1.0);
  s.friction_scale = j.value("friction_scale", 1.0);
  s.Validate();
  return s;
}

double HandState::Closure() const {
  if (fingers.empty()) return 0.0;
  return std::accumulate(fingers.begin(), fingers.end(), 0.0) / fingers.size();
}

std::vector<Vec3> FingertipPoints(const Pose& wrist,
                                  std::span<const double> fingers) {
  std::vector<Vec3> tips;
  tips.reserve(fingers.size());
  double mid = (static_cast<double>(fingers.size()) - 1.0) / 2.0;
  for (size_t k = 0; k < fingers.size(); ++k) {
    double phi = 0.45 * M_PI * fingers[k];
    Vec3 local(-0.06 * std::sin(phi), 0.02 * (k - mid),
               0.03 + 0.06 * std::cos(phi));
    tips.push_back(TransformPoint(wrist, local));
  }
  return tips;
}

Json EnvConfigToJson(const EnvConfig& c) {
  return Json{{"fingers", c.fingers},
              {"wrist_rate_translation", c.wrist_rate_translation},
              {"wrist_rate_rotation", c.wrist_rate_rotation},
              {"finger_rate", c.finger_rate},
              {"grasp_radius", c.grasp_radius},
              {"attach_closure", c.attach_closure},
              {"detach_closure", c.detach_closure},
              {"fall_rate", c.fall_rate},
              {"process_noise", c.process_noise},
              {"noise_translation", c.noise_translation},
              {"noise_rotation", c.noise_rotation},
              {"randomize_domain", c.randomize_domain},
              {"randomize_period", c.randomize_period},
              {"home_left", PoseToJson(c.home_left)},
              {"home_right", PoseToJson(c.home_right)},
              {"init_max_offset", c.init_max_offset},
              {"init_max_yaw", c.init_max_yaw}};
}

EnvConfig EnvConfigFromJson(const Json& j) {
  EnvConfig c;
  CheckKeys(j,
            {"fingers", "wrist_rate_translation", "wrist_rate_rotation",
             "finger_rate", "grasp_radius", "attach_closure", "detach_closure",
             "fall_rate", "process_noise", "noise_translation",
             "noise_rotation", "randomize_domain", "randomize_period",
             "home_left", "home_right", "init_max_offset", "init_max_yaw"},
            "env");
  c.fingers = j.value("fingers", c.fingers);
  c.wrist_rate_translation =
      j.value("wrist_rate_translation", c.wrist_rate_translation);
  c.wrist_rate_rotation = j.value("wrist_rate_rotation", c.wrist_rate_rotation);
  c.finger_rate = j.value("finger_rate", c.finger_rate);
  c.grasp_radius = j.value("grasp_radius", c.grasp_radius);
  c.attach_closure = j.value("attach_closure", c.attach_closure);
  c.detach_closure = j.value("detach_closure", c.detach_closure);
  c.fall_rate = j.value("fall_rate", c.fall_rate);
  c.process_noise = j.value("process_noise", c.process_noise);
  c.noise_translation = j.value("noise_translation", c.noise_translation);
  c.noise_rotation = j.value("noise_rotation", c.noise_rotation);
  c.randomize_domain = j.value("randomize_domain", c.randomize_domain);
  c.randomize_period = j.value("randomize_period", c.randomize_period);
  if (j.contains("home_left")) c.home_left = PoseFromJson(j["home_left"]);
  if (j.contains("home_right")) c.home_right = PoseFromJson(j["home_right"]);
  c.init_max_offset = j.value("init_max_offset", c.init_max_offset);
  c.init_max_yaw = j.value("init_max_yaw", c.init_max_yaw);
  if (c.fingers < 1) throw std::invalid_argument("env: fingers must be >= 1");
  if (c.detach_closure >= c.attach_closure) {
    throw std::invalid_argument("env: detach closure must be below attach");
  }
  return c;
}

void RandomizeDomain(WorldState& state, ObjectSpec& spec, Rng& rng) {
  spec.mass_scale = rng.Uniform(0.8, 1.2);
  spec.friction_scale = rng.Uniform(0.8, 1.2);
  state.obs_noise_scale = rng.Uniform(0.0, 1.5);
  ++state.randomizations;
}

double EffectiveGraspRadius(const EnvConfig& c, const ObjectSpec& spec) {
  return c.grasp_radius * (1.0 + 0.5 * (spec.friction_scale - 1.0));
}

Env::Env(ObjectSpec spec, EnvConfig config)
    : spec_(std::move(spec)), config_(std::move(config)) {
  spec_.Validate();
}

const WorldState& Env::Reset(const GoalTrajectory& g, Rng& rng,
                             bool perturb_init) {
  if (g.size() < 2) throw std::invalid_argument("Reset: trajectory too short");
  ObjectState object = g[0];
  InitPerturbation p;
  if (perturb_init) {
    p = SampleInitPerturbation(rng, config_.init_max_offset,
                               config_.init_max_yaw);
    object = PerturbState(object, p);
  }
  ResetTo(object, g.size() - 1, rng.engine()());
  state_.init = p;
  return state_;
}

const WorldState& Env::ResetTo(const ObjectState& object, int horizon,
                               uint64_t noise_seed) {
  WorldState s;
  s.nominal = object;
  if (spec_.articulated && !s.nominal.joint_angle) s.nominal.joint_angle = 0.0;
  if (s.nominal.joint_angle && spec_.articulated) {
    s.nominal.joint_angle = std::clamp(*s.nominal.joint_angle,
                                       spec_.joint_limits[0],
                                       spec_.joint_limits[1]);
  }
  s.object = s.nominal;
  s.previous_object = s.nominal;
  for (int h = 0; h < 2; ++h) {
    s.hands[h].wrist = config_.home(h);
    s.hands[h].fingers.assign(config_.fingers, 0.0);
    s.hands[h].fingertips = FingertipPoints(s.hands[h].wrist, s.hands[h].fingers);
    s.previous_fingers[h] = s.hands[h].fingers;
  }
  s.horizon = horizon;
  s.rng = Rng(noise_seed);
  state_ = std::move(s);
  return state_;
}

StepInfo Env::Step(const WristAction& wrists, const FingerCommands& fingers) {
  if (state_.terminated || state_.step >= state_.horizon) {
    throw std::logic_error("Env::Step on a terminated episode");
  }
  for (int h = 0; h < 2; ++h) {
    const Pose& cmd = wrists.hand(h);
    if (!IsFinite(cmd.translation)) {
      throw std::invalid_argument("Env::Step: non-finite wrist command");
    }
    if (static_cast<int>(fingers[h].size()) != config_.fingers) {
      throw std::invalid_argument("Env::Step: finger command size mismatch");
    }
    for (double f : fingers[h]) {
      if (!std::isfinite(f)) {
        throw std::invalid_argument("Env::Step: non-finite finger command");
      }
    }
  }
  StepInfo info;
  state_.previous_object = state_.object;
  for (int h = 0; h < 2; ++h) {
    HandState& hand = state_.hands[h];
    state_.previous_fingers[h] = hand.fingers;
    const Pose& cmd = wrists.hand(h);
    Vec3 d = cmd.translation - hand.wrist.translation;
    double n = d.norm();
    if (n > config_.wrist_rate_translation) {
      hand.wrist.translation += d * (config_.wrist_rate_translation / n);
    } else {
      hand.wrist.translation = cmd.translation;
    }
    double angle = QuatAngle(hand.wrist.rotation, cmd.rotation);
    if (angle > config_.wrist_rate_rotation) {
      hand.wrist.rotation = Slerp(hand.wrist.rotation, cmd.rotation,
                                  config_.wrist_rate_rotation / angle);
    } else {
      hand.wrist.rotation = cmd.rotation;
    }
    for (int k = 0; k < config_.fingers; ++k) {
      double target = std::clamp(fingers[h][k], 0.0, 1.0);
      double delta = std::clamp(target - hand.fingers[k], -config_.finger_rate,
                                config_.finger_rate);
      hand.fingers[k] = std::clamp(hand.fingers[k] + delta, 0.0, 1.0);
    }
  }
  UpdateAttachments(info);
  MoveObject();
  for (HandState& hand : state_.hands) {
    hand.fingertips = FingertipPoints(hand.wrist, hand.fingers);
  }
  ++state_.step;
  if (config_.randomize_domain && config_.randomize_period > 0 &&
      state_.step % config_.randomize_period == 0) {
    RandomizeDomain(state_, spec_, state_.rng);
    info.randomized = true;
  }
  ApplyNoise();
  for (int h = 0; h < 2; ++h) info.attached[h] = state_.attach[h].has_value();
  return info;
}

void Env::UpdateAttachments(StepInfo& info) {
  const double radius = EffectiveGraspRadius(config_, spec_);
  auto ready = [&](int h) {
    const HandState& hand = state_.hands[h];
    if (hand.Closure() <= config_.attach_closure) return false;
    Vec3 site = GraspSiteWorld(spec_, state_.nominal, h).translation;
    return (hand.wrist.translation - site).norm() < radius;
  };
  for (int h = 0; h < 2; ++h) {
    if (state_.attach[h] &&
        state_.hands[h].Closure() < config_.detach_closure) {
      state_.attach[h].reset();
      info.detach_event[h] = true;
    }
  }
  if (!spec_.articulated) {
    // rigid objects need a two-handed carry
    if (state_.attach[kLeft].has_value() != state_.attach[kRight].has_value()) {
      for (int h = 0; h < 2; ++h) {
        if (state_.attach[h]) {
          state_.attach[h].reset();
          info.detach_event[h] = true;
        }
      }
    }
    if (!state_.attach[kLeft] && ready(kLeft) && ready(kRight)) {
      Pose base = state_.nominal.pose();
      for (int h = 0; h < 2; ++h) {
        state_.attach[h] =
            Attachment{0, Compose(Inverse(state_.hands[h].wrist), base)};
        info.attach_event[h] = true;
      }
    }
    return;
  }
  for (int h = 0; h < 2; ++h) {
    if (state_.attach[h] || !ready(h)) continue;
    state_.attach[h] = Attachment{
        h, Compose(Inverse(state_.hands[h].wrist),
                   PartPose(spec_, state_.nominal, h))};
    info.attach_event[h] = true;
  }
}

void Env::MoveObject() {
  ObjectState& o = state_.nominal;
  const auto& att = state_.attach;
  auto implied = [&](int h) {
    return Compose(state_.hands[h].wrist, att[h]->grasp);
  };
  bool supported = false;
  if (!spec_.articulated) {
    if (att[kLeft] && att[kRight]) {
      Pose a = implied(kLeft);
      Pose b = implied(kRight);
      o.translation = 0.5 * (a.translation + b.translation);
      o.rotation = Slerp(a.rotation, b.rotation, 0.5);
      supported = true;
    }
  } else {
    if (att[kLeft]) {
      Pose base = implied(kLeft);
      o.translation = base.translation;
      o.rotation = base.rotation;
      supported = true;
    }
    if (att[kRight]) {
      Rot rel = o.rotation.Inverse() * implied(kRight).rotation;
      double theta = 2.0 * std::atan2(rel.x(), rel.w());
      o.joint_angle =
          std::clamp(theta, spec_.joint_limits[0], spec_.joint_limits[1]);
      supported = true;
    }
  }
  if (!supported && o.translation.z() > 0.0) {
    o.translation.z() =
        std::max(0.0, o.translation.z() - config_.fall_rate * spec_.mass_scale);
  }
}

void Env::ApplyNoise() {
  state_.object = state_.nominal;
  if (!config_.process_noise) return;
  Rng& rng = state_.rng;
  Vec3 dt = RandomUnit(rng) *
            rng.Uniform(-config_.noise_translation, config_.noise_translation);
  Vec3 dr = RandomUnit(rng) *
            rng.Uniform(-config_.noise_rotation, config_.noise_rotation);
  state_.object.translation += dt;
  state_.object.rotation = Rot::FromRotationVector(dr) * state_.object.rotation;
}

GoalTrajectory ApplyYawToGoal(const GoalTrajectory& g, double yaw) {
  GoalTrajectory out = g;
  if (yaw == 0.0 || g.states.empty()) return out;
  Rot rz = RotZ(yaw);
  Vec3 center = g.states[0].translation;
  for (ObjectState& s : out.states) {
    s.translation = center + rz.Rotate(s.translation - center);
    s.rotation = rz * s.rotation;
  }
  return out;
}

InitPerturbation SampleInitPerturbation(Rng& rng, double max_offset,
                                        double max_yaw) {
  InitPerturbation p;
  p.dx = rng.Uniform(-max_offset, max_offset);
  p.dy = rng.Uniform(-max_offset, max_offset);
  p.yaw = rng.Uniform(0.0, max_yaw);
  return p;
}

ObjectState PerturbState(const ObjectState& s, const InitPerturbation& p) {
  ObjectState out = s;
  out.translation += Vec3(p.dx, p.dy, 0.0);
  out.rotation = RotZ(p.yaw) * s.rotation;
  return out;
}

ObsLayout MakeObsLayout(int fingers, int action_dim, int window,
                        ObsMode mode) {
  ObsLayout l;
  int at = 0;
  l.object = at;
  at += 7;
  l.joint = at;
  at += 1;
  l.wrists = at;
  at += 14;
  l.wrists_in_object = at;
  at += 14;
  l.fingers = at;
  at += 2 * fingers;
  l.prev_action = at;
  at += action_dim;
  l.goal_window = at;
  at += window * kRelativeFeaturesPerState;
  l.wrist_window = at;
  at += window * 14;
  l.velocity = at;
  l.velocity_size = mode == ObsMode::kTeacher ? 6 + 2 * fingers : 0;
  at += l.velocity_size;
  l.size = at;
  return l;
}

std::vector<double> Observe(const WorldState& state, const GoalWindow& window,
                            std::span<const WristAction> wrist_window,
                            std::span<const double> prev_action, ObsMode mode,
                            Rng* noise) {
  const int fingers = static_cast<int>(state.hands[0].fingers.size());
  const int T = static_cast<int>(window.states.size());
  ObsLayout layout = MakeObsLayout(fingers, static_cast<int>(prev_action.size()),
                                   T, mode);
  std::vector<double> obs;
  obs.reserve(layout.size);
  ObjectState object = state.object;
  if (noise != nullptr && state.obs_noise_scale > 0.0) {
    for (int a = 0; a < 3; ++a) {
      object.translation[a] += noise->Normal(0.0, 0.002 * state.obs_noise_scale);
    }
    if (object.joint_angle) {
      *object.joint_angle += noise->Normal(0.0, 0.01 * state.obs_noise_scale);
    }
  }
  auto pose = PoseToArray(object.pose());
  obs.insert(obs.end(), pose.begin(), pose.end());
  obs.push_back(object.joint_angle.value_or(0.0));
  for (const HandState& hand : state.hands) {
    auto w = PoseToArray(hand.wrist);
    obs.insert(obs.end(), w.begin(), w.end());
  }
  const Pose to_object = Inverse(object.pose());
  for (const HandState& hand : state.hands) {
    auto w = PoseToArray(Compose(to_object, hand.wrist));
    obs.insert(obs.end(), w.begin(), w.end());
  }
  for (const HandState& hand : state.hands) {
    obs.insert(obs.end(), hand.fingers.begin(), hand.fingers.end());
  }
  obs.insert(obs.end(), prev_action.begin(), prev_action.end());
  std::vector<double> goal = RelativeGoalWindow(window, object);
  obs.insert(obs.end(), goal.begin(), goal.end());
  for (int j = 0; j < T; ++j) {
    for (int h = 0; h < 2; ++h) {
      if (j < static_cast<int>(wrist_window.size())) {
        const Pose& wrist = state.hands[h].wrist;
        const Pose& cmd = wrist_window[j].hand(h);
        Vec3 dt = cmd.translation - wrist.translation;
        Rot dr = wrist.rotation.Inverse() * cmd.rotation;
        obs.insert(obs.end(), {dt.x(), dt.y(), dt.z(), dr.w(), dr.x(), dr.y(),
                               dr.z()});
      } else {
        obs.insert(obs.end(), 7, 0.0);
      }
    }
  }
  if (mode == ObsMode::kTeacher) {
    Vec3 v = state.object.translation - state.previous_object.translation;
    Vec3 w = (state.previous_object.rotation.Inverse() * state.object.rotation)
                 .RotationVector();
    obs.insert(obs.end(), {v.x(), v.y(), v.z(), w.x(), w.y(), w.z()});
    for (int h = 0; h < 2; ++h) {
      for (int k = 0; k < fingers; ++k) {
        obs.push_back(state.hands[h].fingers[k] - state.previous_fingers[h][k]);
      }
    }
  }
  return obs;
}

Json EpisodeLogRecord(const WorldState& state) {
  Json hands = Json::array();
  Json attach = Json::array();
  for (int h = 0; h < 2; ++h) {
    hands.push_back({{"wrist", PoseToJson(state.hands[h].wrist)},
                     {"fingers", state.hands[h].fingers}});
    if (state.attach[h]) {
      attach.push_back({{"part", state.attach[h]->part},
                        {"grasp", PoseToJson(state.attach[h]->grasp)}});
    } else {
      attach.push_back(nullptr);
    }
  }
  return Json{{"step", state.step},
              {"object", StateToJson(state.object)},
              {"hands", hands},
              {"attachments", attach}};
}

}  // namespace hierdex
