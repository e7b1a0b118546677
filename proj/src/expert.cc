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

#include "hierdex/expert.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hierdex/parallel.h"

namespace hierdex {
namespace {

bool SameState(const ObjectState& a, const ObjectState& b) {
  if ((a.translation - b.translation).norm() > 1e-12) return false;
  if (QuatAngle(a.rotation, b.rotation) > 1e-9) return false;
  return std::abs(a.joint_angle.value_or(0.0) - b.joint_angle.value_or(0.0)) <=
         1e-12;
}

ObjectState Yawed(const ObjectState& s, double yaw) {
  ObjectState out = s;
  out.rotation = Rot::FromAxisAngle(Vec3::UnitZ(), yaw) * s.rotation;
  return out;
}

ObjectState RandomStart(const ObjectSpec& spec, Rng& rng) {
  ObjectState s;
  s.translation = Vec3(rng.Uniform(-0.04, 0.04), rng.Uniform(-0.04, 0.04), 0.0);
  s.rotation = Rot::FromAxisAngle(Vec3::UnitZ(), rng.Uniform(-0.4, 0.4));
  if (spec.articulated) s.joint_angle = spec.joint_limits[0];
  return s;
}

// First step at which the goal may start moving.
int MotionStart(const ObjectSpec& spec, const ObjectState& start, int steps,
                const EnvConfig& config) {
  int begin = std::max(GraspReadyStep(spec, start, config) + 4, steps / 4);
  if (steps - 1 - begin < 20) {
    throw std::invalid_argument("task needs at least " +
                                std::to_string(begin + 21) + " steps");
  }
  return begin;
}

FingerCommands Closures(int fingers, double c) {
  return {std::vector<double>(fingers, c), std::vector<double>(fingers, c)};
}

Json FingersToJson(const FingerCommands& f) { return Json{f[0], f[1]}; }

FingerCommands FingersFromJson(const Json& j) {
  return {j.at(0).get<std::vector<double>>(),
          j.at(1).get<std::vector<double>>()};
}

}  // namespace

WristAction CarryWrists(const ObjectSpec& spec, const ObjectState& s) {
  return WristAction{Compose(GraspSiteWorld(spec, s, 0), kGraspStandoff),
                     Compose(GraspSiteWorld(spec, s, 1), kGraspStandoff)};
}

std::string TaskFamilyName(TaskFamily f) {
  switch (f) {
    case TaskFamily::kLift: return "lift";
    case TaskFamily::kLiftAndPlace: return "lift_and_place";
    case TaskFamily::kLidOpen: return "lid_open";
    case TaskFamily::kLiftWhileArticulate: return "lift_while_articulate";
  }
  return "";
}

TaskFamily TaskFamilyFromName(const std::string& name) {
  for (TaskFamily f : {TaskFamily::kLift, TaskFamily::kLiftAndPlace,
                       TaskFamily::kLidOpen, TaskFamily::kLiftWhileArticulate}) {
    if (TaskFamilyName(f) == name) return f;
  }
  throw std::invalid_argument("unknown task family: " + name);
}

std::string SplitName(Split s) {
  switch (s) {
    case Split::kTrained: return "trained";
    case Split::kUnseenTraj: return "unseen_traj";
    case Split::kUnseenObj: return "unseen_obj";
  }
  return "";
}

Split SplitFromName(const std::string& name) {
  for (Split s : {Split::kTrained, Split::kUnseenTraj, Split::kUnseenObj}) {
    if (SplitName(s) == name) return s;
  }
  throw std::invalid_argument("unknown split: " + name);
}

GoalTrajectory Demo::goal() const {
  GoalTrajectory g;
  g.states = object_states;
  g.category_id = category_id;
  return g;
}

void Demo::Validate(const EnvConfig& config) const {
  size_t n = object_states.size();
  if (n < 2 || wrist_poses.size() != n || finger_closures.size() != n ||
      fingertips.size() != n) {
    throw std::invalid_argument("demo sequences must share a length >= 2");
  }
  if (!achieved_states.empty() && achieved_states.size() != n) {
    throw std::invalid_argument("demo achieved states must match its length");
  }
  for (size_t i = 1; i < n; ++i) {
    for (int h = 0; h < 2; ++h) {
      const Pose& a = wrist_poses[i - 1].hand(h);
      const Pose& b = wrist_poses[i].hand(h);
      if ((b.translation - a.translation).norm() >
              config.wrist_rate_translation + 1e-9 ||
          QuatAngle(a.rotation, b.rotation) > config.wrist_rate_rotation + 1e-9) {
        throw std::invalid_argument("demo wrist jump at step " +
                                    std::to_string(i));
      }
    }
  }
}

std::vector<int> DemoSet::Indices(Split s) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (splits[i] == s) out.push_back(i);
  }
  return out;
}

DemoSet DemoSet::Subset(Split s) const {
  DemoSet out;
  out.categories = categories;
  for (int i : Indices(s)) out.Append(demos[i], s);
  return out;
}

void DemoSet::Append(const Demo& d, Split s) {
  demos.push_back(d);
  splits.push_back(s);
}

const ObjectSpec& DemoSet::Category(int id) const {
  if (id < 0 || id >= static_cast<int>(categories.size())) {
    throw std::out_of_range("unknown category id " + std::to_string(id));
  }
  return categories[id];
}

ObjectSpec DemoSet::SpecFor(const Demo& d) const {
  const ObjectSpec& base = Category(d.category_id);
  if (d.scale == Vec3::Ones()) return base;
  return ScaleObject(base, d.scale.x(), d.scale.y(), d.scale.z());
}

int GraspReadyStep(const ObjectSpec& spec, const ObjectState& s,
                   const EnvConfig& config) {
  WristAction target = CarryWrists(spec, s);
  int arrival = 0;
  for (int h = 0; h < 2; ++h) {
    const Pose& home = config.home(h);
    double d = (target.hand(h).translation - home.translation).norm();
    double a = QuatAngle(target.hand(h).rotation, home.rotation);
    int steps = static_cast<int>(std::ceil(
        std::max(d / config.wrist_rate_translation,
                 a / config.wrist_rate_rotation) - 1e-9));
    arrival = std::max(arrival, steps);
  }
  // closure passes the attach threshold within 8 ramp steps
  return arrival + static_cast<int>(std::ceil(1.0 / kClosureRamp)) + 1;
}

Demo PlanExpert(const ObjectSpec& spec, const GoalTrajectory& g,
                const EnvConfig& config) {
  const int n = g.size();
  if (n < 2) throw std::invalid_argument("goal trajectory too short");
  Demo d;
  d.category_id = spec.category_id;
  d.object_states = g.states;
  d.wrist_poses.reserve(n);
  for (const ObjectState& s : g.states) {
    d.wrist_poses.push_back(CarryWrists(spec, s));
  }
  for (int i = 1; i < n; ++i) {
    for (int h = 0; h < 2; ++h) {
      const Pose& a = d.wrist_poses[i - 1].hand(h);
      const Pose& b = d.wrist_poses[i].hand(h);
      double dt = (b.translation - a.translation).norm();
      double dr = QuatAngle(a.rotation, b.rotation);
      if (dt > config.wrist_rate_translation + 1e-12 ||
          dr > config.wrist_rate_rotation + 1e-12) {
        std::ostringstream msg;
        msg << "infeasible goal trajectory at step " << i << ": wrist moves "
            << dt << " m / " << dr << " rad";
        throw std::invalid_argument(msg.str());
      }
    }
  }
  int ready = GraspReadyStep(spec, g[0], config);
  for (int i = 1; i < std::min(n, ready + 1); ++i) {
    if (!SameState(g[i], g[0])) {
      throw std::invalid_argument(
          "infeasible goal trajectory at step " + std::to_string(i) +
          ": object moves before the grasp is ready at step " +
          std::to_string(ready));
    }
  }

  EnvConfig quiet = config;
  quiet.process_noise = false;
  quiet.randomize_domain = false;
  Env env(spec, quiet);
  env.ResetTo(g[0], n - 1, 0);
  d.finger_closures.assign(n, Closures(config.fingers, 0.0));
  d.fingertips.resize(n);
  d.fingertips[0] = {env.state().hands[0].fingertips,
                     env.state().hands[1].fingertips};
  std::vector<ObjectState> actual = {env.state().object};
  int arrival = -1;
  for (int t = 0; t + 1 < n; ++t) {
    if (arrival < 0) {
      bool there = true;
      for (int h = 0; h < 2; ++h) {
        const Pose& w = env.state().hands[h].wrist;
        const Pose& target = d.wrist_poses[t + 1].hand(h);
        there = there && (w.translation - target.translation).norm() < 1e-12 &&
                QuatAngle(w.rotation, target.rotation) < 1e-9;
      }
      if (there) arrival = t;
    }
    double c = arrival < 0 ? 0.0 : std::min(1.0, kClosureRamp * (t + 1 - arrival));
    d.finger_closures[t + 1] = Closures(config.fingers, c);
    env.Step(d.wrist_poses[t + 1], d.finger_closures[t + 1]);
    d.fingertips[t + 1] = {env.state().hands[0].fingertips,
                           env.state().hands[1].fingertips};
    actual.push_back(env.state().object);
  }
  int bad = FirstViolation(actual, g, CompletionThresholds{}, spec.LongestDim());
  if (bad < n) {
    throw std::invalid_argument("expert replay leaves the goal at step " +
                                std::to_string(bad));
  }
  return d;
}

std::vector<ObjectState> ReplayInEnv(const Demo& d, Env& env) {
  std::vector<ObjectState> states = {env.state().object};
  for (int t = 0; t + 1 < d.length(); ++t) {
    const WorldState& s = env.state();
    if (s.terminated || s.step >= s.horizon) break;
    env.Step(d.wrist_poses[t + 1], d.finger_closures[t + 1]);
    states.push_back(env.state().object);
  }
  return states;
}

double ReplayCompletion(const Demo& d, const ObjectSpec& spec,
                        const EnvConfig& config,
                        const CompletionThresholds& th) {
  EnvConfig quiet = config;
  quiet.process_noise = false;
  quiet.randomize_domain = false;
  Env env(spec, quiet);
  env.ResetTo(d.initial_state.value_or(d.object_states.front()),
              d.length() - 1, 0);
  std::vector<ObjectState> states = ReplayInEnv(d, env);
  return CompletionRate(states, d.goal(), th, spec.LongestDim());
}

GoalTrajectory SampleTask(const ObjectSpec& spec, TaskFamily family, int steps,
                          Rng& rng, const EnvConfig& config) {
  bool needs_joint = family == TaskFamily::kLidOpen ||
                     family == TaskFamily::kLiftWhileArticulate;
  if (needs_joint != spec.articulated) {
    throw std::invalid_argument("task family " + TaskFamilyName(family) +
                                " does not fit the object");
  }
  ObjectState start = RandomStart(spec, rng);
  const int begin = MotionStart(spec, start, steps, config);
  const int span = steps - 1 - begin;
  const int last = steps - 1;
  std::vector<Keypose> keys = {{start, 0}, {start, begin}};
  switch (family) {
    case TaskFamily::kLift: {
      ObjectState up = Yawed(start, rng.Uniform(-0.3, 0.3));
      up.translation += Vec3(rng.Uniform(-0.03, 0.03),
                             rng.Uniform(-0.03, 0.03), rng.Uniform(0.08, 0.15));
      keys.push_back({up, begin + span * 3 / 5});
      keys.push_back({up, last});
      break;
    }
    case TaskFamily::kLiftAndPlace: {
      double heading = rng.Uniform(-M_PI, M_PI);
      double reach = rng.Uniform(0.03, 0.12);
      Vec3 lateral(reach * std::cos(heading), reach * std::sin(heading), 0.0);
      ObjectState up = Yawed(start, rng.Uniform(-0.2, 0.2));
      up.translation += 0.5 * lateral + Vec3(0, 0, rng.Uniform(0.08, 0.14));
      ObjectState down = Yawed(up, rng.Uniform(-0.2, 0.2));
      down.translation = start.translation + lateral;
      keys.push_back({up, begin + span * 9 / 20});
      keys.push_back({down, last});
      break;
    }
    case TaskFamily::kLidOpen: {
      ObjectState open = start;
      double lo = spec.joint_limits[0], hi = spec.joint_limits[1];
      open.joint_angle = lo + rng.Uniform(0.5, 0.85) * (hi - lo);
      keys.push_back({open, begin + span * 4 / 5});
      keys.push_back({open, last});
      break;
    }
    case TaskFamily::kLiftWhileArticulate: {
      ObjectState up = start;
      double lo = spec.joint_limits[0], hi = spec.joint_limits[1];
      up.translation.z() += rng.Uniform(0.05, 0.10);
      up.joint_angle = lo + rng.Uniform(0.4, 0.7) * (hi - lo);
      keys.push_back({up, begin + span * 7 / 10});
      keys.push_back({up, last});
      break;
    }
  }
  GoalTrajectory g = InterpolateKeyposes(keys, steps);
  g.category_id = spec.category_id;
  return g;
}

GoalTrajectory KeyposeTask(const ObjectSpec& spec, double raise,
                           const Vec3& landing_offset, int steps,
                           const EnvConfig& config) {
  ObjectState start;
  if (spec.articulated) start.joint_angle = spec.joint_limits[0];
  const int begin = MotionStart(spec, start, steps, config);
  ObjectState up = start;
  up.translation.z() += raise;
  ObjectState land = start;
  land.translation += Vec3(landing_offset.x(), landing_offset.y(), 0.0);
  std::vector<Keypose> keys = {
      {start, 0}, {start, begin}, {up, (begin + steps - 1) / 2},
      {land, steps - 1}};
  GoalTrajectory g = InterpolateKeyposes(keys, steps);
  g.category_id = spec.category_id;
  return g;
}

GoalTrajectory KeyposeTask(const ObjectSpec& spec, Rng& rng, int steps,
                           const EnvConfig& config) {
  double raise = rng.Uniform(0.10, 0.20);
  double heading = rng.Uniform(-M_PI, M_PI);
  double reach = rng.Uniform(0.0, 0.15);
  return KeyposeTask(
      spec, raise,
      Vec3(reach * std::cos(heading), reach * std::sin(heading), 0.0), steps,
      config);
}

std::vector<ObjectSpec> DefaultCategories() {
  return {
      MakeObjectSpec(0, Vec3(0.20, 0.15, 0.10), false),
      MakeObjectSpec(1, Vec3(0.30, 0.12, 0.08), false),
      MakeObjectSpec(2, Vec3(0.24, 0.18, 0.03), true, {0.0, 2.0}),
      MakeObjectSpec(3, Vec3(0.18, 0.14, 0.10), true, {0.0, 1.8}),
      MakeObjectSpec(4, Vec3(0.26, 0.18, 0.05), false),
  };
}

Json DatasetConfigToJson(const DatasetConfig& c) {
  return {{"per_category", c.per_category},
          {"steps", c.steps},
          {"workers", c.workers}};
}

DatasetConfig DatasetConfigFromJson(const Json& j) {
  DatasetConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "per_category") c.per_category = value.get<int>();
    else if (key == "steps") c.steps = value.get<int>();
    else if (key == "workers") c.workers = value.get<int>();
    else throw std::invalid_argument("unknown dataset key: " + key);
  }
  if (c.per_category < 1 || c.steps < 2) {
    throw std::invalid_argument("dataset needs per_category >= 1, steps >= 2");
  }
  return c;
}

DemoSet GenDataset(const std::vector<ObjectSpec>& categories,
                   const DatasetConfig& config, Rng& rng,
                   const EnvConfig& env_config) {
  const int nc = static_cast<int>(categories.size());
  if (nc < 2) throw std::invalid_argument("need at least 2 categories");
  for (int c = 0; c < nc; ++c) {
    if (categories[c].category_id != c) {
      throw std::invalid_argument("category ids must equal their index");
    }
  }
  const int per = config.per_category;
  const int held = (per + 4) / 5;
  std::vector<Demo> demos(nc * per);
  ParallelFor(nc * per, WorkerCount(config.workers), [&](int k) {
    const int c = k / per, i = k % per;
    const ObjectSpec& spec = categories[c];
    TaskFamily family =
        spec.articulated
            ? (i % 2 == 0 ? TaskFamily::kLidOpen
                          : TaskFamily::kLiftWhileArticulate)
            : (i % 2 == 0 ? TaskFamily::kLiftAndPlace : TaskFamily::kLift);
    for (int attempt = 0;; ++attempt) {
      Rng stream = rng.Derive(static_cast<uint64_t>(c) * 1000003ULL +
                              static_cast<uint64_t>(i) * 16 + attempt);
      try {
        Demo d = PlanExpert(
            spec, SampleTask(spec, family, config.steps, stream, env_config),
            env_config);
        d.task = TaskFamilyName(family);
        demos[k] = std::move(d);
        return;
      } catch (const std::invalid_argument&) {
        if (attempt == 9) throw;
      }
    }
  });
  DemoSet set;
  set.categories = categories;
  for (int k = 0; k < nc * per; ++k) {
    const int c = k / per, i = k % per;
    Split s = c == nc - 1 ? Split::kUnseenObj
              : i >= per - held ? Split::kUnseenTraj
                                : Split::kTrained;
    set.Append(demos[k], s);
  }
  return set;
}

int ReferenceDemo(const DemoSet& set) {
  for (int i : set.Indices(Split::kTrained)) {
    if (set.demos[i].category_id == 0 && set.demos[i].task == "lift_and_place") {
      return i;
    }
  }
  throw std::invalid_argument("dataset has no reference lift_and_place demo");
}

Json DemoToJson(const Demo& d) {
  Json states = Json::array(), wrists = Json::array(), closures = Json::array(),
       tips = Json::array();
  for (int i = 0; i < d.length(); ++i) {
    states.push_back(StateToJson(d.object_states[i]));
    wrists.push_back(Json{PoseToJson(d.wrist_poses[i].left),
                          PoseToJson(d.wrist_poses[i].right)});
    closures.push_back(FingersToJson(d.finger_closures[i]));
    Json hands = Json::array();
    for (const auto& hand : d.fingertips[i]) {
      Json pts = Json::array();
      for (const Vec3& p : hand) pts.push_back(Vec3ToJson(p));
      hands.push_back(pts);
    }
    tips.push_back(hands);
  }
  Json achieved = Json::array();
  for (const ObjectState& s : d.achieved_states) achieved.push_back(StateToJson(s));
  return {{"category_id", d.category_id},
          {"task", d.task},
          {"length", d.length()},
          {"scale", Vec3ToJson(d.scale)},
          {"initial_state",
           d.initial_state ? StateToJson(*d.initial_state) : Json(nullptr)},
          {"states", states},
          {"wrists", wrists},
          {"closures", closures},
          {"fingertips", tips},
          {"achieved", achieved}};
}

Demo DemoFromJson(const Json& j) {
  Demo d;
  d.category_id = j.at("category_id").get<int>();
  d.task = j.at("task").get<std::string>();
  d.scale = Vec3FromJson(j.at("scale"));
  if (!j.at("initial_state").is_null()) {
    d.initial_state = StateFromJson(j.at("initial_state"));
  }
  for (const Json& s : j.at("states")) d.object_states.push_back(StateFromJson(s));
  for (const Json& w : j.at("wrists")) {
    d.wrist_poses.push_back({PoseFromJson(w.at(0)), PoseFromJson(w.at(1))});
  }
  for (const Json& c : j.at("closures")) {
    d.finger_closures.push_back(FingersFromJson(c));
  }
  for (const Json& hands : j.at("fingertips")) {
    std::array<std::vector<Vec3>, 2> tip;
    for (int h = 0; h < 2; ++h) {
      for (const Json& p : hands.at(h)) tip[h].push_back(Vec3FromJson(p));
    }
    d.fingertips.push_back(std::move(tip));
  }
  if (j.contains("achieved")) {
    for (const Json& s : j.at("achieved")) {
      d.achieved_states.push_back(StateFromJson(s));
    }
  }
  if (j.at("length").get<int>() != d.length()) {
    throw std::invalid_argument("demo length field does not match its data");
  }
  return d;
}

void SaveDemoSet(const DemoSet& set, const std::string& dir, const Json& meta) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream demos(fs::path(dir) / "demos.jsonl");
  if (!demos) throw std::runtime_error("cannot write " + dir + "/demos.jsonl");
  for (const Demo& d : set.demos) demos << DemoToJson(d).dump() << '\n';
  Json manifest = {{"meta", meta}};
  for (Split s : {Split::kTrained, Split::kUnseenTraj, Split::kUnseenObj}) {
    manifest[SplitName(s)] = set.Indices(s);
  }
  std::ofstream(fs::path(dir) / "splits.json") << manifest.dump(2) << '\n';
  Json objects = Json::array();
  for (const ObjectSpec& spec : set.categories) objects.push_back(SpecToJson(spec));
  std::ofstream(fs::path(dir) / "objects.json")
      << Json{{"categories", objects}}.dump(2) << '\n';
}

DemoSet LoadDemoSet(const std::string& dir) {
  namespace fs = std::filesystem;
  DemoSet set;
  std::ifstream objects(fs::path(dir) / "objects.json");
  std::ifstream demos(fs::path(dir) / "demos.jsonl");
  std::ifstream manifest(fs::path(dir) / "splits.json");
  if (!objects || !demos || !manifest) {
    throw std::runtime_error("missing dataset files under " + dir);
  }
  Json specs = Json::parse(objects);
  for (const Json& s : specs.at("categories")) {
    set.categories.push_back(SpecFromJson(s));
  }
  std::string line;
  while (std::getline(demos, line)) {
    if (!line.empty()) set.demos.push_back(DemoFromJson(Json::parse(line)));
  }
  Json m = Json::parse(manifest);
  set.splits.assign(set.demos.size(), Split::kTrained);
  std::vector<int> seen(set.demos.size(), 0);
  for (Split s : {Split::kTrained, Split::kUnseenTraj, Split::kUnseenObj}) {
    for (int i : m.at(SplitName(s)).get<std::vector<int>>()) {
      if (i < 0 || i >= set.size() || seen[i]++) {
        throw std::invalid_argument("split manifest index error: " +
                                    std::to_string(i));
      }
      set.splits[i] = s;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw std::invalid_argument("split manifest misses demos");
  }
  return set;
}

}  // namespace hierdex
