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

#ifndef HIERDEX_ENV_H_
#define HIERDEX_ENV_H_

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hierdex/geom.h"
#include "hierdex/json_io.h"
#include "hierdex/rng.h"
#include "hierdex/traj.h"

namespace hierdex {

inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
inline constexpr int kDefaultFingers = 4;

// Object description. Frames: the base part origin sits at the bottom center
// of the (width, length, height) box, z up. Articulated objects carry one
// child part hinged about the base x axis at (0, -length/2, height).
//
// grasp_sites[0] is the left-hand site on the base part. grasp_sites[1] is
// the right-hand site: on the base for rigid objects, on the child for
// articulated ones. Site frames point their +z axis into the surface.
struct ObjectSpec {
  int category_id = 0;
  Vec3 dims = Vec3(0.2, 0.15, 0.1);
  bool articulated = false;
  std::array<double, 2> joint_limits = {0.0, 0.0};
  std::array<Pose, 2> grasp_sites;
  double mass_scale = 1.0;
  double friction_scale = 1.0;

  double LongestDim() const { return dims.maxCoeff(); }
  int PartOfSite(int site) const { return articulated ? site : 0; }
  void Validate() const;
};

// Box with side grasp sites (rigid) or a base side site plus a lid front-edge
// site (articulated).
ObjectSpec MakeObjectSpec(int category_id, const Vec3& dims, bool articulated,
                          std::array<double, 2> joint_limits = {0.0, 0.0});

// Multiplies dims componentwise and rescales grasp-site translations.
ObjectSpec ScaleObject(const ObjectSpec& spec, double sx, double sy, double sz);

// Child part pose relative to the base for a given joint angle.
Pose HingeTransform(const ObjectSpec& spec, double joint_angle);
// World pose of part 0 (base) or 1 (child).
Pose PartPose(const ObjectSpec& spec, const ObjectState& s, int part);
Pose GraspSiteWorld(const ObjectSpec& spec, const ObjectState& s, int site);

Json SpecToJson(const ObjectSpec& spec);
ObjectSpec SpecFromJson(const Json& j);

struct WristAction {
  Pose left;
  Pose right;

  const Pose& hand(int h) const { return h == kLeft ? left : right; }
  Pose& hand(int h) { return h == kLeft ? left : right; }
};

using FingerCommands = std::array<std::vector<double>, 2>;

struct HandState {
  Pose wrist;
  std::vector<double> fingers;
  std::vector<Vec3> fingertips;

  double Closure() const;
};

// Fingertips on an arc in the wrist frame that curls toward the palm as the
// finger value rises from 0 (open) to 1 (closed).
std::vector<Vec3> FingertipPoints(const Pose& wrist,
                                  std::span<const double> fingers);

struct Attachment {
  int part = 0;
  Pose grasp;  // wrist^-1 * part pose at attach time
};

struct InitPerturbation {
  double dx = 0.0;
  double dy = 0.0;
  double yaw = 0.0;
};

struct WorldState {
  ObjectState object;   // as observed and scored (nominal plus noise)
  ObjectState nominal;  // noise-free state driving the dynamics
  ObjectState previous_object;
  std::array<HandState, 2> hands;
  std::array<std::vector<double>, 2> previous_fingers;
  std::array<std::optional<Attachment>, 2> attach;
  int step = 0;
  int horizon = 0;  // steps allowed before the episode terminates
  bool terminated = false;
  double obs_noise_scale = 0.0;
  int randomizations = 0;
  InitPerturbation init;
  Rng rng;

  const HandState& left() const { return hands[kLeft]; }
  const HandState& right() const { return hands[kRight]; }
};

struct EnvConfig {
  int fingers = kDefaultFingers;
  double wrist_rate_translation = 0.02;
  double wrist_rate_rotation = 0.1;
  double finger_rate = 0.2;
  double grasp_radius = 0.04;
  double attach_closure = 0.7;
  double detach_closure = 0.4;
  double fall_rate = 0.05;
  bool process_noise = false;
  double noise_translation = 0.001;
  double noise_rotation = 0.005;
  bool randomize_domain = false;
  int randomize_period = 1000;
  Pose home_left = Pose{Vec3(-0.30, 0.0, 0.15),
                        Rot::FromAxisAngle(Vec3::UnitY(), M_PI / 2)};
  Pose home_right = Pose{Vec3(0.30, 0.0, 0.15),
                         Rot::FromAxisAngle(Vec3::UnitY(), -M_PI / 2)};
  double init_max_offset = 0.02;
  double init_max_yaw = M_PI / 6.0;

  const Pose& home(int h) const { return h == kLeft ? home_left : home_right; }
};

Json EnvConfigToJson(const EnvConfig& c);
EnvConfig EnvConfigFromJson(const Json& j);

struct StepInfo {
  std::array<bool, 2> attached = {false, false};
  std::array<bool, 2> attach_event = {false, false};
  std::array<bool, 2> detach_event = {false, false};
  bool randomized = false;
};

// Resamples mass_scale and friction_scale in [0.8, 1.2] and the observation
// noise scale in [0, 1.5]. Poses are untouched.
void RandomizeDomain(WorldState& state, ObjectSpec& spec, Rng& rng);

// Grasp radius after the friction mapping (+-10% over the friction range).
double EffectiveGraspRadius(const EnvConfig& c, const ObjectSpec& spec);

// Kinematic bimanual simulator with threshold-gated rigid attachment.
class Env {
 public:
  Env(ObjectSpec spec, EnvConfig config);

  // Object at g[0] (optionally perturbed), hands at home with open fingers.
  const WorldState& Reset(const GoalTrajectory& g, Rng& rng, bool perturb_init);
  // Object at an explicit initial state; horizon = steps allowed.
  const WorldState& ResetTo(const ObjectState& object, int horizon,
                            uint64_t noise_seed);

  StepInfo Step(const WristAction& wrists, const FingerCommands& fingers);
  void Terminate() { state_.terminated = true; }

  const WorldState& state() const { return state_; }
  const ObjectSpec& spec() const { return spec_; }
  const EnvConfig& config() const { return config_; }

 private:
  void UpdateAttachments(StepInfo& info);
  void MoveObject();
  void ApplyNoise();

  ObjectSpec spec_;
  EnvConfig config_;
  WorldState state_;
};

// Applies the yaw of an initial-pose perturbation to a goal trajectory,
// rotating every state about the vertical through g[0].
GoalTrajectory ApplyYawToGoal(const GoalTrajectory& g, double yaw);

// Draws x, y offsets in [-max_offset, max_offset] and yaw in [0, max_yaw].
InitPerturbation SampleInitPerturbation(Rng& rng, double max_offset,
                                        double max_yaw);
ObjectState PerturbState(const ObjectState& s, const InitPerturbation& p);

enum class ObsMode { kTeacher, kStudent };

struct ObsLayout {
  int object = 0;       // 7
  int joint = 0;        // 1
  int wrists = 0;       // 14
  int wrists_in_object = 0;  // 14, wrist poses in the object frame
  int fingers = 0;      // 2F
  int prev_action = 0;  // A
  int goal_window = 0;  // T * 8
  int wrist_window = 0; // T * 14
  int velocity = 0;     // 6 + 2F, teacher only
  int size = 0;
  int velocity_size = 0;
};

ObsLayout MakeObsLayout(int fingers, int action_dim, int window, ObsMode mode);

// Fixed-length observation vector; see ObsLayout for the block order.
// `noise` adds observation noise scaled by state.obs_noise_scale.
std::vector<double> Observe(const WorldState& state, const GoalWindow& window,
                            std::span<const WristAction> wrist_window,
                            std::span<const double> prev_action, ObsMode mode,
                            Rng* noise = nullptr);

// One JSON-lines record of the episode log.
Json EpisodeLogRecord(const WorldState& state);

}  // namespace hierdex

#endif  // HIERDEX_ENV_H_
