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

#ifndef HIERDEX_TRAJ_H_
#define HIERDEX_TRAJ_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hierdex/geom.h"
#include "hierdex/rng.h"

namespace hierdex {

inline constexpr int kDefaultWindow = 10;
inline constexpr int kRelativeFeaturesPerState = 8;

// Time-indexed sequence of object states defining a task.
struct GoalTrajectory {
  std::vector<ObjectState> states;
  int category_id = 0;
  int dt_units = 1;

  int size() const { return static_cast<int>(states.size()); }
  const ObjectState& operator[](int i) const { return states[i]; }

  // Throws std::invalid_argument when shorter than 2 states or when two
  // consecutive translations differ by max_step or more.
  void Validate(double max_step = 0.05) const;
};

// T future goal states; gaps[j] is the index advance that produced entry j and
// indices[j] the (clamped) trajectory index it came from.
struct GoalWindow {
  std::vector<ObjectState> states;
  std::vector<int> gaps;
  std::vector<int> indices;
};

struct Keypose {
  ObjectState state;
  int step = 0;
};

// Piecewise interpolation between keyposes. Keyposes are copied verbatim at
// their indices.
GoalTrajectory InterpolateKeyposes(std::span<const Keypose> keyposes,
                                   int total_steps);

// Keeps indices 0, k+1, 2(k+1), ...
GoalTrajectory ResampleSkip(const GoalTrajectory& g, int k);

// Inserts k interpolated states between every consecutive pair.
GoalTrajectory ResampleInterp(const GoalTrajectory& g, int k);

// Re-times a trajectory with random index advances of 1 + U{0..max_gap} per
// step, clamping at the last state (which is always kept).
GoalTrajectory ResampleRandomGaps(const GoalTrajectory& g, Rng& rng,
                                  int max_gap = 3);

// Window of `window` states following step t. Without random gaps the indices
// are t+1 ... t+window; with them each successive index advances by
// 1 + U{0..max_gap}. Indices past the end clamp to the final state.
GoalWindow SampleGoalWindow(const GoalTrajectory& g, int t, Rng* rng,
                            bool random_gaps, int window = kDefaultWindow,
                            int max_gap = 3);

// Same clamping rule with caller-supplied advances.
GoalWindow GoalWindowFromGaps(const GoalTrajectory& g, int t,
                              std::span<const int> gaps);

// Adds `offset` to the translations in [begin, end], weighted by a trapezoid
// that is zero at both span edges. Rotations and joint angles are copied.
GoalTrajectory PerturbGoalTrajectoryWith(const GoalTrajectory& g,
                                         const Vec3& offset, int begin,
                                         int end);

struct GoalPerturbation {
  Vec3 offset = Vec3::Zero();
  int begin = 0;
  int end = 0;
};

// Draws the offset components uniformly in [-max_offset, max_offset] and a
// span at least min_span wide (or the whole trajectory when shorter).
GoalPerturbation SampleGoalPerturbation(const GoalTrajectory& g, Rng& rng,
                                        double max_offset = 0.02,
                                        int min_span = 20);
GoalTrajectory PerturbGoalTrajectory(const GoalTrajectory& g, Rng& rng,
                                     double max_offset = 0.02,
                                     int min_span = 20);

// Per window state: translation delta in the current object frame (3),
// relative rotation current^-1 * state (4, wxyz) and joint delta (1).
std::vector<double> RelativeGoalWindow(const GoalWindow& w,
                                       const ObjectState& current);

// JSON-lines: header {"category_id", "dt_units", "length"} followed by one
// {"t", "pose", "joint"} record per state.
void WriteTrajectoryJsonl(const GoalTrajectory& g, std::ostream& os);
GoalTrajectory ReadTrajectoryJsonl(std::istream& is);
void SaveTrajectory(const GoalTrajectory& g, const std::string& path);
GoalTrajectory LoadTrajectory(const std::string& path);

}  // namespace hierdex

#endif  // HIERDEX_TRAJ_H_
