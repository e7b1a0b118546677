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

#ifndef HIERDEX_METRICS_H_
#define HIERDEX_METRICS_H_

#include <span>
#include <string>

#include "hierdex/geom.h"
#include "hierdex/json_io.h"
#include "hierdex/traj.h"

namespace hierdex {

enum class RotationRule { kDimScaled, kPlain };

std::string RotationRuleName(RotationRule r);
RotationRule RotationRuleFromName(const std::string& name);

struct CompletionThresholds {
  double translation = 0.05;   // meters
  RotationRule rotation_rule = RotationRule::kDimScaled;
  double dimscaled = 0.025;    // longest_dim * angle, meters
  double plain = 0.5;          // radians
  double joint = 0.5;          // radians
};

Json ThresholdsToJson(const CompletionThresholds& th);
CompletionThresholds ThresholdsFromJson(const Json& j);

// True when `actual` tracks `goal` within every threshold.
bool WithinThresholds(const ObjectState& actual, const ObjectState& goal,
                      const CompletionThresholds& th, double longest_dim);

// Index of the first violating state, or actual.size() when none violates.
int FirstViolation(std::span<const ObjectState> actual, const GoalTrajectory& g,
                   const CompletionThresholds& th, double longest_dim);

// Fraction of g tracked before the first threshold breach.
double CompletionRate(std::span<const ObjectState> actual,
                      const GoalTrajectory& g, const CompletionThresholds& th,
                      double longest_dim);

}  // namespace hierdex

#endif  // HIERDEX_METRICS_H_
