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

#include "hierdex/metrics.h"

#include <cmath>
#include <stdexcept>

namespace hierdex {

std::string RotationRuleName(RotationRule r) {
  return r == RotationRule::kDimScaled ? "dimscaled" : "plain";
}

RotationRule RotationRuleFromName(const std::string& name) {
  if (name == "dimscaled") return RotationRule::kDimScaled;
  if (name == "plain") return RotationRule::kPlain;
  throw std::invalid_argument("unknown rotation rule: " + name);
}

Json ThresholdsToJson(const CompletionThresholds& th) {
  return {{"translation", th.translation},
          {"rotation_rule", RotationRuleName(th.rotation_rule)},
          {"dimscaled", th.dimscaled},
          {"plain", th.plain},
          {"joint", th.joint}};
}

CompletionThresholds ThresholdsFromJson(const Json& j) {
  CompletionThresholds th;
  for (const auto& [key, value] : j.items()) {
    if (key == "translation") th.translation = value.get<double>();
    else if (key == "rotation_rule")
      th.rotation_rule = RotationRuleFromName(value.get<std::string>());
    else if (key == "dimscaled") th.dimscaled = value.get<double>();
    else if (key == "plain") th.plain = value.get<double>();
    else if (key == "joint") th.joint = value.get<double>();
    else throw std::invalid_argument("unknown thresholds key: " + key);
  }
  if (!(th.translation > 0 && th.dimscaled > 0 && th.plain > 0 &&
        th.joint > 0)) {
    throw std::invalid_argument("thresholds must be positive");
  }
  return th;
}

bool WithinThresholds(const ObjectState& actual, const ObjectState& goal,
                      const CompletionThresholds& th, double longest_dim) {
  if ((actual.translation - goal.translation).norm() > th.translation) {
    return false;
  }
  double angle = QuatAngle(actual.rotation, goal.rotation);
  if (th.rotation_rule == RotationRule::kDimScaled) {
    if (longest_dim * angle > th.dimscaled) return false;
  } else if (angle > th.plain) {
    return false;
  }
  if (goal.joint_angle) {
    double j = actual.joint_angle.value_or(0.0);
    if (std::abs(j - *goal.joint_angle) > th.joint) return false;
  }
  return true;
}

int FirstViolation(std::span<const ObjectState> actual, const GoalTrajectory& g,
                   const CompletionThresholds& th, double longest_dim) {
  if (static_cast<int>(actual.size()) > g.size()) {
    throw std::invalid_argument("rollout longer than goal trajectory");
  }
  for (size_t i = 0; i < actual.size(); ++i) {
    if (!WithinThresholds(actual[i], g.states[i], th, longest_dim)) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(actual.size());
}

double CompletionRate(std::span<const ObjectState> actual,
                      const GoalTrajectory& g, const CompletionThresholds& th,
                      double longest_dim) {
  if (g.size() == 0) return 0.0;
  return static_cast<double>(FirstViolation(actual, g, th, longest_dim)) /
         g.size();
}

}  // namespace hierdex
