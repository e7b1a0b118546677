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

#include "hierdex/traj.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hierdex/json_io.h"

namespace hierdex {

void GoalTrajectory::Validate(double max_step) const {
  if (states.size() < 2) {
    throw std::invalid_argument("goal trajectory needs at least 2 states");
  }
  for (size_t i = 1; i < states.size(); ++i) {
    double d = (states[i].translation - states[i - 1].translation).norm();
    if (!(d < max_step)) {
      throw std::invalid_argument("goal trajectory discontinuous at step " +
                                  std::to_string(i));
    }
  }
}

GoalTrajectory InterpolateKeyposes(std::span<const Keypose> keyposes,
                                   int total_steps) {
  if (keyposes.size() < 2) {
    throw std::invalid_argument("InterpolateKeyposes: need >= 2 keyposes");
  }
  if (keyposes.front().step != 0) {
    throw std::invalid_argument("InterpolateKeyposes: first index must be 0");
  }
  if (keyposes.back().step != total_steps - 1) {
    throw std::invalid_argument(
        "InterpolateKeyposes: last index must be total_steps - 1");
  }
  for (size_t i = 1; i < keyposes.size(); ++i) {
    if (keyposes[i].step <= keyposes[i - 1].step) {
      throw std::invalid_argument(
          "InterpolateKeyposes: indices must be strictly increasing");
    }
  }
  GoalTrajectory g;
  g.states.reserve(total_steps);
  for (size_t k = 0; k + 1 < keyposes.size(); ++k) {
    const Keypose& a = keyposes[k];
    const Keypose& b = keyposes[k + 1];
    g.states.push_back(a.state);
    double span = b.step - a.step;
    for (int i = a.step + 1; i < b.step; ++i) {
      g.states.push_back(InterpolateStates(a.state, b.state, (i - a.step) / span));
    }
  }
  g.states.push_back(keyposes.back().state);
  return g;
}

GoalTrajectory ResampleSkip(const GoalTrajectory& g, int k) {
  if (k < 1) throw std::invalid_argument("ResampleSkip: k must be >= 1");
  if (g.size() <= k + 1) {
    throw std::invalid_argument("ResampleSkip: trajectory too short");
  }
  GoalTrajectory out;
  out.category_id = g.category_id;
  out.dt_units = g.dt_units * (k + 1);
  for (int i = 0; i < g.size(); i += k + 1) out.states.push_back(g.states[i]);
  return out;
}

GoalTrajectory ResampleInterp(const GoalTrajectory& g, int k) {
  if (k < 1) throw std::invalid_argument("ResampleInterp: k must be >= 1");
  GoalTrajectory out;
  out.category_id = g.category_id;
  out.dt_units = g.dt_units;
  out.states.reserve(g.size() + (g.size() - 1) * k);
  for (int i = 0; i < g.size(); ++i) {
    out.states.push_back(g.states[i]);
    if (i + 1 == g.size()) break;
    for (int j = 1; j <= k; ++j) {
      out.states.push_back(
          InterpolateStates(g.states[i], g.states[i + 1], double(j) / (k + 1)));
    }
  }
  return out;
}

GoalTrajectory ResampleRandomGaps(const GoalTrajectory& g, Rng& rng,
                                  int max_gap) {
  GoalTrajectory out;
  out.category_id = g.category_id;
  out.dt_units = g.dt_units;
  int last = g.size() - 1;
  int i = 0;
  out.states.push_back(g.states[0]);
  while (i < last) {
    i = std::min(last, i + 1 + rng.UniformInt(0, max_gap));
    out.states.push_back(g.states[i]);
  }
  return out;
}

GoalWindow GoalWindowFromGaps(const GoalTrajectory& g, int t,
                              std::span<const int> gaps) {
  if (t < 0 || t >= g.size()) {
    throw std::out_of_range("goal window start outside trajectory");
  }
  GoalWindow w;
  int last = g.size() - 1;
  int idx = t;
  for (int gap : gaps) {
    idx = std::min(last, idx + gap);
    w.gaps.push_back(gap);
    w.indices.push_back(idx);
    w.states.push_back(g.states[idx]);
  }
  return w;
}

GoalWindow SampleGoalWindow(const GoalTrajectory& g, int t, Rng* rng,
                            bool random_gaps, int window, int max_gap) {
  std::vector<int> gaps(window, 1);
  if (random_gaps) {
    if (rng == nullptr) throw std::invalid_argument("random gaps need an rng");
    for (int& gap : gaps) gap = 1 + rng->UniformInt(0, max_gap);
  }
  return GoalWindowFromGaps(g, t, gaps);
}

GoalTrajectory PerturbGoalTrajectoryWith(const GoalTrajectory& g,
                                         const Vec3& offset, int begin,
                                         int end) {
  GoalTrajectory out = g;
  begin = std::max(begin, 0);
  end = std::min(end, g.size() - 1);
  int width = end - begin;
  if (width <= 0) return out;
  double ramp = std::max(1.0, width / 4.0);
  for (int i = begin; i <= end; ++i) {
    double w = std::min({1.0, (i - begin) / ramp, (end - i) / ramp});
    out.states[i].translation += w * offset;
  }
  return out;
}

GoalPerturbation SampleGoalPerturbation(const GoalTrajectory& g, Rng& rng,
                                        double max_offset, int min_span) {
  GoalPerturbation p;
  for (int a = 0; a < 3; ++a) p.offset[a] = rng.Uniform(-max_offset, max_offset);
  int last = g.size() - 1;
  if (last <= min_span) {
    p.begin = 0;
    p.end = last;
    return p;
  }
  p.begin = rng.UniformInt(0, last - min_span);
  p.end = rng.UniformInt(p.begin + min_span, last);
  return p;
}

GoalTrajectory PerturbGoalTrajectory(const GoalTrajectory& g, Rng& rng,
                                     double max_offset, int min_span) {
  GoalPerturbation p = SampleGoalPerturbation(g, rng, max_offset, min_span);
  return PerturbGoalTrajectoryWith(g, p.offset, p.begin, p.end);
}

std::vector<double> RelativeGoalWindow(const GoalWindow& w,
                                       const ObjectState& current) {
  std::vector<double> out;
  out.reserve(w.states.size() * kRelativeFeaturesPerState);
  Rot inv = current.rotation.Inverse();
  double joint = current.joint_angle.value_or(0.0);
  for (const ObjectState& s : w.states) {
    Vec3 dt = inv.Rotate(s.translation - current.translation);
    Rot dr = inv * s.rotation;
    out.insert(out.end(), {dt.x(), dt.y(), dt.z(), dr.w(), dr.x(), dr.y(),
                           dr.z(), s.joint_angle.value_or(0.0) - joint});
  }
  return out;
}

void WriteTrajectoryJsonl(const GoalTrajectory& g, std::ostream& os) {
  Json header{{"category_id", g.category_id},
              {"dt_units", g.dt_units},
              {"length", g.size()}};
  os << header.dump() << '\n';
  for (int i = 0; i < g.size(); ++i) {
    Json line = StateToJson(g.states[i]);
    line["t"] = i;
    os << line.dump() << '\n';
  }
}

GoalTrajectory ReadTrajectoryJsonl(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error("trajectory file: missing header");
  }
  Json header = Json::parse(line);
  GoalTrajectory g;
  g.category_id = header.at("category_id").get<int>();
  g.dt_units = header.value("dt_units", 1);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    if (j.at("t").get<int>() != g.size()) {
      throw std::runtime_error("trajectory file: non-sequential t");
    }
    g.states.push_back(StateFromJson(j));
  }
  if (header.contains("length") && header["length"].get<int>() != g.size()) {
    throw std::runtime_error("trajectory file: length mismatch");
  }
  return g;
}

void SaveTrajectory(const GoalTrajectory& g, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  WriteTrajectoryJsonl(g, os);
}

GoalTrajectory LoadTrajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return ReadTrajectoryJsonl(is);
}

}  // namespace hierdex
