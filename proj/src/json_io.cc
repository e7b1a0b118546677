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

#include "hierdex/json_io.h"

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace hierdex {

Json PoseToJson(const Pose& p) { return Json(PoseToArray(p)); }

Pose PoseFromJson(const Json& j) {
  return PoseFromArray(j.get<std::vector<double>>());
}

Json Vec3ToJson(const Vec3& v) { return Json{v.x(), v.y(), v.z()}; }

Vec3 Vec3FromJson(const Json& j) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw std::invalid_argument("expected 3-vector");
  return Vec3(v[0], v[1], v[2]);
}

Json StateToJson(const ObjectState& s) {
  Json j;
  j["pose"] = PoseToJson(s.pose());
  j["joint"] = s.joint_angle ? Json(*s.joint_angle) : Json(nullptr);
  return j;
}

ObjectState StateFromJson(const Json& j) {
  ObjectState s = ObjectState::FromPose(PoseFromJson(j.at("pose")));
  if (j.contains("joint") && !j.at("joint").is_null()) {
    s.joint_angle = j.at("joint").get<double>();
  }
  return s;
}

Json OverlayKeys(Json defaults, const Json& j, const std::string& what) {
  if (!j.is_object()) throw std::invalid_argument(what + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw std::invalid_argument("unknown " + what + " key: " + key);
    }
    if (defaults[key].is_object()) {
      defaults[key] = OverlayKeys(defaults[key], value, what + "." + key);
    } else {
      defaults[key] = value;
    }
  }
  return defaults;
}

std::string ConfigHash(const Json& j) {
  // nlohmann::json objects are key-sorted, so dump() is canonical
  std::string text = j.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hierdex
