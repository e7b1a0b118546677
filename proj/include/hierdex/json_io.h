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

#ifndef HIERDEX_JSON_IO_H_
#define HIERDEX_JSON_IO_H_

#include <string>

#include <json.hpp>

#include "hierdex/geom.h"

namespace hierdex {

using Json = nlohmann::json;

Json PoseToJson(const Pose& p);
Pose PoseFromJson(const Json& j);
Json Vec3ToJson(const Vec3& v);
Vec3 Vec3FromJson(const Json& j);

// {"pose": [7 numbers], "joint": number | null}
Json StateToJson(const ObjectState& s);
ObjectState StateFromJson(const Json& j);

// Overlays j onto defaults, recursing into objects. Throws
// std::invalid_argument on keys the defaults do not have.
Json OverlayKeys(Json defaults, const Json& j, const std::string& what);

// Stable digest (FNV-1a 64, hex) of the canonical dump of a document.
std::string ConfigHash(const Json& j);

}  // namespace hierdex

#endif  // HIERDEX_JSON_IO_H_
