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

#ifndef HIERDEX_GEOM_H_
#define HIERDEX_GEOM_H_

#include <array>
#include <optional>
#include <span>

#include <Eigen/Core>

namespace hierdex {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Unit quaternion kept in canonical hemisphere form: w > 0, or w == 0 with the
// first nonzero of (x, y, z) positive.
class Rot {
 public:
  Rot() = default;
  // Normalizes and canonicalizes. Throws std::invalid_argument on non-finite
  // or zero-norm input.
  Rot(double w, double x, double y, double z);

  static Rot Identity() { return Rot(); }
  static Rot FromAxisAngle(const Vec3& axis, double angle);
  // Exponential map of a rotation vector (axis * angle).
  static Rot FromRotationVector(const Vec3& v);
  static Rot FromMatrix(const Mat3& m);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  std::array<double, 4> Wxyz() const { return {w_, x_, y_, z_}; }

  // Logarithm map; result norm lies in [0, pi].
  Vec3 RotationVector() const;
  Mat3 Matrix() const;
  Vec3 Rotate(const Vec3& v) const;
  Rot Inverse() const { return Rot(w_, -x_, -y_, -z_); }
  double Dot(const Rot& o) const {
    return w_ * o.w_ + x_ * o.x_ + y_ * o.y_ + z_ * o.z_;
  }

  Rot operator*(const Rot& o) const;

  // Bitwise comparison of the canonical components.
  bool operator==(const Rot& o) const = default;

 private:
  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

struct Pose {
  Vec3 translation = Vec3::Zero();
  Rot rotation;

  static Pose Identity() { return Pose(); }
};

// One goal or actual state of the manipulated object.
struct ObjectState {
  Rot rotation;
  Vec3 translation = Vec3::Zero();
  std::optional<double> joint_angle;

  Pose pose() const { return Pose{translation, rotation}; }
  static ObjectState FromPose(const Pose& p,
                              std::optional<double> joint = std::nullopt) {
    return ObjectState{p.rotation, p.translation, joint};
  }
};

// 2 * acos(|<a, b>|), in [0, pi].
double QuatAngle(const Rot& a, const Rot& b);

// Frobenius norm of the difference of the two rotation matrices.
double RotFrobeniusError(const Rot& a, const Rot& b);

// Euclidean distance in centimeters.
double TranslationErrorCm(const Vec3& a, const Vec3& b);

// Shortest-arc geodesic interpolation. Falls back to normalized lerp when the
// two rotations are closer than 1e-6 rad.
Rot Slerp(const Rot& a, const Rot& b, double u);

Pose Compose(const Pose& a, const Pose& b);
Pose Inverse(const Pose& a);
Vec3 TransformPoint(const Pose& a, const Vec3& p);

// Linear interpolation of translation and joint angle, slerp of rotation.
ObjectState InterpolateStates(const ObjectState& a, const ObjectState& b,
                              double u);

// Fixed on-disk order: tx, ty, tz, qw, qx, qy, qz.
std::array<double, 7> PoseToArray(const Pose& p);
Pose PoseFromArray(std::span<const double> v);

bool IsFinite(const Vec3& v);

}  // namespace hierdex

#endif  // HIERDEX_GEOM_H_
