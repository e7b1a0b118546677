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

#include "hierdex/geom.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Geometry>

namespace hierdex {

Rot::Rot(double w, double x, double y, double z) {
  if (!std::isfinite(w) || !std::isfinite(x) || !std::isfinite(y) ||
      !std::isfinite(z)) {
    throw std::invalid_argument("Rot: non-finite quaternion component");
  }
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (n == 0.0) throw std::invalid_argument("Rot: zero-norm quaternion");
  // Already-unit input is kept as is so stored quaternions parse bit-exact.
  if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
    w /= n;
    x /= n;
    y /= n;
    z /= n;
  }
  bool flip = w < 0.0;
  if (w == 0.0) {
    if (x != 0.0) {
      flip = x < 0.0;
    } else if (y != 0.0) {
      flip = y < 0.0;
    } else {
      flip = z < 0.0;
    }
  }
  if (flip) {
    w = -w;
    x = -x;
    y = -y;
    z = -z;
  }
  // collapse -0.0 so equal rotations serialize identically
  w_ = w + 0.0;
  x_ = x + 0.0;
  y_ = y + 0.0;
  z_ = z + 0.0;
}

Rot Rot::FromAxisAngle(const Vec3& axis, double angle) {
  double n = axis.norm();
  if (!std::isfinite(n) || !std::isfinite(angle)) {
    throw std::invalid_argument("FromAxisAngle: non-finite input");
  }
  if (n == 0.0) return Rot();
  double s = std::sin(0.5 * angle) / n;
  return Rot(std::cos(0.5 * angle), axis.x() * s, axis.y() * s, axis.z() * s);
}

Rot Rot::FromRotationVector(const Vec3& v) {
  double angle = v.norm();
  if (!std::isfinite(angle)) {
    throw std::invalid_argument("FromRotationVector: non-finite input");
  }
  if (angle < 1e-12) {
    // first-order expansion
    return Rot(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z());
  }
  return FromAxisAngle(v / angle, angle);
}

Rot Rot::FromMatrix(const Mat3& m) {
  Eigen::Quaterniond q(m);
  return Rot(q.w(), q.x(), q.y(), q.z());
}

Vec3 Rot::RotationVector() const {
  Vec3 v(x_, y_, z_);
  double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  double angle = 2.0 * std::atan2(s, w_);
  return v * (angle / s);
}

Mat3 Rot::Matrix() const {
  return Eigen::Quaterniond(w_, x_, y_, z_).toRotationMatrix();
}

Vec3 Rot::Rotate(const Vec3& v) const {
  Vec3 u(x_, y_, z_);
  Vec3 t = 2.0 * u.cross(v);
  return v + w_ * t + u.cross(t);
}

Rot Rot::operator*(const Rot& o) const {
  return Rot(w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
             w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
             w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
             w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
}

double QuatAngle(const Rot& a, const Rot& b) {
  // 2 acos(|a.b|), evaluated through atan2 of the relative rotation so that
  // small angles keep full precision.
  Vec3 va(a.x(), a.y(), a.z()), vb(b.x(), b.y(), b.z());
  Vec3 v = a.w() * vb - b.w() * va - va.cross(vb);
  return 2.0 * std::atan2(v.norm(), std::abs(a.Dot(b)));
}

double RotFrobeniusError(const Rot& a, const Rot& b) {
  return (a.Matrix() - b.Matrix()).norm();
}

double TranslationErrorCm(const Vec3& a, const Vec3& b) {
  return 100.0 * (a - b).norm();
}

Rot Slerp(const Rot& a, const Rot& b, double u) {
  if (!std::isfinite(u)) throw std::invalid_argument("Slerp: non-finite u");
  double d = a.Dot(b);
  double sign = d < 0.0 ? -1.0 : 1.0;
  d = std::min(std::abs(d), 1.0);
  double half = std::acos(d);
  double wa, wb;
  if (2.0 * half < 1e-6) {
    wa = 1.0 - u;
    wb = u;
  } else {
    double s = std::sin(half);
    wa = std::sin((1.0 - u) * half) / s;
    wb = std::sin(u * half) / s;
  }
  wb *= sign;
  return Rot(wa * a.w() + wb * b.w(), wa * a.x() + wb * b.x(),
             wa * a.y() + wb * b.y(), wa * a.z() + wb * b.z());
}

Pose Compose(const Pose& a, const Pose& b) {
  return Pose{a.translation + a.rotation.Rotate(b.translation),
              a.rotation * b.rotation};
}

Pose Inverse(const Pose& a) {
  Rot inv = a.rotation.Inverse();
  return Pose{-inv.Rotate(a.translation), inv};
}

Vec3 TransformPoint(const Pose& a, const Vec3& p) {
  return a.translation + a.rotation.Rotate(p);
}

ObjectState InterpolateStates(const ObjectState& a, const ObjectState& b,
                              double u) {
  ObjectState out;
  out.translation = (1.0 - u) * a.translation + u * b.translation;
  out.rotation = Slerp(a.rotation, b.rotation, u);
  if (a.joint_angle && b.joint_angle) {
    out.joint_angle = (1.0 - u) * *a.joint_angle + u * *b.joint_angle;
  } else {
    out.joint_angle = a.joint_angle ? a.joint_angle : b.joint_angle;
  }
  return out;
}

std::array<double, 7> PoseToArray(const Pose& p) {
  const Rot& r = p.rotation;
  return {p.translation.x(), p.translation.y(), p.translation.z(),
          r.w(), r.x(), r.y(), r.z()};
}

Pose PoseFromArray(std::span<const double> v) {
  if (v.size() != 7) throw std::invalid_argument("pose needs 7 numbers");
  Pose p{Vec3(v[0], v[1], v[2]), Rot(v[3], v[4], v[5], v[6])};
  if (!IsFinite(p.translation)) {
    throw std::invalid_argument("pose translation not finite");
  }
  return p;
}

bool IsFinite(const Vec3& v) { return v.allFinite(); }

}  // namespace hierdex
