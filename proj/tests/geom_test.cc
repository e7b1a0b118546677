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

#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "hierdex/rng.h"

namespace hierdex {
namespace {

Rot RandomRot(Rng& rng) {
  return Rot(rng.Normal(), rng.Normal(), rng.Normal(), rng.Normal());
}

Rot Negated(const Rot& q) {
  // constructing from the negated components canonicalizes back to q
  return Rot(-q.w(), -q.x(), -q.y(), -q.z());
}

// Angle of the relative rotation recovered from the matrix trace.
double TraceAngle(const Rot& a, const Rot& b) {
  Mat3 rel = a.Matrix().transpose() * b.Matrix();
  double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

TEST(RotTest, CanonicalHemisphere) {
  Rot q(-0.5, 0.5, -0.5, 0.5);
  EXPECT_GE(q.w(), 0.0);
  EXPECT_NEAR(q.w() * q.w() + q.x() * q.x() + q.y() * q.y() + q.z() * q.z(),
              1.0, 1e-12);
  Rot tie(0.0, 0.0, -1.0, 0.0);
  EXPECT_EQ(tie.y(), 1.0);
  EXPECT_THROW(Rot(NAN, 0, 0, 0), std::invalid_argument);
  EXPECT_THROW(Rot(0, 0, 0, 0), std::invalid_argument);
}

TEST(QuatAngleTest, Examples) {
  Rng rng(1);
  Rot q = RandomRot(rng);
  EXPECT_EQ(QuatAngle(q, q), 0.0);
  EXPECT_EQ(QuatAngle(q, Negated(q)), 0.0);
  Rot z90 = Rot::FromAxisAngle(Vec3::UnitZ(), M_PI / 2);
  EXPECT_NEAR(QuatAngle(Rot::Identity(), z90), M_PI / 2, 1e-9);
}

TEST(QuatAngleTest, AgreesWithMatrixTrace) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    Rot a = RandomRot(rng);
    Rot b = RandomRot(rng);
    double angle = QuatAngle(a, b);
    EXPECT_NEAR(angle, TraceAngle(a, b), 1e-7);
    EXPECT_GE(angle, 0.0);
    EXPECT_LE(angle, M_PI);
    EXPECT_EQ(angle, QuatAngle(b, a));
  }
}

TEST(FrobeniusTest, Examples) {
  Rng rng(3);
  Rot q = RandomRot(rng);
  EXPECT_NEAR(RotFrobeniusError(q, q), 0.0, 1e-12);
  EXPECT_NEAR(RotFrobeniusError(Rot::Identity(),
                                Rot::FromAxisAngle(Vec3::UnitZ(), M_PI)),
              2.0 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(RotFrobeniusError(Rot::Identity(),
                                Rot::FromAxisAngle(Vec3::UnitZ(), M_PI / 2)),
              2.0, 1e-12);
}

TEST(FrobeniusTest, MatchesAngleIdentity) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    Rot a = RandomRot(rng);
    Rot b = RandomRot(rng);
    double expected = 2.0 * std::sqrt(2.0) * std::sin(QuatAngle(a, b) / 2.0);
    EXPECT_NEAR(RotFrobeniusError(a, b), expected, 1e-7);
    EXPECT_NEAR(RotFrobeniusError(a, b), RotFrobeniusError(b, a), 1e-12);
  }
}

TEST(TranslationErrorTest, Examples) {
  EXPECT_EQ(TranslationErrorCm(Vec3::Zero(), Vec3::Zero()), 0.0);
  EXPECT_NEAR(TranslationErrorCm(Vec3::Zero(), Vec3(0.03, 0.04, 0.0)), 5.0,
              1e-12);
  EXPECT_NEAR(TranslationErrorCm(Vec3(1, 1, 1), Vec3(1, 1, 1.10)), 10.0, 1e-9);
}

TEST(TranslationErrorTest, MetricProperties) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    Vec3 a(rng.Normal(), rng.Normal(), rng.Normal());
    Vec3 b(rng.Normal(), rng.Normal(), rng.Normal());
    Vec3 c(rng.Normal(), rng.Normal(), rng.Normal());
    EXPECT_EQ(TranslationErrorCm(a, b), TranslationErrorCm(b, a));
    EXPECT_LE(TranslationErrorCm(a, c),
              TranslationErrorCm(a, b) + TranslationErrorCm(b, c) + 1e-12);
  }
}

TEST(SlerpTest, Examples) {
  Rng rng(6);
  Rot q = RandomRot(rng);
  EXPECT_NEAR(QuatAngle(Slerp(q, q, 0.5), q), 0.0, 1e-9);
  Rot z180 = Rot::FromAxisAngle(Vec3::UnitZ(), M_PI);
  Rot mid = Slerp(Rot::Identity(), z180, 0.5);
  EXPECT_NEAR(QuatAngle(mid, Rot::FromAxisAngle(Vec3::UnitZ(), M_PI / 2)), 0.0,
              1e-9);
  Rot b = RandomRot(rng);
  EXPECT_NEAR(QuatAngle(Slerp(q, b, 0.0), q), 0.0, 1e-7);
  EXPECT_NEAR(QuatAngle(Slerp(q, b, 1.0), b), 0.0, 1e-7);
}

TEST(SlerpTest, GeodesicAndUnitNorm) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Rot a = RandomRot(rng);
    Rot b = RandomRot(rng);
    double u = rng.Uniform(0.0, 1.0);
    Rot s = Slerp(a, b, u);
    double n = std::sqrt(s.w() * s.w() + s.x() * s.x() + s.y() * s.y() +
                         s.z() * s.z());
    EXPECT_NEAR(n, 1.0, 1e-9);
    EXPECT_NEAR(QuatAngle(a, s), u * QuatAngle(a, b), 1e-7);
  }
}

TEST(SlerpTest, NearlyIdenticalFallsBackToLerp) {
  Rot a = Rot::FromAxisAngle(Vec3::UnitX(), 0.3);
  Rot b = Rot::FromAxisAngle(Vec3::UnitX(), 0.3 + 1e-8);
  Rot s = Slerp(a, b, 0.5);
  EXPECT_NEAR(QuatAngle(a, s), 0.5e-8, 1e-7);
}

TEST(PoseTest, GroupOperations) {
  Rng rng(8);
  Pose x{Vec3(0.3, -0.2, 1.0), RandomRot(rng)};
  Pose id = Pose::Identity();
  Pose c = Compose(id, x);
  EXPECT_TRUE(c.translation.isApprox(x.translation));
  EXPECT_NEAR(QuatAngle(c.rotation, x.rotation), 0.0, 1e-9);
  Pose e = Compose(x, Inverse(x));
  EXPECT_LT(e.translation.norm(), 1e-9);
  EXPECT_NEAR(QuatAngle(e.rotation, Rot::Identity()), 0.0, 1e-7);
  Pose shift{Vec3(1, 0, 0), Rot::Identity()};
  EXPECT_TRUE(TransformPoint(shift, Vec3::Zero()).isApprox(Vec3(1, 0, 0)));
}

TEST(PoseTest, ArrayOrder) {
  Pose p{Vec3(1, 2, 3), Rot::FromAxisAngle(Vec3::UnitZ(), 0.5)};
  auto a = PoseToArray(p);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(a[2], 3.0);
  EXPECT_EQ(a[3], p.rotation.w());
  EXPECT_EQ(a[6], p.rotation.z());
  Pose back = PoseFromArray(a);
  EXPECT_EQ(back.rotation, p.rotation);
  EXPECT_EQ(back.translation, p.translation);
}

TEST(RotTest, RotationVectorRoundTrip) {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    Rot q = RandomRot(rng);
    Rot back = Rot::FromRotationVector(q.RotationVector());
    EXPECT_NEAR(QuatAngle(q, back), 0.0, 1e-7);
  }
}

}  // namespace
}  // namespace hierdex
