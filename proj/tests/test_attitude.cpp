#include "attiq/attitude.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace attiq;

namespace {

constexpr int kInstances = 1000;
const double s45 = std::sin(std::numbers::pi / 4.0);

std::mt19937_64& gen() {
  static std::mt19937_64 g(12345);
  return g;
}

double normal() { return std::normal_distribution<double>()(gen()); }
double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen()); }
Vec3 normal3() { return {normal(), normal(), normal()}; }

Quaternion random_unit() { return Quaternion(Vec4(normal(), normal(), normal(), normal()).normalized()); }

// Passive rotation: frame rotated by angle about axis, vectors expressed in the new frame.
Mat3 frame_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix().transpose();
}

Mat3 rx(double a) { return frame_rotation(Vec3::UnitX(), a); }
Mat3 ry(double a) { return frame_rotation(Vec3::UnitY(), a); }
Mat3 rz(double a) { return frame_rotation(Vec3::UnitZ(), a); }

bool same_rotation(const Quaternion& a, const Quaternion& b, double tol) {
  return (a.coeffs() - b.coeffs()).norm() < tol || (a.coeffs() + b.coeffs()).norm() < tol;
}

}  // namespace

TEST(OmegaMatrix, LayoutForKnownRate) {
  Mat4 expected;
  expected << 0, 3, -2, 1,
             -3, 0, 1, 2,
              2, -1, 0, 3,
             -1, -2, -3, 0;
  EXPECT_EQ(omega_matrix(Vec3(1, 2, 3)), expected);
}

TEST(OmegaMatrix, ZeroRate) { EXPECT_EQ(omega_matrix(Vec3::Zero()), Mat4::Zero()); }

TEST(OmegaMatrix, AntisymmetricExactly) {
  const Mat4 om = omega_matrix(Vec3(0.3, -0.7, 1.1));
  EXPECT_EQ(om + om.transpose(), Mat4::Zero());
}

TEST(QuatDerivative, IdentityPicksLastColumn) {
  const Vec4 d = quat_derivative(Quaternion::identity(), Vec3(1, 0, 0));
  EXPECT_EQ(d, Vec4(0.5, 0, 0, 0));
  EXPECT_EQ(quat_derivative(Quaternion::identity(), Vec3::Zero()), Vec4::Zero());
}

TEST(QuatDerivative, MatchesPureQuaternionProduct) {
  // 1/2 (w, 0) (x) q written out component-wise.
  const Quaternion q(0.5, 0.5, 0.5, 0.5);
  const Vec3 w(0.2, -0.4, 0.6);
  const Vec3 qv = q.vec();
  Vec4 oracle;
  oracle << 0.5 * (q.w() * w - w.cross(qv)), -0.5 * w.dot(qv);
  EXPECT_LT((quat_derivative(q, w) - oracle).norm(), 1e-15);
}

TEST(QuatMultiply, IdentityAndInverse) {
  const Quaternion q = random_unit();
  EXPECT_TRUE(same_rotation(Quaternion::identity() * q, q, 1e-15));
  EXPECT_TRUE(same_rotation(q * quat_inverse(q), Quaternion::identity(), 1e-12));
}

TEST(QuatMultiply, TwoRightAnglesMatchDcmProduct) {
  const Quaternion a(s45, 0, 0, s45);
  const Quaternion b(0, s45, 0, s45);
  const Mat3 oracle = frame_rotation(Vec3::UnitX(), std::numbers::pi / 2) * frame_rotation(Vec3::UnitY(), std::numbers::pi / 2);
  EXPECT_LT((dcm_of(a * b) - oracle).norm(), 1e-12);
}

TEST(QuatInverse, Conjugates) {
  EXPECT_EQ(quat_inverse(Quaternion::identity()), Quaternion::identity());
  EXPECT_EQ(quat_inverse(Quaternion(0.5, 0.5, 0.5, 0.5)), Quaternion(-0.5, -0.5, -0.5, 0.5));
}

TEST(Dcm, IdentityQuaternion) { EXPECT_EQ(dcm_of(Quaternion::identity()), Mat3::Identity()); }

TEST(Dcm, NinetyDegreeYawMatchesAxisAngle) {
  const Mat3 c = dcm_of(Quaternion(0, 0, s45, s45));
  EXPECT_LT((c - frame_rotation(Vec3::UnitZ(), std::numbers::pi / 2)).norm(), 1e-12);
  const Vec3 x_body = c * Vec3::UnitX();
  EXPECT_NEAR(x_body.norm(), 1.0, 1e-12);
  EXPECT_NEAR(x_body.z(), 0.0, 1e-12);
}

TEST(Dcm, FromAxisAngleMatchesOracle) {
  for (int i = 0; i < 100; ++i) {
    const Vec3 axis = normal3().normalized();
    const double angle = uniform(-3.0, 3.0);
    EXPECT_LT((dcm_of(Quaternion::from_axis_angle(axis, angle)) - frame_rotation(axis, angle)).norm(), 1e-12);
  }
}

TEST(Dcm, QuatOfDcmInverts) {
  for (int i = 0; i < kInstances; ++i) {
    const Quaternion q = random_unit();
    EXPECT_TRUE(same_rotation(quat_of_dcm(dcm_of(q)), q, 1e-12));
  }
}

TEST(SmallAngle, ZeroAndHalfAngle) {
  EXPECT_EQ(small_angle_quat(Vec3::Zero()), Quaternion::identity());
  EXPECT_EQ(small_angle_quat(Vec3(0.02, 0, 0)), Quaternion(0.01, 0, 0, 1));
}

TEST(SmallAngle, NormalizedAngleMatchesInput) {
  for (int i = 0; i < 100; ++i) {
    const Vec3 dtheta = normal3().normalized() * 0.01;
    const Quaternion q = small_angle_quat(dtheta).normalized();
    EXPECT_NEAR(angular_distance(q, Quaternion::identity()), 0.01, 1e-6);
  }
  EXPECT_TRUE(small_angle_in_regime(Vec3(0.5, 0, 0)));
  EXPECT_FALSE(small_angle_in_regime(Vec3(1.5, 0, 0)));
}

TEST(Renormalize, Branches) {
  EXPECT_EQ(renormalize(Vec3::Zero()), Quaternion::identity());
  const Quaternion a = renormalize(Vec3(0.6, 0, 0));
  EXPECT_NEAR(a.x(), 0.6, 1e-15);
  EXPECT_NEAR(a.w(), 0.8, 1e-15);
  const Quaternion b = renormalize(Vec3(2, 0, 0));
  EXPECT_NEAR(b.x(), 2.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(b.w(), 1.0 / std::sqrt(5.0), 1e-15);
}

TEST(Euler, ComposesAsRollPitchYawProduct) {
  for (int i = 0; i < 200; ++i) {
    const Euler e{uniform(-3, 3), uniform(-1.5, 1.5), uniform(-3, 3)};
    EXPECT_LT((dcm_of(quat_of_euler(e)) - rx(e.roll) * ry(e.pitch) * rz(e.yaw)).norm(), 1e-12);
    const Euler back = euler_of(quat_of_euler(e));
    EXPECT_NEAR(back.roll, e.roll, 1e-9);
    EXPECT_NEAR(back.pitch, e.pitch, 1e-9);
    EXPECT_NEAR(back.yaw, e.yaw, 1e-9);
  }
}

TEST(Euler, PitchSweepPassesNinetyDegrees) {
  for (double deg : {10.0, 80.0, 100.0, 170.0, -120.0}) {
    const Quaternion q = quat_of_euler({0.0, deg2rad(deg), 0.0});
    EXPECT_NEAR(rad2deg(pitch_sweep_angle(q)), deg, 1e-9);
    EXPECT_LE(std::abs(euler_of(q).pitch), std::numbers::pi / 2 + 1e-12);
  }
}

TEST(Euler, BodyRateOfPureRoll) {
  const Vec3 w = body_rate_from_euler_rates({0.3, 0.0, 0.0}, {0.7, 0.0, 0.0});
  EXPECT_LT((w - Vec3(0.7, 0, 0)).norm(), 1e-15);
}

// ---- randomized invariants --------------------------------------------------

TEST(AttitudeProperty, Homomorphism) {
  for (int i = 0; i < kInstances; ++i) {
    const Quaternion a = random_unit(), b = random_unit();
    ASSERT_LT((dcm_of(a * b) - dcm_of(a) * dcm_of(b)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(AttitudeProperty, IsometryAndOrthogonality) {
  for (int i = 0; i < kInstances; ++i) {
    const Dcm c = dcm_of(random_unit());
    const Vec3 v = normal3();
    ASSERT_NEAR((c * v).norm(), v.norm(), 1e-12);
    ASSERT_LT((c.transpose() * c - Mat3::Identity()).norm(), 1e-12);
    ASSERT_NEAR(c.determinant(), 1.0, 1e-12);
  }
}

TEST(AttitudeProperty, InverseCancels) {
  for (int i = 0; i < kInstances; ++i) {
    const Quaternion q = random_unit();
    ASSERT_TRUE(same_rotation(q * quat_inverse(q), Quaternion::identity(), 1e-12));
  }
}

TEST(AttitudeProperty, OmegaAntisymmetry) {
  for (int i = 0; i < kInstances; ++i) {
    const Mat4 om = omega_matrix(normal3() * 10.0);
    ASSERT_EQ(om + om.transpose(), Mat4::Zero());
  }
}

TEST(AttitudeProperty, RenormalizeUnitNorm) {
  for (int i = 0; i < kInstances; ++i) {
    const Vec3 dq = normal3() * std::pow(10.0, uniform(-8.0, 4.0));
    ASSERT_NEAR(renormalize(dq).norm(), 1.0, 1e-12);
  }
}

TEST(AttitudeProperty, ConstantRateAngleMatchesClosedForm) {
  for (int i = 0; i < kInstances; ++i) {
    const double rate = uniform(0.01, 1.0);
    const Vec3 w = normal3().normalized() * rate;
    const double t = uniform(0.0, 0.95 * std::numbers::pi / rate);
    Quaternion q;
    const int steps = 50;
    for (int k = 0; k < steps; ++k) q = integrate_constant_rate(q, w, t / steps);
    ASSERT_NEAR(angular_distance(q, Quaternion::identity()), rate * t, 1e-9);
  }
}

TEST(AttitudeProperty, ExactStepAgreesWithRungeKutta) {
  for (int i = 0; i < 100; ++i) {
    const Quaternion q0 = random_unit();
    const Vec3 w = normal3();
    const double dt = 1e-3;
    Vec4 y = q0.coeffs();
    for (int k = 0; k < 100; ++k) {
      auto f = [&](const Vec4& v) { return quat_derivative(Quaternion(v), w); };
      const Vec4 k1 = f(y), k2 = f(y + 0.5 * dt * k1), k3 = f(y + 0.5 * dt * k2), k4 = f(y + dt * k3);
      y += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    const Quaternion exact = integrate_constant_rate(q0, w, 0.1);
    ASSERT_TRUE(same_rotation(exact, Quaternion(y), 1e-9));
  }
}
