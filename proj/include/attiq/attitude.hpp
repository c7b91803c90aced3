#pragma once

// Quaternion and rotation algebra.
//
// Quaternions are scalar-last, q = (q1, q2, q3, q4) with q4 the scalar part.
// The kinematics follow qdot = 0.5 * Omega(w) * q with Omega laid out as
//
//     [  0    wz  -wy   wx ]
//     [ -wz   0    wx   wy ]
//     [  wy  -wx   0    wz ]
//     [ -wx  -wy  -wz   0  ]
//
// and the product is fixed by dcm_of(a * b) == dcm_of(a) * dcm_of(b), where
// dcm_of(q) maps inertial-frame vectors into the body frame.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <iosfwd>

namespace attiq {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Direction cosine matrix, inertial frame to body frame.
using Dcm = Mat3;

/// Small attitude error angle vector (rad).
using ErrorAngle = Vec3;

class Quaternion {
 public:
  /// Identity rotation.
  Quaternion() : v_(0.0, 0.0, 0.0, 1.0) {}
  Quaternion(double q1, double q2, double q3, double q4) : v_(q1, q2, q3, q4) {}
  explicit Quaternion(const Vec4& v) : v_(v) {}

  static Quaternion identity() { return {}; }

  /// Rotation of `angle` rad about unit `axis`.
  static Quaternion from_axis_angle(const Vec3& axis, double angle);

  double x() const { return v_[0]; }
  double y() const { return v_[1]; }
  double z() const { return v_[2]; }
  double w() const { return v_[3]; }

  Vec3 vec() const { return v_.head<3>(); }
  double scalar() const { return v_[3]; }
  const Vec4& coeffs() const { return v_; }

  double norm() const { return v_.norm(); }

  /// Unit-norm copy with q4 >= 0.
  Quaternion normalized() const;

  /// Copy with q4 >= 0 (no rescaling).
  Quaternion canonical() const;

  bool operator==(const Quaternion& o) const = default;

 private:
  Vec4 v_;
};

std::ostream& operator<<(std::ostream& os, const Quaternion& q);

/// Cross-product (skew-symmetric) matrix: skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& a);

Mat4 omega_matrix(const Vec3& w);

/// 0.5 * Omega(w) * q.
Vec4 quat_derivative(const Quaternion& q, const Vec3& w);

Quaternion quat_multiply(const Quaternion& a, const Quaternion& b);
inline Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return quat_multiply(a, b);
}

/// Conjugate; equals the inverse for unit quaternions.
Quaternion quat_inverse(const Quaternion& q);

Dcm dcm_of(const Quaternion& q);

/// Unit quaternion from a proper orthogonal DCM (Shepperd's method).
Quaternion quat_of_dcm(const Dcm& c);

/// (dtheta / 2, 1), not normalized. Inputs with norm >= 1 rad are outside the
/// small-angle regime; see small_angle_in_regime().
Quaternion small_angle_quat(const ErrorAngle& dtheta);
inline bool small_angle_in_regime(const ErrorAngle& dtheta) { return dtheta.norm() < 1.0; }

/// Unit quaternion from a vector part dq. Uses sqrt(1 - |dq|^2) for the scalar
/// when |dq|^2 <= 1, otherwise scales (dq, 1) by 1 / sqrt(1 + |dq|^2).
Quaternion renormalize(const Vec3& dq);

/// Sign-invariant angular distance 2 acos(|<a, b>|), in radians.
double angular_distance(const Quaternion& a, const Quaternion& b);

inline double rad2deg(double r) { return r * 57.295779513082320876798; }
inline double deg2rad(double d) { return d / 57.295779513082320876798; }

/// Z-Y-X Euler angles (roll about x, pitch about y, yaw about z), rad.
struct Euler {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

/// dcm_of(result) == Rx(roll) * Ry(pitch) * Rz(yaw).
Quaternion quat_of_euler(const Euler& e);

/// Pitch in [-pi/2, pi/2]; roll and yaw in (-pi, pi].
Euler euler_of(const Quaternion& q);

/// Rotation about the body y axis measured with full (-pi, pi] range, for pure
/// pitch motion from level. Unlike the Z-Y-X pitch it keeps growing past 90 deg.
double pitch_sweep_angle(const Quaternion& q);

/// Body angular rate from Z-Y-X Euler angles and their rates.
Vec3 body_rate_from_euler_rates(const Euler& e, const Euler& rates);

/// exp(0.5 * Omega(w) * dt) * q, closed form, renormalized and canonical.
Quaternion integrate_constant_rate(const Quaternion& q, const Vec3& w, double dt);

}  // namespace attiq
