#include "attiq/attitude.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace attiq {

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0) return identity();
  const Vec3 k = axis / n;
  const double s = std::sin(0.5 * angle);
  return Quaternion(k.x() * s, k.y() * s, k.z() * s, std::cos(0.5 * angle));
}

Quaternion Quaternion::normalized() const {
  const double n = v_.norm();
  Vec4 u = v_ / n;
  if (u[3] < 0.0) u = -u;
  return Quaternion(u);
}

Quaternion Quaternion::canonical() const { return v_[3] < 0.0 ? Quaternion(-v_) : *this; }

std::ostream& operator<<(std::ostream& os, const Quaternion& q) {
  return os << "(" << q.x() << ", " << q.y() << ", " << q.z() << ", " << q.w() << ")";
}

Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

Mat4 omega_matrix(const Vec3& w) {
  Mat4 m;
  m << 0.0, w.z(), -w.y(), w.x(),
       -w.z(), 0.0, w.x(), w.y(),
       w.y(), -w.x(), 0.0, w.z(),
       -w.x(), -w.y(), -w.z(), 0.0;
  return m;
}

Vec4 quat_derivative(const Quaternion& q, const Vec3& w) {
  return 0.5 * omega_matrix(w) * q.coeffs();
}

Quaternion quat_multiply(const Quaternion& a, const Quaternion& b) {
  const Vec3 av = a.vec();
  const Vec3 bv = b.vec();
  const Vec3 v = a.w() * bv + b.w() * av - av.cross(bv);
  return Quaternion(v.x(), v.y(), v.z(), a.w() * b.w() - av.dot(bv));
}

Quaternion quat_inverse(const Quaternion& q) { return Quaternion(-q.x(), -q.y(), -q.z(), q.w()); }

Dcm dcm_of(const Quaternion& q) {
  const Vec3 v = q.vec();
  const double s = q.w();
  return (2.0 * s * s - 1.0) * Mat3::Identity() - 2.0 * s * skew(v) + 2.0 * v * v.transpose();
}

Quaternion quat_of_dcm(const Dcm& c) {
  // Largest of the four squared components picks the well-conditioned branch.
  const double tr = c.trace();
  const double d4 = 1.0 + tr;
  const double d1 = 1.0 + 2.0 * c(0, 0) - tr;
  const double d2 = 1.0 + 2.0 * c(1, 1) - tr;
  const double d3 = 1.0 + 2.0 * c(2, 2) - tr;
  Vec4 q;
  if (d4 >= d1 && d4 >= d2 && d4 >= d3) {
    const double s = 2.0 * std::sqrt(d4);
    q << (c(1, 2) - c(2, 1)) / s, (c(2, 0) - c(0, 2)) / s, (c(0, 1) - c(1, 0)) / s, 0.25 * s;
  } else if (d1 >= d2 && d1 >= d3) {
    const double s = 2.0 * std::sqrt(d1);
    q << 0.25 * s, (c(0, 1) + c(1, 0)) / s, (c(0, 2) + c(2, 0)) / s, (c(1, 2) - c(2, 1)) / s;
  } else if (d2 >= d3) {
    const double s = 2.0 * std::sqrt(d2);
    q << (c(0, 1) + c(1, 0)) / s, 0.25 * s, (c(1, 2) + c(2, 1)) / s, (c(2, 0) - c(0, 2)) / s;
  } else {
    const double s = 2.0 * std::sqrt(d3);
    q << (c(0, 2) + c(2, 0)) / s, (c(1, 2) + c(2, 1)) / s, 0.25 * s, (c(0, 1) - c(1, 0)) / s;
  }
  return Quaternion(q).normalized();
}

Quaternion small_angle_quat(const ErrorAngle& dtheta) {
  return Quaternion(0.5 * dtheta.x(), 0.5 * dtheta.y(), 0.5 * dtheta.z(), 1.0);
}

Quaternion renormalize(const Vec3& dq) {
  const double n2 = dq.squaredNorm();
  if (n2 <= 1.0) {
    return Quaternion(dq.x(), dq.y(), dq.z(), std::sqrt(1.0 - n2));
  }
  const double s = 1.0 / std::sqrt(1.0 + n2);
  return Quaternion(s * dq.x(), s * dq.y(), s * dq.z(), s);
}

double angular_distance(const Quaternion& a, const Quaternion& b) {
  // atan2 keeps small angles accurate where acos of the dot product does not.
  const Vec4 qa = a.coeffs(), qb = b.coeffs();
  const double w = std::abs(qa.dot(qb));
  const Vec3 v = qa[3] * qb.head<3>() - qb[3] * qa.head<3>() - qa.head<3>().cross(qb.head<3>());
  return 2.0 * std::atan2(v.norm(), w);
}

Quaternion quat_of_euler(const Euler& e) {
  const Quaternion qx = Quaternion::from_axis_angle(Vec3::UnitX(), e.roll);
  const Quaternion qy = Quaternion::from_axis_angle(Vec3::UnitY(), e.pitch);
  const Quaternion qz = Quaternion::from_axis_angle(Vec3::UnitZ(), e.yaw);
  return (qx * qy * qz).normalized();
}

Euler euler_of(const Quaternion& q) {
  const Dcm c = dcm_of(q);
  Euler e;
  e.pitch = std::asin(std::clamp(-c(0, 2), -1.0, 1.0));
  e.roll = std::atan2(c(1, 2), c(2, 2));
  e.yaw = std::atan2(c(0, 1), c(0, 0));
  return e;
}

double pitch_sweep_angle(const Quaternion& q) {
  const Dcm c = dcm_of(q);
  return std::atan2(-c(0, 2), c(2, 2));
}

Vec3 body_rate_from_euler_rates(const Euler& e, const Euler& r) {
  const double sr = std::sin(e.roll), cr = std::cos(e.roll);
  const double sp = std::sin(e.pitch), cp = std::cos(e.pitch);
  return {r.roll - sp * r.yaw,
          cr * r.pitch + sr * cp * r.yaw,
          -sr * r.pitch + cr * cp * r.yaw};
}

Quaternion integrate_constant_rate(const Quaternion& q, const Vec3& w, double dt) {
  const double rate = w.norm();
  if (rate == 0.0) return q.normalized();
  const double half = 0.5 * rate * dt;
  const Vec3 k = w * (std::sin(half) / rate);
  const Quaternion step(k.x(), k.y(), k.z(), std::cos(half));
  return (step * q).normalized();
}

}  // namespace attiq
