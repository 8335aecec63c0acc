#pragma once

#include <Eigen/Geometry>

#include "salvo/types.hpp"

namespace salvo {

using Vec6 = Eigen::Matrix<double, 6, 1>;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Rigid transform, kept as world-from-camera throughout the pipeline.
/// Local increments compose on the right: T <- T * Exp(delta), delta = [nu; omega].
struct SE3 {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  SE3() = default;
  SE3(const Mat3& R_, const Vec3& t_) : R(R_), t(t_) {}

  Vec3 operator*(const Vec3& p) const { return R * p + t; }

  SE3 operator*(const SE3& rhs) const { return SE3(R * rhs.R, R * rhs.t + t); }

  SE3 inverse() const { return SE3(R.transpose(), -(R.transpose() * t)); }

  static Mat3 ExpSO3(const Vec3& w) {
    double th = w.norm();
    if (th < 1e-12) {
      Mat3 W = skew(w);
      return Mat3::Identity() + W + 0.5 * W * W;
    }
    return Eigen::AngleAxisd(th, w / th).toRotationMatrix();
  }

  static Vec3 LogSO3(const Mat3& R) {
    Eigen::AngleAxisd aa(R);
    return aa.angle() * aa.axis();
  }

  static SE3 Exp(const Vec6& d) {
    Vec3 nu = d.head<3>();
    Vec3 w = d.tail<3>();
    Mat3 R = ExpSO3(w);
    double th = w.norm();
    Mat3 V;
    if (th < 1e-9) {
      V = Mat3::Identity() + 0.5 * skew(w);
    } else {
      Mat3 W = skew(w);
      double a = (1.0 - std::cos(th)) / (th * th);
      double b = (th - std::sin(th)) / (th * th * th);
      V = Mat3::Identity() + a * W + b * W * W;
    }
    return SE3(R, V * nu);
  }

  static Vec6 Log(const SE3& T) {
    Vec3 w = LogSO3(T.R);
    double th = w.norm();
    Mat3 Vinv;
    if (th < 1e-9) {
      Vinv = Mat3::Identity() - 0.5 * skew(w);
    } else {
      Mat3 W = skew(w);
      double half = 0.5 * th;
      double cot = half / std::tan(half);
      Vinv = Mat3::Identity() - 0.5 * W + (1.0 - cot) / (th * th) * W * W;
    }
    Vec6 d;
    d.head<3>() = Vinv * T.t;
    d.tail<3>() = w;
    return d;
  }

  /// Right-multiplicative update used by all solvers.
  SE3 boxplus(const Vec6& d) const { return (*this) * Exp(d); }

  bool isValidRotation(double tol = 1e-9) const {
    return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(R.determinant() - 1.0) < tol;
  }
};

}  // namespace salvo
