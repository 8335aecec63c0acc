#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace salvo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Row-major single-channel grids; images hold intensities in [0,255].
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using LabelGrid = Eigen::Array<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Pinhole model, no distortion; inputs are assumed rectified.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w, int h)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
    if (fx <= 0 || fy <= 0) throw ConfigError("intrinsics: focal lengths must be positive");
    if (cx <= 0 || cx >= width || cy <= 0 || cy >= height)
      throw ConfigError("intrinsics: principal point outside image");
  }

  Mat3 matrix() const {
    Mat3 K = Mat3::Identity();
    K(0, 0) = fx;
    K(1, 1) = fy;
    K(0, 2) = cx;
    K(1, 2) = cy;
    return K;
  }

  Vec3 backproject(double u, double v) const {
    return Vec3((u - cx) / fx, (v - cy) / fy, 1.0);
  }

  Vec2 project(const Vec3& p) const {
    return Vec2(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
  }

  /// Intrinsics of pyramid level l (box-filtered halving, pixel centers at integers).
  CameraIntrinsics atLevel(int l) const {
    CameraIntrinsics k;
    double s = double(1 << l);
    k.fx = fx / s;
    k.fy = fy / s;
    k.cx = (cx + 0.5) / s - 0.5;
    k.cy = (cy + 0.5) / s - 0.5;
    k.width = width >> l;
    k.height = height >> l;
    return k;
  }
};

}  // namespace salvo
