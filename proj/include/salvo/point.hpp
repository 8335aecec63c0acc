#pragma once

#include <optional>

#include "salvo/pose.hpp"
#include "salvo/types.hpp"

namespace salvo {

enum class PointStatus { Candidate, Active, Marginalized, Outlier };

/// A tracked feature parameterized by inverse depth in its host frame.
struct InverseDepthPoint {
  int hostFrameId = -1;
  double u = 0, v = 0;
  double idepth = 0;
  double idepthVariance = 0;
  PointStatus status = PointStatus::Candidate;
};

struct Projection {
  double u = 0, v = 0;
  double idepth = 0;  // inverse depth in the target frame
};

/// Margin that keeps the whole residual pattern plus its bilinear support
/// inside the image.
inline constexpr double kProjectionMargin = 2.0;

/// Back-projects (u, v, idepth) in the host camera, maps host -> target and
/// reprojects. Empty when the target-frame depth is non-positive or the pixel
/// falls outside the image minus `margin`.
inline std::optional<Projection> project(double u, double v, double idepth, const SE3& hostPose,
                                         const SE3& targetPose, const CameraIntrinsics& K,
                                         double margin = kProjectionMargin) {
  const Vec3 xHost = K.backproject(u, v) / idepth;
  const Vec3 xTarget = targetPose.inverse() * (hostPose * xHost);
  if (xTarget.z() <= 0) return std::nullopt;
  const Vec2 px = K.project(xTarget);
  if (px.x() < margin || px.x() > K.width - 1 - margin || px.y() < margin ||
      px.y() > K.height - 1 - margin)
    return std::nullopt;
  return Projection{px.x(), px.y(), 1.0 / xTarget.z()};
}

inline std::optional<Projection> project(const InverseDepthPoint& p, const SE3& hostPose,
                                         const SE3& targetPose, const CameraIntrinsics& K,
                                         double margin = kProjectionMargin) {
  return project(p.u, p.v, p.idepth, hostPose, targetPose, K, margin);
}

}  // namespace salvo
