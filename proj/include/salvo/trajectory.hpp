#pragma once

#include <string>
#include <vector>

#include "salvo/pose.hpp"
#include "salvo/types.hpp"

namespace salvo {

struct StampedPose {
  double timestamp = 0;
  SE3 pose;
};

/// Ordered stamped poses; timestamps strictly increasing.
struct Trajectory {
  std::vector<StampedPose> poses;

  size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
  void append(double t, const SE3& pose);
};

/// Similarity transform p -> scale * R p + t.
struct Sim3 {
  double scale = 1;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 operator*(const Vec3& p) const { return scale * (R * p) + t; }
};

/// Closed-form least-squares similarity alignment of associated positions
/// (monocular scale is a gauge freedom).
Sim3 alignSimilarity(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

/// Nearest-timestamp association within `maxDt` seconds.
std::vector<std::pair<size_t, size_t>> associate(const Trajectory& a, const Trajectory& b,
                                                 double maxDt = 0.01);

/// Absolute trajectory RMSE after similarity alignment; requires >= 3
/// associated pose pairs.
double rmseAte(const Trajectory& estimate, const Trajectory& groundTruth);

/// Loop-drift metric: the estimate is similarity-aligned independently to the
/// ground-truth start segment and end segment; the value is the RMSE between
/// the two aligned copies over the full estimate.
double alignError(const Trajectory& estimate, const Trajectory& loopStartSegment,
                  const Trajectory& loopEndSegment);

/// Plain-text stamped poses: `timestamp tx ty tz qx qy qz qw` per line,
/// Hamilton convention, quaternion normalized.
void writeTrajectory(const Trajectory& traj, const std::string& path);
Trajectory readTrajectory(const std::string& path);

}  // namespace salvo
