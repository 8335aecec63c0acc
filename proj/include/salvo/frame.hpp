#pragma once

#include <memory>
#include <vector>

#include "salvo/photometric.hpp"
#include "salvo/point.hpp"
#include "salvo/pyramid.hpp"

namespace salvo {

/// A point hosted in a keyframe with its observing target keyframes.
struct ActivePoint {
  double u = 0, v = 0;
  double idepth = 0;
  double idepthVariance = 0;
  PointStatus status = PointStatus::Active;
  double hostIntensity = 0;        // cached for point-cloud export
  std::vector<int> obsTargets;     // keyframe ids; never contains the host
};

enum class TraceStatus { Uninitialized, Good, Skipped, OutOfBounds, Ambiguous, Outlier };

/// An immature point being refined by epipolar search before activation.
struct CandidatePoint {
  double u = 0, v = 0;
  double idepth = 1.0;
  double idepthMin = 0.05, idepthMax = 5.0;
  int traceCount = 0;
  TraceStatus lastTrace = TraceStatus::Uninitialized;
  bool dead = false;
};

struct KeyFrame {
  int id = -1;
  double timestamp = 0;
  std::shared_ptr<const ImagePyramid> pyramid;
  SE3 pose;  // world-from-camera
  AffineBrightness affine;
  std::vector<ActivePoint> points;
  std::vector<CandidatePoint> candidates;

  FrameParams params() const { return FrameParams{pose, affine}; }
};

/// A non-keyframe (or not-yet-keyframe) frame with tracked pose/brightness.
struct Frame {
  int index = -1;
  double timestamp = 0;
  std::shared_ptr<const ImagePyramid> pyramid;
  SE3 pose;
  AffineBrightness affine;

  FrameParams params() const { return FrameParams{pose, affine}; }
};

}  // namespace salvo
