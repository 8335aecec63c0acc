#pragma once

#include <string>
#include <vector>

#include "salvo/backend.hpp"
#include "salvo/config.hpp"
#include "salvo/dataset.hpp"
#include "salvo/trajectory.hpp"

namespace salvo {

struct RunReport {
  bool success = false;
  std::string failureReason;
  int frameCount = 0;
  int framesProcessed = 0;
  int keyframes = 0;
  int pointsSelected = 0;
  int pointsActivated = 0;
  int pointsMarginalized = 0;
  int pointsDroppedAsOutliers = 0;
  int observationsRemoved = 0;
  int recoveries = 0;
  double seconds = 0;

  std::string summary() const;
};

struct RunOutput {
  Trajectory trajectory;
  std::vector<MargPointRecord> pointCloud;
  RunReport report;
};

/// The full odometry pipeline: per frame, photometric correction, saliency
/// filtering, tracking against the latest keyframe; on keyframe creation,
/// candidate activation, window optimization, outlier rejection,
/// marginalization and new candidate selection. Deterministic for a fixed
/// dataset, config and seed.
RunOutput runOdometry(const DatasetSource& ds, const RunConfig& cfg,
                      const ClassWeights& classWeights = {});

/// Ascii polygon-file-format export: `x y z intensity` per vertex, ordered by
/// marginalization time.
void exportPointCloud(const std::vector<MargPointRecord>& points, const std::string& path);
std::vector<MargPointRecord> readPointCloud(const std::string& path);

}  // namespace salvo
