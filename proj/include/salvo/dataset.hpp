#pragma once

#include <optional>
#include <string>
#include <vector>

#include "salvo/photometric.hpp"
#include "salvo/saliency.hpp"
#include "salvo/trajectory.hpp"
#include "salvo/types.hpp"

namespace salvo {

enum class DatasetFormat { TumMono, IclNuim, PlainDir, Synthetic };

DatasetFormat parseDatasetFormat(const std::string& name);

struct DatasetOptions {
  std::string saliencyDir;      // overrides <path>/saliency
  std::string segmentationDir;  // overrides <path>/semantic
  bool requireSaliency = false;
  bool requirePhotometricCalibration = false;
  bool reverse = false;  // backward playback
  double plainDirFps = 30.0;
};

/// An image sequence with timestamps, exposures, optional photometric
/// calibration, optional per-frame saliency/semantic sidecars and optional
/// ground truth. Frames load lazily from disk.
struct DatasetSource {
  CameraIntrinsics intrinsics;
  std::vector<std::string> imagePaths;
  std::vector<double> timestamps;
  std::vector<double> exposures;
  std::vector<std::string> saliencyPaths;
  std::vector<std::string> semanticPaths;
  PhotometricCalibration calibration;
  bool hasCalibration = false;
  std::optional<Trajectory> groundTruth;
  int semanticClassCount = 0;

  int frameCount() const { return int(imagePaths.size()); }
  bool hasSaliency() const { return !saliencyPaths.empty(); }
  bool hasSemantics() const { return !semanticPaths.empty(); }

  Image loadFrame(int i) const;
  SaliencyMap loadSaliency(int i) const;  // 8-bit values / 255
  SemanticMap loadSemantic(int i) const;  // raw label values
};

/// Loads one of the supported layouts; frames ordered by timestamp. Missing
/// calibration with correction enabled, or missing sidecars in saliency mode,
/// raise ConfigError (naming the first missing frame).
DatasetSource loadDataset(const std::string& path, DatasetFormat format,
                          const DatasetOptions& opts = {});

}  // namespace salvo
