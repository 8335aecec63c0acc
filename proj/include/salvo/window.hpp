#pragma once

#include <vector>

#include "salvo/frame.hpp"

namespace salvo {

/// Quadratic prior left behind by marginalized frames and points, stored in
/// the tangent space of the recorded linearization points (8 parameters per
/// frame: pose twist then a, b).
struct MargPrior {
  std::vector<int> frameIds;
  std::vector<SE3> poseLin;
  std::vector<Eigen::Vector2d> affineLin;
  MatX H;
  VecX b;

  bool empty() const { return frameIds.empty(); }
  int dim() const { return int(frameIds.size()) * 8; }
};

/// The sliding optimization window: ordered keyframes (oldest first), their
/// active points, and the marginalization prior.
struct WindowState {
  std::vector<KeyFrame> frames;
  MargPrior prior;

  const KeyFrame* frameById(int id) const {
    for (const auto& f : frames)
      if (f.id == id) return &f;
    return nullptr;
  }
  KeyFrame* frameById(int id) {
    for (auto& f : frames)
      if (f.id == id) return &f;
    return nullptr;
  }
  int indexById(int id) const {
    for (size_t i = 0; i < frames.size(); ++i)
      if (frames[i].id == id) return int(i);
    return -1;
  }
  const KeyFrame& latest() const { return frames.back(); }
};

/// Eq. 3: total weighted Huber energy over all active points and their
/// observations (host frames excluded). Out-of-view observations contribute 0.
double totalEnergy(const WindowState& window, const CameraIntrinsics& K, const PhotoConfig& pc);

}  // namespace salvo
