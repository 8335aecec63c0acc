#pragma once

#include <string>
#include <vector>

#include "salvo/window.hpp"

namespace salvo {

struct PointRef {
  int frameIdx = -1;
  int pointIdx = -1;
};

/// Gauss-Newton normal equations of the window in block form. Frame layout is
/// 8 parameters per keyframe (pose twist, a, b) in window order; one inverse
/// depth per point. The point-point block is diagonal by construction.
struct LinearSystem {
  std::vector<int> frameIds;
  std::vector<PointRef> points;
  MatX Hff;
  MatX Hfp;
  VecX Hpp;
  VecX gf;
  VecX gp;
  double energy = 0;  // photometric + prior energy at the linearization point
  std::vector<uint8_t> frozen;  // per frame parameter; gauge fixing

  int frameDim() const { return int(frameIds.size()) * 8; }
  int pointDim() const { return int(points.size()); }
};

struct StepResult {
  VecX deltaFrames;
  VecX deltaPoints;
  bool ok = false;
};

struct BackendConfig {
  int maxIters = 6;
  int freezeFrames = 1;  // oldest keyframes held fixed (gauge)
  double initialLambda = 1e-4;
  int maxRejects = 5;
  double stepNormTol = 1e-6;
  double relEnergyTol = 1e-7;
};

struct SolveReport {
  int iterations = 0;
  double initialEnergy = 0;
  double finalEnergy = 0;
  bool failed = false;
  std::string failureReason;
  std::vector<double> energyTrace;  // objective after each accepted step
};

/// Accumulates J^T W J and J^T W r over all pattern residuals with Huber IRLS
/// weights times the gradient weights, plus the marginalization prior at its
/// linearization point. Gauge: the oldest keyframe's 8 parameters are frozen.
LinearSystem linearize(const WindowState& window, const CameraIntrinsics& K,
                       const PhotoConfig& pc);

/// One damped Gauss-Newton step. `useSchur` eliminates the point parameters
/// first; the dense route solves the full system, used as the exactness oracle.
StepResult computeGnStep(const LinearSystem& sys, double lambda, bool useSchur);

/// Prior energy 0.5 d^T H d + b^T d at the window's current state.
double priorEnergy(const WindowState& window);

/// Photometric plus prior energy; the quantity the solver must not increase.
double windowObjective(const WindowState& window, const CameraIntrinsics& K,
                       const PhotoConfig& pc);

void applyStep(WindowState& window, const LinearSystem& sys, const StepResult& step);

/// Levenberg-damped Gauss-Newton with Schur elimination until the step norm or
/// relative energy decrease drops below tolerance, or maxIters.
SolveReport solveWindow(WindowState& window, const CameraIntrinsics& K, const PhotoConfig& pc,
                        const BackendConfig& cfg);

struct MargPointRecord {
  Vec3 world;
  double intensity = 0;
};

/// Removes the given frames and points from the window. Outgoing points with
/// >= 2 observations are Schur-marginalized into the prior at the current
/// linearization; the rest are dropped. Points hosted in outgoing frames are
/// implicitly outgoing; `pointsOut` names additional points whose hosts stay.
/// Residuals of surviving points that target outgoing frames are dropped.
/// Returns the marginalized points in world coordinates for export.
std::vector<MargPointRecord> marginalize(WindowState& window, const std::vector<int>& frameIdsOut,
                                         const std::vector<PointRef>& pointsOut,
                                         const CameraIntrinsics& K, const PhotoConfig& pc);

inline std::vector<MargPointRecord> marginalize(WindowState& window,
                                                const std::vector<int>& frameIdsOut,
                                                const CameraIntrinsics& K,
                                                const PhotoConfig& pc) {
  return marginalize(window, frameIdsOut, {}, K, pc);
}

}  // namespace salvo
