#pragma once

#include <vector>

#include "salvo/window.hpp"

namespace salvo {

enum class TrackingStatus { Ok, Recovered, Lost };

struct TrackingResult {
  SE3 kfFromFrame;          // latest-KF-from-frame
  AffineBrightness affine;  // brightness parameters of the tracked frame
  double finalEnergy = 0;   // mean weighted Huber energy per pattern pixel, level 0
  double validFraction = 0;
  TrackingStatus status = TrackingStatus::Lost;
};

/// A point with known depth expressed in the reference keyframe, the unit the
/// coarse tracker aligns against.
struct TrackPoint {
  double u = 0, v = 0;
  double idepth = 0;
};

struct TrackerConfig {
  int levels = 4;
  int maxItersPerLevel = 12;
  double initialLambda = 1e-3;
  double lostMeanEnergy = 20.0;    // per pattern pixel
  double minValidFraction = 0.25;  // of reference points that must stay in view
  double rotationDeltaDeg = 3.0;   // recovery perturbation per axis
};

/// Two-frame direct image alignment, coarse to fine, over (pose, a, b).
/// The prior is the predicted latest-KF-from-frame transform.
TrackingResult trackFrame(const ImagePyramid& framePyr, double frameExposure,
                          const KeyFrame& latestKF, const std::vector<TrackPoint>& refPoints,
                          const SE3& motionPrior, const CameraIntrinsics& K,
                          const PhotoConfig& pc, const TrackerConfig& tc);

/// Re-runs trackFrame from the 27 initializations formed by composing the
/// prior with small rotations {-d, 0, +d} about each axis. Best converged
/// result wins (status Recovered); Lost when all 27 diverge.
TrackingResult recoverTracking(const ImagePyramid& framePyr, double frameExposure,
                               const KeyFrame& latestKF, const std::vector<TrackPoint>& refPoints,
                               const SE3& motionPrior, const CameraIntrinsics& K,
                               const PhotoConfig& pc, const TrackerConfig& tc);

struct KeyframeMetrics {
  double f_t = 0;    // mean-square optical flow, pixels
  double f = 0;      // mean flow without rotation, pixels
  double alpha = 0;  // relative brightness factor
};

/// Flow/brightness metrics between the reference keyframe and a tracked frame.
KeyframeMetrics keyframeMetrics(const KeyFrame& latestKF, const TrackingResult& tracked,
                                double frameExposure, const std::vector<TrackPoint>& refPoints,
                                const CameraIntrinsics& K);

struct KeyframeWeights {
  double wf = 1.0, wft = 1.0, wa = 1.0;
};

/// w_f f + w_ft f_t + w_a alpha > T_kf, on normalized metrics. During
/// bootstrap the threshold is scaled down so the initial keyframe burst
/// materializes.
bool needNewKeyframe(const KeyframeMetrics& normalized, const KeyframeWeights& w, double Tkf,
                     bool bootstrap = false, double bootstrapFactor = 0.5);

struct TraceConfig {
  double minEpipolarLen = 1.5;      // pixels; below this there is no parallax
  double maxSampleCount = 512;
  double ssdOutlierPerPixel = 150;  // on the plain squared pattern error
  double ambiguityRatio = 1.1;      // second-best within 10% of best
  double noiseSigma = 1.5;          // intensity units, for the curvature variance proxy
  double minPixelSigma = 0.3;
  double maxPixelSigma = 2.0;
};

/// Discrete search along the epipolar segment spanned by the candidate's
/// inverse-depth interval, with subpixel refinement; shrinks the interval
/// around the minimum (never widens it).
void traceCandidate(CandidatePoint& cand, const KeyFrame& hostKF, const ImagePyramid& framePyr,
                    const FrameParams& frameParams, const CameraIntrinsics& K,
                    const TraceConfig& tc);

struct ActivationConfig {
  int minTraces = 2;
  double maxRelIntervalWidth = 0.75;  // (max-min)/mid convergence gate
};

/// Greedy max-min-distance promotion of converged candidates, projected into
/// the latest keyframe. Promoted points become Active with the interval
/// midpoint as inverse depth. Returns the number promoted.
int activateCandidates(WindowState& window, int nNeeded, const CameraIntrinsics& K,
                       const ActivationConfig& ac);

struct MarginalizationPolicy {
  int maxKeyframes = 7;        // N_f
  double minVisibility = 0.05; // 5% rule
  double distEpsilon = 1e-3;   // meters, in the distance score
};

/// Frames to drop: any with < 5% of points visible in the latest frame, plus,
/// while more than N_f remain, the frame maximizing
/// sqrt(dist(i, latest)) * sum_k 1/(dist(i,k)+eps). The two newest keyframes
/// are never marked and the window never shrinks below 2.
std::vector<int> scheduleMarginalization(const WindowState& window, const CameraIntrinsics& K,
                                         const MarginalizationPolicy& mp);

}  // namespace salvo
