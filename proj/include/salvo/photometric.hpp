#pragma once

#include <array>
#include <string>

#include "salvo/pose.hpp"
#include "salvo/pyramid.hpp"
#include "salvo/types.hpp"

namespace salvo {

/// Per-frame brightness transfer parameters and exposure time.
struct AffineBrightness {
  double a = 0;         // log-scale gain
  double b = 0;         // intensity offset
  double exposure = 1;  // seconds, > 0
};

/// Center pixel plus its 8-connected neighbors.
struct ResidualPattern {
  static constexpr int size = 9;
  static constexpr std::array<std::array<int, 2>, 9> offsets = {
      {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};
};

/// Huber norm: x^2/2 inside gamma, linear outside; C1 at the junction.
inline double huber(double x, double gamma) {
  const double ax = std::abs(x);
  return ax <= gamma ? 0.5 * x * x : gamma * (ax - 0.5 * gamma);
}

/// IRLS weight so that w * r equals the Huber derivative.
inline double huberWeight(double x, double gamma) {
  const double ax = std::abs(x);
  return ax <= gamma ? 1.0 : gamma / ax;
}

/// Gradient-dependent weight w_p = c^2 / (c^2 + ||grad I||^2), in (0, 1].
inline double gradientWeight(double gradMag2, double c) {
  return c * c / (c * c + gradMag2);
}

struct PhotoConfig {
  double huberGamma = 9.0;
  double gradientC = 50.0;
  double outlierEnergyPerPixel = 12.0;  // pattern outlier if sum huber(r) > this * 9
};

/// Geometry and brightness of one frame as seen by the residual.
struct FrameParams {
  SE3 pose;  // world-from-camera
  AffineBrightness affine;
};

/// One point observed in one target frame: raw residuals over the pattern,
/// the weighted Huber energy E_pj, and (optionally) analytic Jacobians of each
/// raw residual. All pattern pixels share the center's inverse depth.
struct PatternResidual {
  using Vec9 = Eigen::Matrix<double, 9, 1>;
  using Mat96 = Eigen::Matrix<double, 9, 6>;

  bool valid = false;
  Vec9 residuals = Vec9::Zero();
  Vec9 weights = Vec9::Zero();  // w_p per pattern pixel
  double energy = 0;            // sum_k w_p(k) * huber(r_k)
  double rawEnergy = 0;         // sum_k huber(r_k), used for outlier gating

  bool hasJacobians = false;
  Mat96 dHostPose = Mat96::Zero();
  Mat96 dTargetPose = Mat96::Zero();
  Vec9 dIdepth = Vec9::Zero();
  Vec9 dAHost = Vec9::Zero();
  Vec9 dBHost = Vec9::Zero();
  Vec9 dATarget = Vec9::Zero();
  Vec9 dBTarget = Vec9::Zero();
};

/// Evaluates Eq. 1 for one point at one pyramid level. (u, v) are host pixel
/// coordinates at that level; K must be the level intrinsics. Returns false
/// (valid = false) when any pattern pixel projects out of view.
bool evaluatePatternResidual(const PyramidLevel& hostLevel, const FrameParams& host,
                             const PyramidLevel& targetLevel, const FrameParams& target,
                             const CameraIntrinsics& K, double u, double v, double idepth,
                             const PhotoConfig& pc, bool withJacobians, PatternResidual& out);

/// 256-entry inverse response plus per-pixel vignette attenuation in (0, 1].
struct PhotometricCalibration {
  std::array<double, 256> inverseResponse;
  Image vignette;

  PhotometricCalibration();  // identity response, unit vignette of size 0

  static PhotometricCalibration identity(int width, int height);
  bool wellFormed() const;
};

/// corrected_j = inverseResponse[raw_j] / vignette_j.
Image applyPhotometricCalibration(const Image& raw, const PhotometricCalibration& calib);

/// TUM monoVO pcalib.txt: 256 ascii response samples.
std::array<double, 256> loadResponseCalibration(const std::string& path);

}  // namespace salvo
