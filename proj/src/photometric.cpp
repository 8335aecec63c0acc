#include "salvo/photometric.hpp"

#include <cmath>
#include <fstream>

#include "salvo/image.hpp"

namespace salvo {

bool evaluatePatternResidual(const PyramidLevel& hostLevel, const FrameParams& host,
                             const PyramidLevel& targetLevel, const FrameParams& target,
                             const CameraIntrinsics& K, double u, double v, double idepth,
                             const PhotoConfig& pc, bool withJacobians, PatternResidual& out) {
  out = PatternResidual{};
  if (idepth <= 0) return false;

  const SE3 targetInv = target.pose.inverse();
  const Mat3 RtT = targetInv.R;                    // target-from-world rotation
  const Mat3 Rrel = RtT * host.pose.R;             // target-from-host rotation
  const Vec3 trel = targetInv * host.pose.t;       // host origin in target frame
  const double s = (target.affine.exposure * std::exp(target.affine.a)) /
                   (host.affine.exposure * std::exp(host.affine.a));

  const double margin = 1.0 + 1e-9;  // bilinear support of each pattern pixel
  const int wT = targetLevel.width();
  const int hT = targetLevel.height();
  const int wH = hostLevel.width();
  const int hH = hostLevel.height();

  struct PixelEval {
    Vec3 y;       // K^{-1} (u+dx, v+dy, 1)
    Vec3 xTarget; // point in target camera coordinates
    double px, py;
    double Ih, It, gItx, gIty, wp;
  };
  std::array<PixelEval, ResidualPattern::size> evals;

  for (int k = 0; k < ResidualPattern::size; ++k) {
    const double hu = u + ResidualPattern::offsets[size_t(k)][0];
    const double hv = v + ResidualPattern::offsets[size_t(k)][1];
    if (hu < 0 || hu > wH - 1 || hv < 0 || hv > hH - 1) return false;

    PixelEval& e = evals[size_t(k)];
    e.y = K.backproject(hu, hv);
    e.xTarget = Rrel * (e.y / idepth) + trel;
    if (e.xTarget.z() <= 0) return false;
    const Vec2 px = K.project(e.xTarget);
    if (px.x() < margin || px.x() > wT - 1 - margin || px.y() < margin ||
        px.y() > hT - 1 - margin)
      return false;
    e.px = px.x();
    e.py = px.y();

    e.Ih = interpolateBilinear(hostLevel.intensity, hu, hv);
    const Vec3 it = interpolateBilinearWithGradient(targetLevel.intensity, e.px, e.py);
    e.It = it[0];
    e.gItx = it[1];
    e.gIty = it[2];
    const double ghx = interpolateBilinear(hostLevel.gx, hu, hv);
    const double ghy = interpolateBilinear(hostLevel.gy, hu, hv);
    e.wp = gradientWeight(ghx * ghx + ghy * ghy, pc.gradientC);
  }

  out.valid = true;
  for (int k = 0; k < ResidualPattern::size; ++k) {
    const PixelEval& e = evals[size_t(k)];
    const double r = (e.It - target.affine.b) - s * (e.Ih - host.affine.b);
    out.residuals[k] = r;
    out.weights[k] = e.wp;
    out.energy += e.wp * huber(r, pc.huberGamma);
    out.rawEnergy += huber(r, pc.huberGamma);
  }

  if (!withJacobians) return true;
  out.hasJacobians = true;
  for (int k = 0; k < ResidualPattern::size; ++k) {
    const PixelEval& e = evals[size_t(k)];
    const Vec3& xt = e.xTarget;
    const double iz = 1.0 / xt.z();

    Eigen::Matrix<double, 2, 3> dPi;
    dPi << K.fx * iz, 0, -K.fx * xt.x() * iz * iz, 0, K.fy * iz, -K.fy * xt.y() * iz * iz;
    const Eigen::Matrix<double, 1, 3> gIdPi =
        Eigen::Matrix<double, 1, 2>(e.gItx, e.gIty) * dPi;

    // target update T_t <- T_t Exp(d): x_t(d) = Exp(-d) x_t
    Eigen::Matrix<double, 3, 6> dxtTarget;
    dxtTarget.leftCols<3>() = -Mat3::Identity();
    dxtTarget.rightCols<3>() = skew(xt);
    out.dTargetPose.row(k) = gIdPi * dxtTarget;

    // host update T_h <- T_h Exp(d): x_t(d) = R_t^T R_h (Exp(d) x_h) + ...
    Eigen::Matrix<double, 3, 6> dxtHost;
    dxtHost.leftCols<3>() = Rrel;
    dxtHost.rightCols<3>() = -Rrel * skew(e.y / idepth);
    out.dHostPose.row(k) = gIdPi * dxtHost;

    out.dIdepth[k] = (gIdPi * (Rrel * e.y)).value() * (-1.0 / (idepth * idepth));

    const double sIh = s * (e.Ih - host.affine.b);
    out.dATarget[k] = -sIh;
    out.dAHost[k] = sIh;
    out.dBTarget[k] = -1.0;
    out.dBHost[k] = s;
  }
  return true;
}

PhotometricCalibration::PhotometricCalibration() {
  for (int i = 0; i < 256; ++i) inverseResponse[size_t(i)] = double(i);
}

PhotometricCalibration PhotometricCalibration::identity(int width, int height) {
  PhotometricCalibration c;
  c.vignette = Image::Constant(height, width, 1.0f);
  return c;
}

bool PhotometricCalibration::wellFormed() const {
  for (int i = 1; i < 256; ++i)
    if (inverseResponse[size_t(i)] < inverseResponse[size_t(i - 1)]) return false;
  if (vignette.size() == 0) return false;
  return vignette.minCoeff() > 0.f && vignette.maxCoeff() <= 1.f + 1e-6f;
}

Image applyPhotometricCalibration(const Image& raw, const PhotometricCalibration& calib) {
  Image out(raw.rows(), raw.cols());
  const bool haveVignette =
      calib.vignette.rows() == raw.rows() && calib.vignette.cols() == raw.cols();
  for (int y = 0; y < raw.rows(); ++y)
    for (int x = 0; x < raw.cols(); ++x) {
      int idx = int(std::lround(double(raw(y, x))));
      idx = std::clamp(idx, 0, 255);
      double v = calib.inverseResponse[size_t(idx)];
      if (haveVignette) v /= double(calib.vignette(y, x));
      out(y, x) = v;
    }
  return out;
}

std::array<double, 256> loadResponseCalibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open response calibration: " + path);
  std::array<double, 256> resp;
  for (int i = 0; i < 256; ++i)
    if (!(in >> resp[size_t(i)]))
      throw InputError(path + ": expected 256 response samples, got " + std::to_string(i));
  for (int i = 1; i < 256; ++i)
    if (resp[size_t(i)] < resp[size_t(i - 1)])
      throw InputError(path + ": response must be monotone non-decreasing");
  return resp;
}

}  // namespace salvo
