#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "salvo/backend.hpp"
#include "salvo/rng.hpp"
#include "scene_util.hpp"

using namespace salvo;

namespace {

// Low-frequency smooth image in double precision; the near-zero-residual
// Hessian check needs a small, well-separated curvature scale.
Image slowImage(Rng& rng, int w, int h, double maxFreq = 0.08, double amp = 40) {
  struct Comp {
    double kx, ky, phase, a;
  };
  std::vector<Comp> comps;
  for (int c = 0; c < 4; ++c) {
    const double freq = rng.uniform(0.3 * maxFreq, maxFreq);
    const double ang = rng.uniform(0, 2 * M_PI);
    comps.push_back({freq * std::cos(ang), freq * std::sin(ang), rng.uniform(0, 2 * M_PI),
                     amp / 2.0});
  }
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 128;
      for (const auto& c : comps) v += c.a * std::sin(c.kx * x + c.ky * y + c.phase);
      img(y, x) = v;
    }
  return img;
}

KeyFrame flatKeyframe(int id, const Image& img, const SE3& pose) {
  KeyFrame kf;
  kf.id = id;
  kf.pyramid = std::make_shared<ImagePyramid>(buildPyramid(img, 1));
  kf.pose = pose;
  kf.affine = {0, 0, 1.0};
  return kf;
}

// Two frames sharing an image, separated by a sub-pixel twist: residuals are
// tiny, so the Gauss-Newton Hessian equals the true Hessian to high accuracy.
WindowState nearZeroWindow(Rng& rng, const CameraIntrinsics& K, int numPoints) {
  const Image img = slowImage(rng, K.width, K.height);
  WindowState w;
  w.frames.push_back(flatKeyframe(0, img, SE3()));
  Vec6 d;
  for (int i = 0; i < 3; ++i) {
    d[i] = rng.uniform(5e-5, 1.5e-4);  // ~0.02 px shift at z = 1
    d[i + 3] = rng.uniform(-5e-5, 5e-5);
  }
  w.frames.push_back(flatKeyframe(1, img, SE3::Exp(d)));

  int added = 0, attempts = 0;
  while (added < numPoints && attempts < 2000) {
    ++attempts;
    ActivePoint p;
    p.u = std::floor(rng.uniform(20, K.width - 20.0));
    p.v = std::floor(rng.uniform(20, K.height - 20.0));
    p.idepth = rng.uniform(0.8, 1.2);
    p.obsTargets = {1};
    const SE3 rel = w.frames[1].pose.inverse() * w.frames[0].pose;
    bool good = true;
    for (const auto& off : ResidualPattern::offsets) {
      const Vec3 xt = rel * (K.backproject(p.u + off[0], p.v + off[1]) / p.idepth);
      const Vec2 px = K.project(xt);
      const double fx = px.x() - std::floor(px.x());
      const double fy = px.y() - std::floor(px.y());
      if (fx < 0.01 || fx > 0.99 || fy < 0.01 || fy > 0.99) good = false;
    }
    if (!good) continue;
    w.frames[0].points.push_back(p);
    ++added;
  }
  return w;
}

// Window on the rendered scene with mildly perturbed poses and idepths.
WindowState toyWindow(Rng& rng, const SyntheticScene& scene, int numFrames, int maxPoints,
                      double poseNoise = 0.002, double idepthNoise = 0.01) {
  std::vector<int> frames;
  for (int i = 0; i < numFrames; ++i) frames.push_back(2 * i);
  WindowState w = testutil::windowFromScene(scene, frames, 36);
  int total = 0;
  for (auto& f : w.frames) {
    for (auto& p : f.points) {
      p.idepth = std::max(0.05, p.idepth + rng.uniform(-idepthNoise, idepthNoise));
      ++total;
    }
  }
  while (total > maxPoints) {
    for (auto& f : w.frames) {
      if (total <= maxPoints) break;
      if (f.points.size() > 1) {
        f.points.pop_back();
        --total;
      }
    }
  }
  for (size_t i = 1; i < w.frames.size(); ++i) {
    Vec6 d;
    for (int k = 0; k < 6; ++k) d[k] = rng.uniform(-poseNoise, poseNoise);
    w.frames[i].pose = w.frames[i].pose.boxplus(d);
  }
  return w;
}

MatX denseH(const LinearSystem& sys) {
  const int FD = sys.frameDim(), P = sys.pointDim();
  MatX H = MatX::Zero(FD + P, FD + P);
  H.topLeftCorner(FD, FD) = sys.Hff;
  H.topRightCorner(FD, P) = sys.Hfp;
  H.bottomLeftCorner(P, FD) = sys.Hfp.transpose();
  H.bottomRightCorner(P, P) = MatX(sys.Hpp.asDiagonal());
  return H;
}

// Applies one parameter shift by global index (frames first, then points).
void shiftParam(WindowState& w, const LinearSystem& sys, int idx, double h) {
  if (idx < sys.frameDim()) {
    const int fi = idx / 8, k = idx % 8;
    if (k < 6) {
      Vec6 d = Vec6::Zero();
      d[k] = h;
      w.frames[size_t(fi)].pose = w.frames[size_t(fi)].pose.boxplus(d);
    } else if (k == 6)
      w.frames[size_t(fi)].affine.a += h;
    else
      w.frames[size_t(fi)].affine.b += h;
  } else {
    const PointRef ref = sys.points[size_t(idx - sys.frameDim())];
    w.frames[size_t(ref.frameIdx)].points[size_t(ref.pointIdx)].idepth += h;
  }
}

}  // namespace

TEST_CASE("linearize: zero-residual window has zero gradient") {
  Rng rng(404);
  const CameraIntrinsics K(150, 150, 79.5, 79.5, 160, 160);
  const Image img = slowImage(rng, 160, 160);
  WindowState w;
  w.frames.push_back(flatKeyframe(0, img, SE3()));
  w.frames.push_back(flatKeyframe(1, img, SE3()));  // same pose, same image
  for (int i = 0; i < 6; ++i) {
    ActivePoint p;
    p.u = 30 + 15 * i;
    p.v = 40 + 10 * i;
    p.idepth = 1.0;
    p.obsTargets = {1};
    w.frames[0].points.push_back(p);
  }
  const LinearSystem sys = linearize(w, K, PhotoConfig{});
  CHECK(sys.gf.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(sys.gp.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(sys.energy == doctest::Approx(0));
}

TEST_CASE("linearize: single point, single observation sparsity structure") {
  Rng rng(405);
  const CameraIntrinsics K(150, 150, 79.5, 79.5, 160, 160);
  WindowState w = nearZeroWindow(rng, K, 1);
  REQUIRE(w.frames[0].points.size() == 1);
  const LinearSystem sys = linearize(w, K, PhotoConfig{});
  REQUIRE(sys.pointDim() == 1);
  REQUIRE(sys.frameDim() == 16);
  CHECK(sys.Hpp[0] > 0);
  CHECK(sys.Hff.block<8, 8>(0, 0).norm() > 0);
  CHECK(sys.Hff.block<8, 8>(8, 8).norm() > 0);
  CHECK((sys.Hff - sys.Hff.transpose()).norm() == doctest::Approx(0).epsilon(1e-9));
  const Eigen::FullPivLU<MatX> lu(denseH(sys));
  CHECK(lu.rank() <= 17);
}

TEST_CASE("linearize: gradient matches finite differences of totalEnergy") {
  Rng rng(406);
  const SyntheticScene scene = generateScene(presetScene("loop"));
  WindowState w = toyWindow(rng, scene, 3, 9);
  const CameraIntrinsics& K = scene.spec.camera;
  const PhotoConfig pc;
  const LinearSystem sys = linearize(w, K, pc);

  const double h = 1e-6;
  VecX fd(sys.frameDim() + sys.pointDim());
  for (int i = 0; i < int(fd.size()); ++i) {
    WindowState plus = w, minus = w;
    shiftParam(plus, sys, i, h);
    shiftParam(minus, sys, i, -h);
    fd[i] = (totalEnergy(plus, K, pc) - totalEnergy(minus, K, pc)) / (2 * h);
  }
  VecX g(fd.size());
  g.head(sys.frameDim()) = sys.gf;
  g.tail(sys.pointDim()) = sys.gp;
  CHECK((fd - g).norm() / std::max(1.0, g.norm()) < 1e-3);
}

TEST_CASE("linearize: Hessian matches finite differences at a near-zero residual point") {
  Rng rng(407);
  const CameraIntrinsics K(150, 150, 79.5, 79.5, 160, 160);
  WindowState w = nearZeroWindow(rng, K, 5);
  REQUIRE(w.frames[0].points.size() == 5);
  const PhotoConfig pc;
  const LinearSystem sys = linearize(w, K, pc);
  const MatX H = denseH(sys);
  const int N = int(H.rows());

  auto energyAt = [&](int i, double hi, int j, double hj) {
    WindowState t = w;
    shiftParam(t, sys, i, hi);
    shiftParam(t, sys, j, hj);
    return totalEnergy(t, K, pc);
  };

  const double h = 1e-6;
  MatX Hfd(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      const double e = (energyAt(i, h, j, h) - energyAt(i, h, j, -h) -
                        energyAt(i, -h, j, h) + energyAt(i, -h, j, -h)) /
                       (4 * h * h);
      Hfd(i, j) = e;
      Hfd(j, i) = e;
    }
  CHECK((Hfd - H).norm() / H.norm() < 1e-3);
}

TEST_CASE("Schur-reduced steps equal full dense solves; energy never increases") {
  Rng rng(408);
  const SyntheticScene scene = generateScene(presetScene("loop"));
  const CameraIntrinsics& K = scene.spec.camera;
  const PhotoConfig pc;
  for (int trial = 0; trial < 50; ++trial) {
    const int numFrames = 2 + int(rng.uniformInt(3));  // 2..4 keyframes
    WindowState w = toyWindow(rng, scene, numFrames, 10);

    const LinearSystem sys = linearize(w, K, pc);
    const StepResult schur = computeGnStep(sys, 1e-3, true);
    const StepResult dense = computeGnStep(sys, 1e-3, false);
    REQUIRE(schur.ok);
    REQUIRE(dense.ok);
    const double scale = std::max(
        1.0, std::sqrt(dense.deltaFrames.squaredNorm() + dense.deltaPoints.squaredNorm()));
    CHECK((schur.deltaFrames - dense.deltaFrames).norm() / scale < 1e-9);
    CHECK((schur.deltaPoints - dense.deltaPoints).norm() / scale < 1e-9);

    BackendConfig bc;
    bc.maxIters = 4;
    const SolveReport report = solveWindow(w, K, pc, bc);
    CHECK(!report.failed);
    for (size_t i = 1; i < report.energyTrace.size(); ++i)
      CHECK(report.energyTrace[i] <= report.energyTrace[i - 1] * (1 + 1e-12));
  }
}

TEST_CASE("solveWindow: window at a minimum stays put after one iteration") {
  // Exact minimum by construction: identical images at identical poses.
  Rng rng(409);
  const CameraIntrinsics K(150, 150, 79.5, 79.5, 160, 160);
  const Image img = slowImage(rng, 160, 160);
  WindowState w;
  w.frames.push_back(flatKeyframe(0, img, SE3()));
  w.frames.push_back(flatKeyframe(1, img, SE3()));
  for (int i = 0; i < 8; ++i) {
    ActivePoint p;
    p.u = 25 + 13 * i;
    p.v = 30 + 11 * i;
    p.idepth = 1.0;
    p.obsTargets = {1};
    w.frames[0].points.push_back(p);
  }
  WindowState before = w;
  BackendConfig bc;
  const SolveReport report = solveWindow(w, K, PhotoConfig{}, bc);
  CHECK(!report.failed);
  CHECK(report.iterations == 1);
  CHECK(report.finalEnergy <= report.initialEnergy + 1e-12);
  for (size_t i = 0; i < w.frames.size(); ++i) {
    CHECK((w.frames[i].pose.t - before.frames[i].pose.t).norm() < 1e-9);
    CHECK((w.frames[i].pose.R - before.frames[i].pose.R).norm() < 1e-9);
  }
}

TEST_CASE("solveWindow recovers ground truth from perturbed poses") {
  Rng rng(410);
  // Low-frequency textures so a 5 cm / 1 degree perturbation stays inside the
  // photometric convergence basin at the finest level.
  SceneSpec spec = presetScene("loop");
  spec.surfaceTexture = {120, 52, 5, 5, 16};
  spec.objectTexture = {130, 60, 6, 6, 18};
  const SyntheticScene scene = generateScene(spec);
  const CameraIntrinsics& K = scene.spec.camera;
  WindowState w = testutil::windowFromScene(scene, {0, 2, 4}, 16, 2.5, 200);
  std::vector<SE3> truth;
  for (const auto& f : w.frames) truth.push_back(f.pose);

  // Perturb the newest keyframe by 1 degree / 5 cm. The two older keyframes
  // stay frozen: monocular scale is a gauge freedom, so a unique ground-truth
  // comparison needs two anchored poses.
  {
    Vec6 d;
    const double rot = 1.0 * M_PI / 180.0 / std::sqrt(3.0);
    const double trans = 0.05 / std::sqrt(3.0);
    for (int k = 0; k < 3; ++k) {
      d[k] = trans * (rng.uniform() > 0.5 ? 1 : -1);
      d[k + 3] = rot * (rng.uniform() > 0.5 ? 1 : -1);
    }
    w.frames.back().pose = w.frames.back().pose.boxplus(d);
  }

  BackendConfig bc;
  bc.maxIters = 60;
  bc.freezeFrames = 2;
  const SolveReport report = solveWindow(w, K, PhotoConfig{}, bc);
  REQUIRE(!report.failed);
  for (size_t i = 0; i < w.frames.size(); ++i) {
    const SE3 err = truth[i].inverse() * w.frames[i].pose;
    const double rotErrDeg = SE3::LogSO3(err.R).norm() * 180.0 / M_PI;
    CHECK(rotErrDeg < 0.05);
    CHECK(err.t.norm() < 1e-3);
  }
}

TEST_CASE("solveWindow with a gross outlier stays within 5x of the clean error") {
  const SyntheticScene scene = generateScene(presetScene("loop"));
  const CameraIntrinsics& K = scene.spec.camera;

  auto solveAndMeasure = [&](bool withOutlier) {
    Rng local(42);
    WindowState w = testutil::windowFromScene(scene, {0, 2, 4}, 20, 8.0, 120);
    std::vector<SE3> truth;
    for (const auto& f : w.frames) truth.push_back(f.pose);
    for (size_t i = 1; i < w.frames.size(); ++i) {
      Vec6 d;
      for (int k = 0; k < 6; ++k) d[k] = local.uniform(-0.01, 0.01);
      w.frames[i].pose = w.frames[i].pose.boxplus(d);
    }
    if (withOutlier && !w.frames[0].points.empty())
      w.frames[0].points[0].idepth *= 6.0;  // grossly wrong depth

    BackendConfig bc;
    bc.maxIters = 25;
    solveWindow(w, K, PhotoConfig{}, bc);
    double err = 0;
    for (size_t i = 0; i < w.frames.size(); ++i)
      err += (truth[i].inverse() * w.frames[i].pose).t.norm();
    return err;
  };
  const double clean = solveAndMeasure(false);
  const double spoiled = solveAndMeasure(true);
  CHECK(spoiled < 5.0 * std::max(clean, 1e-4));
}

TEST_CASE("gauge invariance: left-composing a rigid transform leaves energy unchanged") {
  Rng rng(412);
  const SyntheticScene scene = generateScene(presetScene("loop"));
  const CameraIntrinsics& K = scene.spec.camera;
  WindowState w = toyWindow(rng, scene, 3, 30);
  const PhotoConfig pc;
  const double e0 = totalEnergy(w, K, pc);
  Vec6 d;
  for (int k = 0; k < 6; ++k) d[k] = rng.uniform(-0.5, 0.5);
  const SE3 G = SE3::Exp(d);
  for (auto& f : w.frames) f.pose = G * f.pose;
  const double e1 = totalEnergy(w, K, pc);
  CHECK(std::abs(e1 - e0) <= 1e-9 * std::max(1.0, e0));
}

TEST_CASE("marginalize: frame observed by nothing leaves the prior empty") {
  const SyntheticScene scene = generateScene(presetScene("loop"));
  WindowState w = testutil::windowFromScene(scene, {0, 2, 4}, 40, 8.0, 10);
  w.frames[0].points.clear();
  for (auto& f : w.frames)
    for (auto& p : f.points)
      p.obsTargets.erase(std::remove(p.obsTargets.begin(), p.obsTargets.end(), 0),
                         p.obsTargets.end());
  const auto records = marginalize(w, {0}, scene.spec.camera, PhotoConfig{});
  CHECK(records.empty());
  CHECK(w.frames.size() == 2);
  CHECK(w.prior.H.norm() == doctest::Approx(0));
  CHECK(w.prior.b.norm() == doctest::Approx(0));
}

TEST_CASE("marginalize one point: reduced step matches the full system step") {
  Rng rng(414);
  const SyntheticScene scene = generateScene(presetScene("loop"));
  const CameraIntrinsics& K = scene.spec.camera;
  const PhotoConfig pc;
  WindowState w = toyWindow(rng, scene, 2, 6, 0.001, 0.005);
  REQUIRE(w.frames[0].points.size() >= 2);

  const LinearSystem full = linearize(w, K, pc);
  const StepResult fullStep = computeGnStep(full, 1e-9, false);
  REQUIRE(fullStep.ok);

  WindowState reduced = w;
  marginalize(reduced, {}, {PointRef{0, 0}}, K, pc);
  const LinearSystem red = linearize(reduced, K, pc);
  const StepResult redStep = computeGnStep(red, 1e-9, false);
  REQUIRE(redStep.ok);

  CHECK((redStep.deltaFrames - fullStep.deltaFrames).norm() /
            std::max(1e-12, fullStep.deltaFrames.norm()) <
        1e-6);
}

TEST_CASE("marginalize a frame: reduced step matches the full step on kept parameters") {
  Rng rng(415);
  const SyntheticScene scene = generateScene(presetScene("loop"));
  const CameraIntrinsics& K = scene.spec.camera;
  const PhotoConfig pc;
  WindowState w = toyWindow(rng, scene, 3, 9, 0.001, 0.005);
  const int outId = w.frames[0].id;
  REQUIRE(!w.frames[0].points.empty());
  // The equivalence requires every kept residual to survive the
  // marginalization, so drop observations into the outgoing frame up front.
  for (size_t fi = 1; fi < w.frames.size(); ++fi)
    for (auto& p : w.frames[fi].points)
      p.obsTargets.erase(std::remove(p.obsTargets.begin(), p.obsTargets.end(), outId),
                         p.obsTargets.end());

  // Same gauge on both sides: frame 1 of the full window (= frame 0 of the
  // reduced window) is the anchor.
  LinearSystem full = linearize(w, K, pc);
  std::fill(full.frozen.begin(), full.frozen.end(), 0);
  for (int k = 0; k < 8; ++k) full.frozen[size_t(8 + k)] = 1;
  const StepResult fullStep = computeGnStep(full, 1e-9, false);
  REQUIRE(fullStep.ok);

  WindowState reduced = w;
  marginalize(reduced, {outId}, K, pc);
  const LinearSystem red = linearize(reduced, K, pc);  // frame 0 frozen by default
  const StepResult redStep = computeGnStep(red, 1e-9, false);
  REQUIRE(redStep.ok);

  VecX fullKept(redStep.deltaFrames.size());
  for (size_t fi = 1; fi < w.frames.size(); ++fi)
    fullKept.segment<8>(long(8 * (fi - 1))) = fullStep.deltaFrames.segment<8>(long(8 * fi));
  CHECK((redStep.deltaFrames - fullKept).norm() / std::max(1e-9, fullKept.norm()) < 1e-6);
}

TEST_CASE("repeated marginalization keeps the prior symmetric PSD") {
  const SyntheticScene scene = generateScene(presetScene("loop"));
  const CameraIntrinsics& K = scene.spec.camera;
  const PhotoConfig pc;
  WindowState w = testutil::windowFromScene(scene, {0, 2, 4, 6, 8}, 28, 8.0, 60);
  BackendConfig bc;
  bc.maxIters = 3;
  solveWindow(w, K, pc, bc);
  for (int round = 0; round < 3 && w.frames.size() > 2; ++round) {
    marginalize(w, {w.frames[0].id}, K, pc);
    REQUIRE(w.prior.dim() > 0);
    const MatX& H = w.prior.H;
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    CHECK((H - H.transpose()).cwiseAbs().maxCoeff() / scale < 1e-8);
    Eigen::SelfAdjointEigenSolver<MatX> eig(H);
    CHECK(eig.eigenvalues().minCoeff() / scale > -1e-8);
    solveWindow(w, K, pc, bc);
  }
}

TEST_CASE("first-frame gauge freezing holds the oldest keyframe fixed") {
  Rng rng(417);
  const SyntheticScene scene = generateScene(presetScene("loop"));
  WindowState w = toyWindow(rng, scene, 3, 20);
  const SE3 anchor = w.frames[0].pose;
  BackendConfig bc;
  bc.maxIters = 5;
  solveWindow(w, scene.spec.camera, PhotoConfig{}, bc);
  CHECK((w.frames[0].pose.t - anchor.t).norm() == doctest::Approx(0));
  CHECK((w.frames[0].pose.R - anchor.R).norm() == doctest::Approx(0));
}
