#include "salvo/frontend.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "salvo/image.hpp"

namespace salvo {

namespace {

struct LevelAlignment {
  double meanEnergy = 0;  // per pattern pixel over valid points
  double validFraction = 0;
  bool ok = false;
};

double toLevel(double x, int l) { return (x + 0.5) / double(1 << l) - 0.5; }

// Gauss-Newton over (target pose, a, b) at one pyramid level.
LevelAlignment alignLevel(const PyramidLevel& hostLvl, const FrameParams& host,
                          const PyramidLevel& frameLvl, FrameParams& target,
                          const std::vector<TrackPoint>& pts, const CameraIntrinsics& Klvl,
                          int level, const PhotoConfig& pc, const TrackerConfig& tc) {
  using Vec8 = Eigen::Matrix<double, 8, 1>;
  using Mat8 = Eigen::Matrix<double, 8, 8>;

  auto evaluate = [&](const FrameParams& t, Mat8* H, Vec8* g) {
    LevelAlignment res;
    double energy = 0;
    int valid = 0;
    if (H) H->setZero();
    if (g) g->setZero();
    for (const auto& p : pts) {
      PatternResidual r;
      evaluatePatternResidual(hostLvl, host, frameLvl, t, Klvl, toLevel(p.u, level),
                              toLevel(p.v, level), p.idepth, pc, H != nullptr, r);
      if (!r.valid) continue;
      ++valid;
      energy += r.energy;
      if (H) {
        Eigen::Matrix<double, 9, 8> J;
        J.leftCols<6>() = r.dTargetPose;
        J.col(6) = r.dATarget;
        J.col(7) = r.dBTarget;
        PatternResidual::Vec9 w;
        for (int k = 0; k < 9; ++k)
          w[k] = r.weights[k] * huberWeight(r.residuals[k], pc.huberGamma);
        *H += J.transpose() * w.asDiagonal() * J;
        *g += J.transpose() * w.cwiseProduct(r.residuals).matrix();
      }
    }
    res.validFraction = pts.empty() ? 0.0 : double(valid) / double(pts.size());
    res.meanEnergy = valid > 0 ? energy / double(9 * valid) : std::numeric_limits<double>::infinity();
    res.ok = valid > 0;
    return res;
  };

  double lambda = tc.initialLambda;
  LevelAlignment cur = evaluate(target, nullptr, nullptr);
  for (int iter = 0; iter < tc.maxItersPerLevel; ++iter) {
    Mat8 H;
    Vec8 g;
    LevelAlignment lin = evaluate(target, &H, &g);
    if (!lin.ok) break;

    bool accepted = false;
    for (int rejects = 0; rejects < 6; ++rejects) {
      Mat8 Hd = H;
      for (int i = 0; i < 8; ++i) Hd(i, i) = Hd(i, i) * (1.0 + lambda) + 1e-10;
      const Vec8 delta = Hd.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 10;
        continue;
      }
      FrameParams trial = target;
      trial.pose = trial.pose.boxplus(delta.head<6>());
      trial.affine.a += delta[6];
      trial.affine.b += delta[7];
      const LevelAlignment trialRes = evaluate(trial, nullptr, nullptr);
      if (trialRes.ok && trialRes.meanEnergy <= cur.meanEnergy * (1.0 + 1e-12)) {
        const double decrease = cur.meanEnergy - trialRes.meanEnergy;
        target = trial;
        cur = trialRes;
        lambda = std::max(lambda * 0.5, 1e-9);
        accepted = true;
        if (delta.norm() < 1e-7 || decrease < 1e-9 * std::max(cur.meanEnergy, 1.0)) {
          return cur;
        }
        break;
      }
      lambda *= 10;
    }
    if (!accepted) break;
  }
  return cur;
}

double distanceBetween(const KeyFrame& a, const KeyFrame& b) { return (a.pose.t - b.pose.t).norm(); }

// Inverse depth of the pixel q on the epipolar line h(rho) = A + rho * B.
double idepthFromPixel(const Vec3& A, const Vec3& B, double qx, double qy) {
  const double denX = B.x() - qx * B.z();
  const double denY = B.y() - qy * B.z();
  if (std::abs(denX) >= std::abs(denY)) {
    if (std::abs(denX) < 1e-12) return -1;
    return (qx * A.z() - A.x()) / denX;
  }
  if (std::abs(denY) < 1e-12) return -1;
  return (qy * A.z() - A.y()) / denY;
}

}  // namespace

TrackingResult trackFrame(const ImagePyramid& framePyr, double frameExposure,
                          const KeyFrame& latestKF, const std::vector<TrackPoint>& refPoints,
                          const SE3& motionPrior, const CameraIntrinsics& K,
                          const PhotoConfig& pc, const TrackerConfig& tc) {
  TrackingResult result;
  result.kfFromFrame = motionPrior;
  result.affine = AffineBrightness{latestKF.affine.a, latestKF.affine.b, frameExposure};
  if (refPoints.empty()) return result;

  FrameParams target;
  target.pose = latestKF.pose * motionPrior;
  target.affine = result.affine;

  const int levels = std::min({tc.levels, framePyr.numLevels(), latestKF.pyramid->numLevels()});
  LevelAlignment finest;
  for (int l = levels - 1; l >= 0; --l) {
    finest = alignLevel((*latestKF.pyramid)[l], latestKF.params(), framePyr[l], target,
                        refPoints, K.atLevel(l), l, pc, tc);
  }

  result.kfFromFrame = latestKF.pose.inverse() * target.pose;
  result.affine = target.affine;
  result.finalEnergy = finest.meanEnergy;
  result.validFraction = finest.validFraction;
  const bool converged = finest.ok && std::isfinite(finest.meanEnergy) &&
                         finest.meanEnergy < tc.lostMeanEnergy &&
                         finest.validFraction >= tc.minValidFraction;
  result.status = converged ? TrackingStatus::Ok : TrackingStatus::Lost;
  if (!converged) result.kfFromFrame = motionPrior;  // prediction only, flagged unusable
  return result;
}

TrackingResult recoverTracking(const ImagePyramid& framePyr, double frameExposure,
                               const KeyFrame& latestKF, const std::vector<TrackPoint>& refPoints,
                               const SE3& motionPrior, const CameraIntrinsics& K,
                               const PhotoConfig& pc, const TrackerConfig& tc) {
  const double d = tc.rotationDeltaDeg * M_PI / 180.0;
  TrackingResult best;
  best.status = TrackingStatus::Lost;
  best.finalEnergy = std::numeric_limits<double>::infinity();
  for (int ix = -1; ix <= 1; ++ix)
    for (int iy = -1; iy <= 1; ++iy)
      for (int iz = -1; iz <= 1; ++iz) {
        const SE3 perturbed =
            motionPrior * SE3(SE3::ExpSO3(Vec3(ix * d, iy * d, iz * d)), Vec3::Zero());
        TrackingResult r =
            trackFrame(framePyr, frameExposure, latestKF, refPoints, perturbed, K, pc, tc);
        if (r.status == TrackingStatus::Ok && r.finalEnergy < best.finalEnergy) {
          best = r;
          best.status = TrackingStatus::Recovered;
        }
      }
  if (best.status != TrackingStatus::Recovered) {
    best = trackFrame(framePyr, frameExposure, latestKF, refPoints, motionPrior, K, pc, tc);
    best.status = TrackingStatus::Lost;
  }
  return best;
}

KeyframeMetrics keyframeMetrics(const KeyFrame& latestKF, const TrackingResult& tracked,
                                double frameExposure, const std::vector<TrackPoint>& refPoints,
                                const CameraIntrinsics& K) {
  KeyframeMetrics m;
  const SE3 frameFromKf = tracked.kfFromFrame.inverse();
  double sumFull = 0, sumTrans = 0;
  int n = 0;
  for (const auto& p : refPoints) {
    if (p.idepth <= 0) continue;
    const Vec3 xHost = K.backproject(p.u, p.v) / p.idepth;
    const Vec3 xFull = frameFromKf * xHost;
    const Vec3 xTrans = xHost + frameFromKf.t;
    if (xFull.z() <= 0 || xTrans.z() <= 0) continue;
    const Vec2 pFull = K.project(xFull);
    const Vec2 pTrans = K.project(xTrans);
    sumFull += (Vec2(p.u, p.v) - pFull).squaredNorm();
    sumTrans += (Vec2(p.u, p.v) - pTrans).squaredNorm();
    ++n;
  }
  if (n > 0) {
    m.f_t = std::sqrt(sumFull / double(n));
    m.f = std::sqrt(sumTrans / double(n));
  }
  m.alpha = std::abs(tracked.affine.a - latestKF.affine.a +
                     std::log(frameExposure / latestKF.affine.exposure));
  return m;
}

bool needNewKeyframe(const KeyframeMetrics& m, const KeyframeWeights& w, double Tkf,
                     bool bootstrap, double bootstrapFactor) {
  const double threshold = bootstrap ? Tkf * bootstrapFactor : Tkf;
  return w.wf * m.f + w.wft * m.f_t + w.wa * m.alpha > threshold;
}

void traceCandidate(CandidatePoint& cand, const KeyFrame& hostKF, const ImagePyramid& framePyr,
                    const FrameParams& frameParams, const CameraIntrinsics& K,
                    const TraceConfig& tc) {
  if (cand.dead) return;
  const PyramidLevel& frameLvl = framePyr[0];
  const PyramidLevel& hostLvl = (*hostKF.pyramid)[0];

  const SE3 targetFromHost = frameParams.pose.inverse() * hostKF.pose;
  const Mat3 Km = K.matrix();
  const Vec3 A = Km * (targetFromHost.R * K.backproject(cand.u, cand.v));
  const Vec3 B = Km * targetFromHost.t;

  // Restrict the interval to strictly positive target depth.
  double rhoMin = cand.idepthMin, rhoMax = cand.idepthMax;
  auto depthAt = [&](double rho) { return A.z() + rho * B.z(); };
  if (depthAt(rhoMin) <= 1e-9 && depthAt(rhoMax) <= 1e-9) {
    cand.lastTrace = TraceStatus::OutOfBounds;
    return;
  }
  if (std::abs(B.z()) > 1e-12) {
    const double rhoZero = -A.z() / B.z();
    if (depthAt(rhoMin) <= 1e-9) rhoMin = rhoZero + (rhoMax > rhoZero ? 1e-6 : -1e-6);
    if (depthAt(rhoMax) <= 1e-9) rhoMax = rhoZero + (rhoMin > rhoZero ? 1e-6 : -1e-6);
  }

  auto pixelAt = [&](double rho) {
    const Vec3 h = A + rho * B;
    return Vec2(h.x() / h.z(), h.y() / h.z());
  };
  const Vec2 pMin = pixelAt(rhoMin);
  const Vec2 pMax = pixelAt(rhoMax);
  const Vec2 dir = pMax - pMin;
  const double len = dir.norm();
  if (len < tc.minEpipolarLen) {
    cand.lastTrace = TraceStatus::Skipped;  // no parallax, no depth information
    return;
  }

  // Clip the segment to the image rectangle (pattern + bilinear margin).
  const double margin = 2.5;
  double s0 = 0, s1 = 1;
  auto clipAxis = [&](double p, double d, double lo, double hi) {
    if (std::abs(d) < 1e-12) return p >= lo && p <= hi;
    double ta = (lo - p) / d, tb = (hi - p) / d;
    if (ta > tb) std::swap(ta, tb);
    s0 = std::max(s0, ta);
    s1 = std::min(s1, tb);
    return s0 <= s1;
  };
  if (!clipAxis(pMin.x(), dir.x(), margin, K.width - 1 - margin) ||
      !clipAxis(pMin.y(), dir.y(), margin, K.height - 1 - margin)) {
    cand.lastTrace = TraceStatus::OutOfBounds;
    return;
  }
  const double clippedLen = len * (s1 - s0);
  if (clippedLen < tc.minEpipolarLen) {
    cand.lastTrace = TraceStatus::OutOfBounds;
    return;
  }

  // Host pattern intensities and the brightness transfer factor.
  std::array<double, ResidualPattern::size> hostI;
  for (int k = 0; k < ResidualPattern::size; ++k) {
    const double hu = cand.u + ResidualPattern::offsets[size_t(k)][0];
    const double hv = cand.v + ResidualPattern::offsets[size_t(k)][1];
    if (hu < 0 || hu > hostLvl.width() - 1 || hv < 0 || hv > hostLvl.height() - 1) {
      cand.lastTrace = TraceStatus::OutOfBounds;
      return;
    }
    hostI[size_t(k)] = interpolateBilinear(hostLvl.intensity, hu, hv);
  }
  const double sAff = (frameParams.affine.exposure * std::exp(frameParams.affine.a)) /
                      (hostKF.affine.exposure * std::exp(hostKF.affine.a));

  const int nSamples = int(std::min(tc.maxSampleCount, std::ceil(clippedLen) + 1));
  if (nSamples < 3) {
    cand.lastTrace = TraceStatus::Skipped;
    return;
  }

  auto ssdAt = [&](double s) {
    const Vec2 q = pMin + s * dir;
    double e = 0;
    for (int k = 0; k < ResidualPattern::size; ++k) {
      const double qx = q.x() + ResidualPattern::offsets[size_t(k)][0];
      const double qy = q.y() + ResidualPattern::offsets[size_t(k)][1];
      const double It = interpolateBilinear(frameLvl.intensity, qx, qy);
      const double r = (It - frameParams.affine.b) - sAff * (hostI[size_t(k)] - hostKF.affine.b);
      e += r * r;
    }
    return e;
  };

  std::vector<double> energies(static_cast<size_t>(nSamples));
  int bestIdx = 0;
  for (int i = 0; i < nSamples; ++i) {
    const double s = s0 + (s1 - s0) * double(i) / double(nSamples - 1);
    energies[size_t(i)] = ssdAt(s);
    if (energies[size_t(i)] < energies[size_t(bestIdx)]) bestIdx = i;
  }
  const double bestE = energies[size_t(bestIdx)];
  double secondE = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nSamples; ++i)
    if (std::abs(i - bestIdx) > 2) secondE = std::min(secondE, energies[size_t(i)]);

  ++cand.traceCount;
  if (bestE > tc.ssdOutlierPerPixel * ResidualPattern::size) {
    cand.lastTrace = TraceStatus::Outlier;
    cand.dead = true;
    return;
  }
  if (secondE <= bestE * tc.ambiguityRatio + 1e-9) {
    cand.lastTrace = TraceStatus::Ambiguous;
    return;
  }

  // Subpixel refinement by parabola fit around the discrete minimum.
  const double stepS = (s1 - s0) / double(nSamples - 1);
  double sBest = s0 + stepS * bestIdx;
  double curvature = 0;
  if (bestIdx > 0 && bestIdx < nSamples - 1) {
    const double em = energies[size_t(bestIdx - 1)];
    const double ep = energies[size_t(bestIdx + 1)];
    curvature = em - 2 * bestE + ep;
    if (curvature > 1e-12) {
      const double offset = std::clamp(0.5 * (em - ep) / curvature, -0.5, 0.5);
      sBest += offset * stepS;
    }
  }

  const Vec2 qBest = pMin + sBest * dir;
  const double rhoBest = idepthFromPixel(A, B, qBest.x(), qBest.y());
  if (rhoBest <= 0) {
    cand.lastTrace = TraceStatus::Skipped;
    return;
  }

  // Curvature as a variance proxy: pixel sigma from the quadratic model.
  const double stepPx = stepS * len;
  double sigmaPx = tc.maxPixelSigma;
  if (curvature > 1e-12) {
    const double noiseSsd = 2.0 * ResidualPattern::size * tc.noiseSigma * tc.noiseSigma;
    const double curvPerPx2 = curvature / (stepPx * stepPx);
    sigmaPx = std::clamp(std::sqrt(2.0 * noiseSsd / std::max(curvPerPx2, 1e-12)),
                         tc.minPixelSigma, tc.maxPixelSigma);
  }
  const double sigmaS = sigmaPx / len;
  const Vec2 qLo = pMin + (sBest - sigmaS) * dir;
  const Vec2 qHi = pMin + (sBest + sigmaS) * dir;
  double rhoLo = idepthFromPixel(A, B, qLo.x(), qLo.y());
  double rhoHi = idepthFromPixel(A, B, qHi.x(), qHi.y());
  if (rhoLo > rhoHi) std::swap(rhoLo, rhoHi);

  // Shrink only: intersect with the previous interval.
  const double newMin = std::clamp(rhoLo, cand.idepthMin, cand.idepthMax);
  const double newMax = std::clamp(rhoHi, cand.idepthMin, cand.idepthMax);
  cand.idepthMin = newMin;
  cand.idepthMax = std::max(newMin, newMax);
  cand.idepth = std::clamp(rhoBest, cand.idepthMin, cand.idepthMax);
  cand.lastTrace = TraceStatus::Good;
}

int activateCandidates(WindowState& window, int nNeeded, const CameraIntrinsics& K,
                       const ActivationConfig& ac) {
  if (nNeeded <= 0 || window.frames.empty()) return 0;
  const KeyFrame& latest = window.frames.back();

  struct Eligible {
    int frameIdx, candIdx;
    Vec2 proj;
    double variance;
  };
  std::vector<Eligible> eligible;
  for (int fi = 0; fi < int(window.frames.size()); ++fi) {
    const KeyFrame& host = window.frames[size_t(fi)];
    for (int ci = 0; ci < int(host.candidates.size()); ++ci) {
      const CandidatePoint& c = host.candidates[size_t(ci)];
      if (c.dead || c.lastTrace != TraceStatus::Good || c.traceCount < ac.minTraces) continue;
      const double mid = 0.5 * (c.idepthMin + c.idepthMax);
      if (mid <= 0) continue;
      if ((c.idepthMax - c.idepthMin) / mid > ac.maxRelIntervalWidth) continue;
      auto proj = project(c.u, c.v, mid, host.pose, latest.pose, K);
      if (!proj) continue;
      const double var = 0.25 * (c.idepthMax - c.idepthMin);
      eligible.push_back({fi, ci, Vec2(proj->u, proj->v), var * var});
    }
  }

  std::vector<Vec2> occupied;
  for (const auto& f : window.frames)
    for (const auto& p : f.points) {
      if (p.status != PointStatus::Active) continue;
      auto proj = project(p.u, p.v, p.idepth, f.pose, latest.pose, K);
      if (proj) occupied.push_back(Vec2(proj->u, proj->v));
    }

  int promoted = 0;
  std::vector<bool> used(eligible.size(), false);
  while (promoted < nNeeded) {
    int best = -1;
    double bestDist = -1, bestVar = 0;
    for (int i = 0; i < int(eligible.size()); ++i) {
      if (used[size_t(i)]) continue;
      double minDist = std::numeric_limits<double>::infinity();
      for (const auto& q : occupied)
        minDist = std::min(minDist, (eligible[size_t(i)].proj - q).squaredNorm());
      const bool tie = best >= 0 && std::abs(minDist - bestDist) <= 1e-9;
      if (best < 0 || (!tie && minDist > bestDist) ||
          (tie && eligible[size_t(i)].variance < bestVar)) {
        best = i;
        bestDist = minDist;
        bestVar = eligible[size_t(i)].variance;
      }
    }
    if (best < 0) break;
    used[size_t(best)] = true;

    const Eligible& e = eligible[size_t(best)];
    KeyFrame& host = window.frames[size_t(e.frameIdx)];
    const CandidatePoint& c = host.candidates[size_t(e.candIdx)];
    ActivePoint p;
    p.u = c.u;
    p.v = c.v;
    p.idepth = 0.5 * (c.idepthMin + c.idepthMax);
    p.idepthVariance = e.variance;
    p.status = PointStatus::Active;
    p.hostIntensity = interpolateBilinear((*host.pyramid)[0].intensity, c.u, c.v);
    for (const auto& f : window.frames) {
      if (f.id == host.id) continue;
      if (project(p.u, p.v, p.idepth, host.pose, f.pose, K)) p.obsTargets.push_back(f.id);
    }
    host.points.push_back(std::move(p));
    host.candidates[size_t(e.candIdx)].dead = true;  // consumed
    occupied.push_back(e.proj);
    ++promoted;
  }

  for (auto& f : window.frames)
    f.candidates.erase(std::remove_if(f.candidates.begin(), f.candidates.end(),
                                      [](const CandidatePoint& c) {
                                        return c.dead && c.lastTrace == TraceStatus::Good;
                                      }),
                       f.candidates.end());
  return promoted;
}

std::vector<int> scheduleMarginalization(const WindowState& window, const CameraIntrinsics& K,
                                         const MarginalizationPolicy& mp) {
  std::vector<int> marked;
  const int F = int(window.frames.size());
  if (F < 3) return marked;
  const KeyFrame& latest = window.frames.back();
  const int protectedFrom = F - 2;  // two newest keyframes are never marked

  auto isMarked = [&](int id) {
    return std::find(marked.begin(), marked.end(), id) != marked.end();
  };

  // Rule 1: low co-visibility with the latest frame.
  for (int fi = 0; fi < protectedFrom; ++fi) {
    const KeyFrame& f = window.frames[size_t(fi)];
    int total = 0, visible = 0;
    for (const auto& p : f.points) {
      if (p.status != PointStatus::Active) continue;
      ++total;
      if (project(p.u, p.v, p.idepth, f.pose, latest.pose, K, 0.0)) ++visible;
    }
    const double fraction = total > 0 ? double(visible) / double(total) : 0.0;
    if (fraction < mp.minVisibility) marked.push_back(f.id);
  }
  while (F - int(marked.size()) < 2 && !marked.empty()) marked.pop_back();

  // Rule 2: over capacity, drop the frame far from the latest and close to the rest.
  while (F - int(marked.size()) > mp.maxKeyframes) {
    int bestId = -1;
    double bestScore = -1;
    for (int fi = 0; fi < protectedFrom; ++fi) {
      const KeyFrame& f = window.frames[size_t(fi)];
      if (isMarked(f.id)) continue;
      double sumInv = 0;
      for (int k = 0; k < F; ++k) {
        const KeyFrame& other = window.frames[size_t(k)];
        if (other.id == f.id || isMarked(other.id)) continue;
        sumInv += 1.0 / (distanceBetween(f, other) + mp.distEpsilon);
      }
      const double score = std::sqrt(distanceBetween(f, latest)) * sumInv;
      if (score > bestScore) {
        bestScore = score;
        bestId = f.id;
      }
    }
    if (bestId < 0) break;
    marked.push_back(bestId);
  }

  // Preserve window order in the output.
  std::vector<int> ordered;
  for (const auto& f : window.frames)
    if (isMarked(f.id)) ordered.push_back(f.id);
  return ordered;
}

}  // namespace salvo
