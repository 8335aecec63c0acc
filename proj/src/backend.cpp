#include "salvo/backend.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace salvo {

namespace {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat98 = Eigen::Matrix<double, 9, 8>;

Vec8 priorDiff(const KeyFrame& frame, const SE3& poseLin, const Eigen::Vector2d& affineLin) {
  Vec8 d;
  d.head<6>() = SE3::Log(poseLin.inverse() * frame.pose);
  d[6] = frame.affine.a - affineLin[0];
  d[7] = frame.affine.b - affineLin[1];
  return d;
}

// Moore-Penrose inverse via eigendecomposition; the eliminated blocks are
// small and may be rank deficient.
MatX pseudoInverse(const MatX& A, double relTol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (A + A.transpose()));
  const VecX& vals = eig.eigenvalues();
  const double cutoff = relTol * std::max(vals.cwiseAbs().maxCoeff(), 1e-300);
  VecX inv = VecX::Zero(vals.size());
  for (int i = 0; i < vals.size(); ++i)
    if (vals[i] > cutoff) inv[i] = 1.0 / vals[i];
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

LinearSystem linearize(const WindowState& window, const CameraIntrinsics& K,
                       const PhotoConfig& pc) {
  LinearSystem sys;
  const int F = int(window.frames.size());
  for (const auto& f : window.frames) sys.frameIds.push_back(f.id);
  for (int fi = 0; fi < F; ++fi)
    for (int pi = 0; pi < int(window.frames[size_t(fi)].points.size()); ++pi)
      if (window.frames[size_t(fi)].points[size_t(pi)].status == PointStatus::Active)
        sys.points.push_back({fi, pi});

  const int FD = 8 * F;
  const int P = int(sys.points.size());
  sys.Hff = MatX::Zero(FD, FD);
  sys.Hfp = MatX::Zero(FD, P);
  sys.Hpp = VecX::Zero(P);
  sys.gf = VecX::Zero(FD);
  sys.gp = VecX::Zero(P);
  sys.frozen.assign(size_t(FD), 0);
  for (int i = 0; i < 8 && i < FD; ++i) sys.frozen[size_t(i)] = 1;  // oldest KF fixes the gauge

  for (int pcol = 0; pcol < P; ++pcol) {
    const PointRef ref = sys.points[size_t(pcol)];
    const KeyFrame& host = window.frames[size_t(ref.frameIdx)];
    const ActivePoint& pt = host.points[size_t(ref.pointIdx)];
    for (int targetId : pt.obsTargets) {
      const int ti = window.indexById(targetId);
      if (ti < 0) continue;
      const KeyFrame& target = window.frames[size_t(ti)];

      PatternResidual res;
      evaluatePatternResidual((*host.pyramid)[0], host.params(), (*target.pyramid)[0],
                              target.params(), K, pt.u, pt.v, pt.idepth, pc, true, res);
      if (!res.valid) continue;
      sys.energy += res.energy;

      Mat98 Jh, Jt;
      Jh.leftCols<6>() = res.dHostPose;
      Jh.col(6) = res.dAHost;
      Jh.col(7) = res.dBHost;
      Jt.leftCols<6>() = res.dTargetPose;
      Jt.col(6) = res.dATarget;
      Jt.col(7) = res.dBTarget;

      PatternResidual::Vec9 w;
      for (int k = 0; k < 9; ++k)
        w[k] = res.weights[k] * huberWeight(res.residuals[k], pc.huberGamma);

      const Mat98 WJh = w.asDiagonal() * Jh;
      const Mat98 WJt = w.asDiagonal() * Jt;
      const PatternResidual::Vec9 WJp = w.cwiseProduct(res.dIdepth);

      const int hb = 8 * ref.frameIdx;
      const int tb = 8 * ti;
      sys.Hff.block<8, 8>(hb, hb) += Jh.transpose() * WJh;
      sys.Hff.block<8, 8>(tb, tb) += Jt.transpose() * WJt;
      sys.Hff.block<8, 8>(hb, tb) += Jh.transpose() * WJt;
      sys.Hff.block<8, 8>(tb, hb) += Jt.transpose() * WJh;
      sys.Hfp.block<8, 1>(hb, pcol) += Jh.transpose() * WJp;
      sys.Hfp.block<8, 1>(tb, pcol) += Jt.transpose() * WJp;
      sys.Hpp[pcol] += res.dIdepth.dot(WJp);
      sys.gf.segment<8>(hb) += WJh.transpose() * res.residuals;
      sys.gf.segment<8>(tb) += WJt.transpose() * res.residuals;
      sys.gp[pcol] += WJp.dot(res.residuals);
    }
  }

  const MargPrior& prior = window.prior;
  for (size_t a = 0; a < prior.frameIds.size(); ++a) {
    const int ia = window.indexById(prior.frameIds[a]);
    if (ia < 0) continue;
    const Vec8 da = priorDiff(window.frames[size_t(ia)], prior.poseLin[a], prior.affineLin[a]);
    Vec8 g = prior.b.segment<8>(long(8 * a));
    for (size_t c = 0; c < prior.frameIds.size(); ++c) {
      const int ic = window.indexById(prior.frameIds[c]);
      if (ic < 0) continue;
      const Vec8 dc = priorDiff(window.frames[size_t(ic)], prior.poseLin[c], prior.affineLin[c]);
      const MatX Hac = prior.H.block<8, 8>(long(8 * a), long(8 * c));
      sys.Hff.block<8, 8>(8 * ia, 8 * ic) += Hac;
      g += Hac * dc;
      sys.energy += 0.5 * da.dot(Hac * dc);
    }
    sys.energy += prior.b.segment<8>(long(8 * a)).dot(da);
    sys.gf.segment<8>(8 * ia) += g;
  }

  return sys;
}

StepResult computeGnStep(const LinearSystem& sys, double lambda, bool useSchur) {
  StepResult out;
  const int FD = sys.frameDim();
  const int P = sys.pointDim();

  MatX Hffd = sys.Hff;
  for (int i = 0; i < FD; ++i) Hffd(i, i) = Hffd(i, i) * (1.0 + lambda) + 1e-10;
  VecX Hppd = sys.Hpp * (1.0 + lambda) + VecX::Constant(P, 1e-10);

  std::vector<int> freeIdx;
  for (int i = 0; i < FD; ++i)
    if (!sys.frozen[size_t(i)]) freeIdx.push_back(i);
  const int NF = int(freeIdx.size());

  out.deltaFrames = VecX::Zero(FD);
  out.deltaPoints = VecX::Zero(P);

  if (useSchur) {
    const VecX HppInv = Hppd.cwiseInverse();
    const MatX S = Hffd - sys.Hfp * HppInv.asDiagonal() * sys.Hfp.transpose();
    const VecX rhs = -sys.gf + sys.Hfp * (sys.gp.cwiseProduct(HppInv));

    MatX Sfree(NF, NF);
    VecX rfree(NF);
    for (int r = 0; r < NF; ++r) {
      rfree[r] = rhs[freeIdx[size_t(r)]];
      for (int c = 0; c < NF; ++c) Sfree(r, c) = S(freeIdx[size_t(r)], freeIdx[size_t(c)]);
    }
    if (NF > 0) {
      Eigen::LDLT<MatX> ldlt(Sfree);
      if (ldlt.info() != Eigen::Success) return out;
      const VecX df = ldlt.solve(rfree);
      if (!df.allFinite()) return out;
      for (int r = 0; r < NF; ++r) out.deltaFrames[freeIdx[size_t(r)]] = df[r];
    }
    out.deltaPoints =
        -(sys.gp + sys.Hfp.transpose() * out.deltaFrames).cwiseProduct(Hppd.cwiseInverse());
  } else {
    const int N = FD + P;
    MatX H = MatX::Zero(N, N);
    H.topLeftCorner(FD, FD) = Hffd;
    H.topRightCorner(FD, P) = sys.Hfp;
    H.bottomLeftCorner(P, FD) = sys.Hfp.transpose();
    H.bottomRightCorner(P, P) = MatX(Hppd.asDiagonal());
    VecX g(N);
    g.head(FD) = sys.gf;
    g.tail(P) = sys.gp;

    std::vector<int> freeAll = freeIdx;
    for (int p = 0; p < P; ++p) freeAll.push_back(FD + p);
    const int NA = int(freeAll.size());
    MatX Hfree(NA, NA);
    VecX gfree(NA);
    for (int r = 0; r < NA; ++r) {
      gfree[r] = g[freeAll[size_t(r)]];
      for (int c = 0; c < NA; ++c) Hfree(r, c) = H(freeAll[size_t(r)], freeAll[size_t(c)]);
    }
    Eigen::LDLT<MatX> ldlt(Hfree);
    if (ldlt.info() != Eigen::Success) return out;
    const VecX d = ldlt.solve(-gfree);
    if (!d.allFinite()) return out;
    for (int r = 0; r < NA; ++r) {
      const int idx = freeAll[size_t(r)];
      if (idx < FD)
        out.deltaFrames[idx] = d[r];
      else
        out.deltaPoints[idx - FD] = d[r];
    }
  }
  out.ok = out.deltaFrames.allFinite() && out.deltaPoints.allFinite();
  return out;
}

double priorEnergy(const WindowState& window) {
  const MargPrior& prior = window.prior;
  if (prior.empty()) return 0;
  VecX d = VecX::Zero(prior.dim());
  for (size_t a = 0; a < prior.frameIds.size(); ++a) {
    const KeyFrame* f = window.frameById(prior.frameIds[a]);
    if (!f) continue;
    d.segment<8>(long(8 * a)) = priorDiff(*f, prior.poseLin[a], prior.affineLin[a]);
  }
  return 0.5 * d.dot(prior.H * d) + prior.b.dot(d);
}

double windowObjective(const WindowState& window, const CameraIntrinsics& K,
                       const PhotoConfig& pc) {
  return totalEnergy(window, K, pc) + priorEnergy(window);
}

void applyStep(WindowState& window, const LinearSystem& sys, const StepResult& step) {
  for (size_t fi = 0; fi < window.frames.size(); ++fi) {
    KeyFrame& f = window.frames[fi];
    const Vec6 d = step.deltaFrames.segment<6>(long(8 * fi));
    f.pose = f.pose.boxplus(d);
    f.affine.a += step.deltaFrames[long(8 * fi + 6)];
    f.affine.b += step.deltaFrames[long(8 * fi + 7)];
  }
  for (size_t pi = 0; pi < sys.points.size(); ++pi) {
    const PointRef ref = sys.points[pi];
    ActivePoint& p = window.frames[size_t(ref.frameIdx)].points[size_t(ref.pointIdx)];
    p.idepth = std::clamp(p.idepth + step.deltaPoints[long(pi)], 1e-5, 1e4);
  }
}

SolveReport solveWindow(WindowState& window, const CameraIntrinsics& K, const PhotoConfig& pc,
                        const BackendConfig& cfg) {
  SolveReport report;
  if (window.frames.size() < 2) return report;

  double energy = windowObjective(window, K, pc);
  report.initialEnergy = energy;
  report.energyTrace.push_back(energy);
  if (!std::isfinite(energy)) {
    report.failed = true;
    report.failureReason = "non-finite energy";
    report.finalEnergy = energy;
    return report;
  }

  double lambda = cfg.initialLambda;
  for (int iter = 0; iter < cfg.maxIters; ++iter) {
    LinearSystem sys = linearize(window, K, pc);
    const int freeze = std::min(cfg.freezeFrames, int(window.frames.size()));
    for (int fi = 0; fi < freeze; ++fi)
      for (int k = 0; k < 8; ++k) sys.frozen[size_t(8 * fi + k)] = 1;
    bool accepted = false;
    bool anyStepOk = false;
    double stepNorm = 0, relDecrease = 0;

    for (int rejects = 0; rejects <= cfg.maxRejects; ++rejects) {
      const StepResult step = computeGnStep(sys, lambda, true);
      if (!step.ok) {
        lambda *= 10;
        continue;
      }
      anyStepOk = true;
      WindowState trial = window;
      applyStep(trial, sys, step);
      const double trialEnergy = windowObjective(trial, K, pc);
      if (std::isfinite(trialEnergy) && trialEnergy <= energy * (1.0 + 1e-12)) {
        relDecrease = (energy - trialEnergy) / std::max(energy, 1e-12);
        stepNorm = std::sqrt(step.deltaFrames.squaredNorm() + step.deltaPoints.squaredNorm());
        window = std::move(trial);
        energy = trialEnergy;
        report.energyTrace.push_back(energy);
        lambda = std::max(lambda * 0.5, 1e-9);
        accepted = true;
        break;
      }
      lambda *= 10;
    }
    ++report.iterations;

    if (!accepted) {
      if (!anyStepOk) {
        report.failed = true;
        report.failureReason = "indefinite reduced system after max damping";
      }
      break;  // stuck at a (local) minimum
    }
    if (stepNorm < cfg.stepNormTol || relDecrease < cfg.relEnergyTol) break;
  }
  report.finalEnergy = energy;
  if (!std::isfinite(energy)) {
    report.failed = true;
    report.failureReason = "non-finite energy";
  }
  return report;
}

std::vector<MargPointRecord> marginalize(WindowState& window,
                                         const std::vector<int>& frameIdsOut,
                                         const std::vector<PointRef>& pointsOut,
                                         const CameraIntrinsics& K, const PhotoConfig& pc) {
  std::vector<MargPointRecord> records;
  if (frameIdsOut.empty() && pointsOut.empty()) return records;

  auto isOut = [&](int id) {
    return std::find(frameIdsOut.begin(), frameIdsOut.end(), id) != frameIdsOut.end();
  };

  // Surviving points lose residuals that target outgoing frames.
  for (auto& f : window.frames) {
    if (isOut(f.id)) continue;
    for (auto& p : f.points)
      p.obsTargets.erase(std::remove_if(p.obsTargets.begin(), p.obsTargets.end(), isOut),
                         p.obsTargets.end());
  }

  const int F = int(window.frames.size());
  const int FD = 8 * F;
  MatX Hm = MatX::Zero(FD, FD);
  VecX bm = VecX::Zero(FD);

  // Outgoing points: those hosted in outgoing frames plus any named
  // explicitly. Each inverse depth is eliminated into the frame system, or the
  // point is dropped when it carries too little information.
  std::vector<PointRef> outPoints = pointsOut;
  for (int fi = 0; fi < F; ++fi) {
    const KeyFrame& host = window.frames[size_t(fi)];
    if (!isOut(host.id)) continue;
    for (int pi = 0; pi < int(host.points.size()); ++pi)
      if (host.points[size_t(pi)].status == PointStatus::Active)
        outPoints.push_back({fi, pi});
  }

  for (const PointRef ref : outPoints) {
    KeyFrame& host = window.frames[size_t(ref.frameIdx)];
    {
      ActivePoint& pt = host.points[size_t(ref.pointIdx)];
      if (pt.status != PointStatus::Active) continue;
      const int fi = ref.frameIdx;

      MatX Hfp_p = MatX::Zero(FD, 1);
      MatX Hff_p = MatX::Zero(FD, FD);
      VecX gf_p = VecX::Zero(FD);
      double hpp = 0, gp = 0;
      int numObs = 0;

      for (int targetId : pt.obsTargets) {
        const int ti = window.indexById(targetId);
        if (ti < 0) continue;
        const KeyFrame& target = window.frames[size_t(ti)];
        PatternResidual res;
        evaluatePatternResidual((*host.pyramid)[0], host.params(), (*target.pyramid)[0],
                                target.params(), K, pt.u, pt.v, pt.idepth, pc, true, res);
        if (!res.valid) continue;
        ++numObs;

        Mat98 Jh, Jt;
        Jh.leftCols<6>() = res.dHostPose;
        Jh.col(6) = res.dAHost;
        Jh.col(7) = res.dBHost;
        Jt.leftCols<6>() = res.dTargetPose;
        Jt.col(6) = res.dATarget;
        Jt.col(7) = res.dBTarget;
        PatternResidual::Vec9 w;
        for (int k = 0; k < 9; ++k)
          w[k] = res.weights[k] * huberWeight(res.residuals[k], pc.huberGamma);
        const Mat98 WJh = w.asDiagonal() * Jh;
        const Mat98 WJt = w.asDiagonal() * Jt;
        const PatternResidual::Vec9 WJp = w.cwiseProduct(res.dIdepth);

        const int hb = 8 * fi;
        const int tb = 8 * ti;
        Hff_p.block<8, 8>(hb, hb) += Jh.transpose() * WJh;
        Hff_p.block<8, 8>(tb, tb) += Jt.transpose() * WJt;
        Hff_p.block<8, 8>(hb, tb) += Jh.transpose() * WJt;
        Hff_p.block<8, 8>(tb, hb) += Jt.transpose() * WJh;
        Hfp_p.block<8, 1>(hb, 0) += Jh.transpose() * WJp;
        Hfp_p.block<8, 1>(tb, 0) += Jt.transpose() * WJp;
        hpp += res.dIdepth.dot(WJp);
        gf_p.segment<8>(hb) += WJh.transpose() * res.residuals;
        gf_p.segment<8>(tb) += WJt.transpose() * res.residuals;
        gp += WJp.dot(res.residuals);
      }

      // "Observed >= 2 times" counts the host view, so one target residual
      // is already enough information to keep.
      if (numObs < 1 || hpp < 1e-12) {
        pt.status = PointStatus::Outlier;  // dropped, not absorbed
        continue;
      }
      Hm += Hff_p - (Hfp_p * Hfp_p.transpose()) / hpp;
      bm += gf_p - Hfp_p.col(0) * (gp / hpp);
      pt.status = PointStatus::Marginalized;
      records.push_back(
          {host.pose * (K.backproject(pt.u, pt.v) / pt.idepth), pt.hostIntensity});
    }
  }

  // Fold in the existing prior, re-centered at the current state.
  const MargPrior& old = window.prior;
  for (size_t a = 0; a < old.frameIds.size(); ++a) {
    const int ia = window.indexById(old.frameIds[a]);
    if (ia < 0) continue;
    Vec8 g = old.b.segment<8>(long(8 * a));
    for (size_t c = 0; c < old.frameIds.size(); ++c) {
      const int ic = window.indexById(old.frameIds[c]);
      if (ic < 0) continue;
      const Vec8 dc =
          priorDiff(window.frames[size_t(ic)], old.poseLin[c], old.affineLin[c]);
      Hm.block<8, 8>(8 * ia, 8 * ic) += old.H.block<8, 8>(long(8 * a), long(8 * c));
      g += old.H.block<8, 8>(long(8 * a), long(8 * c)) * dc;
    }
    bm.segment<8>(8 * ia) += g;
  }

  // Schur-eliminate the outgoing frames' parameters.
  std::vector<int> keepIdx, outIdx;
  std::vector<int> keepFrames;
  for (int fi = 0; fi < F; ++fi) {
    const bool out = isOut(window.frames[size_t(fi)].id);
    for (int k = 0; k < 8; ++k) (out ? outIdx : keepIdx).push_back(8 * fi + k);
    if (!out) keepFrames.push_back(fi);
  }

  const int NK = int(keepIdx.size());
  const int NO = int(outIdx.size());
  MatX Hkk(NK, NK), Hko(NK, NO), Hoo(NO, NO);
  VecX bk(NK), bo(NO);
  for (int r = 0; r < NK; ++r) {
    bk[r] = bm[keepIdx[size_t(r)]];
    for (int c = 0; c < NK; ++c) Hkk(r, c) = Hm(keepIdx[size_t(r)], keepIdx[size_t(c)]);
    for (int c = 0; c < NO; ++c) Hko(r, c) = Hm(keepIdx[size_t(r)], outIdx[size_t(c)]);
  }
  for (int r = 0; r < NO; ++r) {
    bo[r] = bm[outIdx[size_t(r)]];
    for (int c = 0; c < NO; ++c) Hoo(r, c) = Hm(outIdx[size_t(r)], outIdx[size_t(c)]);
  }

  MatX Hnew;
  VecX bnew;
  if (NO == 0) {
    Hnew = Hkk;
    bnew = bk;
  } else {
    const MatX HooInv = pseudoInverse(Hoo);
    Hnew = Hkk - Hko * HooInv * Hko.transpose();
    bnew = bk - Hko * HooInv * bo;
  }
  Hnew = 0.5 * (Hnew + Hnew.transpose());

  // Clip tiny negative eigenvalues so the prior stays PSD over repeated passes.
  {
    Eigen::SelfAdjointEigenSolver<MatX> eig(Hnew);
    if (eig.eigenvalues().size() > 0 && eig.eigenvalues().minCoeff() < 0) {
      VecX vals = eig.eigenvalues().cwiseMax(0.0);
      Hnew = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
      Hnew = 0.5 * (Hnew + Hnew.transpose());
    }
  }

  MargPrior next;
  next.H = Hnew;
  next.b = bnew;
  for (int fi : keepFrames) {
    const KeyFrame& f = window.frames[size_t(fi)];
    next.frameIds.push_back(f.id);
    next.poseLin.push_back(f.pose);
    next.affineLin.push_back(Eigen::Vector2d(f.affine.a, f.affine.b));
  }
  window.prior = std::move(next);

  window.frames.erase(std::remove_if(window.frames.begin(), window.frames.end(),
                                     [&](const KeyFrame& f) { return isOut(f.id); }),
                      window.frames.end());
  for (auto& f : window.frames)
    f.points.erase(std::remove_if(f.points.begin(), f.points.end(),
                                  [](const ActivePoint& p) {
                                    return p.status != PointStatus::Active;
                                  }),
                   f.points.end());
  return records;
}

}  // namespace salvo
