#include "salvo/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "salvo/frontend.hpp"
#include "salvo/image.hpp"
#include "salvo/select.hpp"

namespace salvo {

namespace {

struct TrajectoryEntry {
  double timestamp = 0;
  int kfId = -1;
  SE3 kfFromFrame;
};

class Pipeline {
 public:
  Pipeline(const DatasetSource& ds, const RunConfig& cfg, const ClassWeights& weights)
      : ds_(ds),
        cfg_(cfg),
        weights_(weights),
        K_(ds.intrinsics),
        pc_(cfg.photo()),
        tc_(cfg.tracker()),
        trace_(cfg.trace()),
        ac_(cfg.activation()),
        mp_(cfg.margPolicy()),
        bc_(cfg.backend()),
        rng_(cfg.seed) {
    saliencyMode_ = cfg.selectionMode == "saliency";
    useSemantics_ = saliencyMode_ && ds.hasSemantics();
  }

  RunOutput run() {
    const auto start = std::chrono::steady_clock::now();
    RunOutput out;
    out.report.frameCount = ds_.frameCount();
    out.report.success = true;

    for (int i = 0; i < ds_.frameCount(); ++i) {
      if (!processFrame(i, out.report)) {
        out.report.success = false;
        break;
      }
      ++out.report.framesProcessed;
    }
    if (ds_.frameCount() == 0)
      out.report.failureReason = "warning: empty dataset, vacuous success";

    out.report.keyframes = nextKfId_;
    out.trajectory = materializeTrajectory();
    out.pointCloud = std::move(cloud_);
    out.report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

 private:
  bool processFrame(int i, RunReport& report) {
    const Image raw = ds_.loadFrame(i);
    Image img;
    if (cfg_.photometricCorrection && ds_.hasCalibration)
      img = applyPhotometricCalibration(raw, ds_.calibration);
    else
      img = raw;
    auto pyr = std::make_shared<ImagePyramid>(buildPyramid(img, cfg_.pyramidLevels));

    // Algorithm 1 runs per frame; without semantics it reduces to the raw map.
    currentSaliency_.reset();
    if (saliencyMode_ && ds_.hasSaliency()) {
      SaliencyMap sal = ds_.loadSaliency(i);
      if (useSemantics_)
        currentSaliency_ = filterSaliency(sal, ds_.loadSemantic(i), weights_);
      else
        currentSaliency_ = std::move(sal);
    }

    const double t = ds_.timestamps[size_t(i)];
    const double exposure = ds_.exposures[size_t(i)];

    if (window_.frames.empty()) {
      createFirstKeyframe(i, t, exposure, pyr, report);
      return true;
    }

    // Track against the latest keyframe from the constant-motion prediction.
    const KeyFrame& kf = window_.latest();
    const std::vector<TrackPoint> refs = trackingPoints();
    if (refs.empty()) {
      report.failureReason = "tracking lost: no reference points";
      return false;
    }
    const SE3 predicted = prevPose_ * lastRelMotion_;
    const SE3 prior = kf.pose.inverse() * predicted;
    TrackingResult tr = trackFrame(*pyr, exposure, kf, refs, prior, K_, pc_, tc_);
    if (tr.status == TrackingStatus::Lost) {
      tr = recoverTracking(*pyr, exposure, kf, refs, prior, K_, pc_, tc_);
      if (tr.status == TrackingStatus::Recovered) ++report.recoveries;
    }
    if (tr.status == TrackingStatus::Lost) {
      report.failureReason = "tracking lost at frame " + std::to_string(i);
      return false;
    }

    const SE3 framePose = kf.pose * tr.kfFromFrame;
    trajectory_.push_back({t, kf.id, tr.kfFromFrame});
    lastRelMotion_ = prevPose_.inverse() * framePose;
    prevPose_ = framePose;

    // Epipolar update of every candidate in the window.
    FrameParams fp;
    fp.pose = framePose;
    fp.affine = tr.affine;
    for (auto& host : window_.frames)
      for (auto& cand : host.candidates) traceCandidate(cand, host, *pyr, fp, K_, trace_);

    KeyframeMetrics m = keyframeMetrics(kf, tr, exposure, refs, K_);
    KeyframeMetrics normalized;
    const double flowNorm = cfg_.flowNormFactor * double(K_.width + K_.height);
    normalized.f = m.f / flowNorm;
    normalized.f_t = m.f_t / flowNorm;
    normalized.alpha = m.alpha / cfg_.brightnessNorm;
    const bool bootstrapPhase = t - startTime_ < cfg_.bootstrapSeconds;
    const bool wantKf = needNewKeyframe(normalized, cfg_.kfWeights(), cfg_.kfThreshold,
                                        bootstrapPhase, cfg_.bootstrapFactor);

    if (!bootstrapped_) return bootstrapStep(i, t, exposure, pyr, tr, framePose, wantKf, report);
    if (wantKf) return createKeyframe(i, t, exposure, pyr, tr, framePose, report);
    return true;
  }

  void createFirstKeyframe(int i, double t, double exposure,
                           std::shared_ptr<ImagePyramid> pyr, RunReport& report) {
    KeyFrame kf;
    kf.id = nextKfId_++;
    kf.timestamp = t;
    kf.pyramid = pyr;
    kf.pose = SE3();
    kf.affine = AffineBrightness{0, 0, exposure};
    window_.frames.push_back(std::move(kf));
    selectCandidates(window_.frames.back(), report);
    trajectory_.push_back({t, window_.frames.back().id, SE3()});
    prevPose_ = SE3();
    lastRelMotion_ = SE3();
    startTime_ = t;
  }

  bool bootstrapStep(int i, double t, double exposure, std::shared_ptr<ImagePyramid> pyr,
                     const TrackingResult& tr, const SE3& framePose, bool wantKf,
                     RunReport& report) {
    KeyFrame& kf0 = window_.frames.front();
    int good = 0;
    for (const auto& c : kf0.candidates) {
      if (c.dead || c.lastTrace != TraceStatus::Good || c.traceCount < ac_.minTraces) continue;
      const double mid = 0.5 * (c.idepthMin + c.idepthMax);
      if (mid > 0 && (c.idepthMax - c.idepthMin) / mid <= ac_.maxRelIntervalWidth) ++good;
    }
    const int needed = std::max(10, int(0.2 * double(kf0.candidates.size())));
    const bool enough = good >= std::min(needed, std::max(6, cfg_.nPoints / 4));
    const bool force = i - lastKfFrame_ >= 15;

    if ((wantKf || force) && enough)
      return promoteBootstrap(i, t, exposure, pyr, tr, framePose, report);
    if (i - lastKfFrame_ >= 40) {
      report.failureReason = "initialization failed: no depth convergence";
      return false;
    }
    return true;
  }

  bool promoteBootstrap(int i, double t, double exposure, std::shared_ptr<ImagePyramid> pyr,
                        const TrackingResult& tr, const SE3& framePose, RunReport& report) {
    KeyFrame kf;
    kf.id = nextKfId_++;
    kf.timestamp = t;
    kf.pyramid = pyr;
    kf.pose = framePose;
    kf.affine = tr.affine;
    window_.frames.push_back(std::move(kf));
    lastKfFrame_ = i;

    report.pointsActivated += activateCandidates(window_, cfg_.nPoints, K_, ac_);

    // Monocular gauge: normalize scene scale so the mean inverse depth is 1.
    double sum = 0;
    int n = 0;
    for (const auto& f : window_.frames)
      for (const auto& p : f.points)
        if (p.status == PointStatus::Active) {
          sum += p.idepth;
          ++n;
        }
    if (n < 5) {
      report.failureReason = "initialization failed: too few activated points";
      return false;
    }
    rescaleWorld(sum / double(n));

    const SolveReport sr = solveWindow(window_, K_, pc_, bc_);
    if (sr.failed) {
      report.failureReason = "solver failure during initialization: " + sr.failureReason;
      return false;
    }
    rejectOutliers(report);
    selectCandidates(window_.frames.back(), report);
    bootstrapped_ = true;
    resyncFromWindow();
    return true;
  }

  // Scale all idepths by 1/s and world translations by s; keeps residuals
  // unchanged while fixing mean idepth = 1.
  void rescaleWorld(double s) {
    for (auto& f : window_.frames) {
      f.pose.t *= s;
      for (auto& p : f.points) {
        p.idepth /= s;
        p.idepthVariance /= s * s;
      }
      for (auto& c : f.candidates) {
        c.idepth /= s;
        c.idepthMin /= s;
        c.idepthMax /= s;
      }
    }
    for (auto& e : trajectory_) e.kfFromFrame.t *= s;
    prevPose_.t *= s;
    lastRelMotion_.t *= s;
  }

  bool createKeyframe(int i, double t, double exposure, std::shared_ptr<ImagePyramid> pyr,
                      const TrackingResult& tr, const SE3& framePose, RunReport& report) {
    KeyFrame kf;
    kf.id = nextKfId_++;
    kf.timestamp = t;
    kf.pyramid = pyr;
    kf.pose = framePose;
    kf.affine = tr.affine;
    const int newId = kf.id;
    window_.frames.push_back(std::move(kf));
    lastKfFrame_ = i;

    // Extend observations of existing points into the new keyframe.
    int active = 0;
    for (auto& host : window_.frames) {
      if (host.id == newId) continue;
      for (auto& p : host.points) {
        if (p.status != PointStatus::Active) continue;
        ++active;
        if (project(p.u, p.v, p.idepth, host.pose, window_.frames.back().pose, K_))
          p.obsTargets.push_back(newId);
      }
    }

    report.pointsActivated += activateCandidates(window_, cfg_.nPoints - active, K_, ac_);

    const SolveReport sr = solveWindow(window_, K_, pc_, bc_);
    if (sr.failed) {
      report.failureReason = "solver failure at frame " + std::to_string(i) + ": " +
                             sr.failureReason;
      return false;
    }

    rejectOutliers(report);

    const std::vector<int> toDrop = scheduleMarginalization(window_, K_, mp_);
    if (!toDrop.empty()) {
      for (int id : toDrop) recordFinalPose(id);
      auto records = marginalize(window_, toDrop, K_, pc_);
      report.pointsMarginalized += int(records.size());
      cloud_.insert(cloud_.end(), records.begin(), records.end());
    }

    selectCandidates(window_.frames.back(), report);
    resyncFromWindow();
    return true;
  }

  // Window optimization moves keyframe poses; keep the motion model in step.
  void resyncFromWindow() {
    const KeyFrame& latest = window_.latest();
    const SE3 newPose = latest.pose;  // latest KF is the frame just processed
    prevPose_ = newPose;
  }

  void rejectOutliers(RunReport& report) {
    const double threshold = pc_.outlierEnergyPerPixel * ResidualPattern::size;
    for (auto& host : window_.frames) {
      for (auto& p : host.points) {
        if (p.status != PointStatus::Active) continue;
        std::vector<int> kept;
        for (int targetId : p.obsTargets) {
          const KeyFrame* target = window_.frameById(targetId);
          if (!target) continue;
          PatternResidual res;
          evaluatePatternResidual((*host.pyramid)[0], host.params(), (*target->pyramid)[0],
                                  target->params(), K_, p.u, p.v, p.idepth, pc_, false, res);
          if (res.valid && res.rawEnergy <= threshold)
            kept.push_back(targetId);
          else
            ++report.observationsRemoved;
        }
        p.obsTargets = std::move(kept);
        if (p.obsTargets.empty()) {
          p.status = PointStatus::Outlier;
          ++report.pointsDroppedAsOutliers;
        }
      }
      host.points.erase(std::remove_if(host.points.begin(), host.points.end(),
                                       [](const ActivePoint& p) {
                                         return p.status == PointStatus::Outlier;
                                       }),
                        host.points.end());
    }
  }

  void selectCandidates(KeyFrame& kf, RunReport& report) {
    const PyramidLevel& lvl0 = (*kf.pyramid)[0];
    const Image gradMag = gradientMagnitude(lvl0);

    SaliencyMap sal;
    if (currentSaliency_ && currentSaliency_->width() == lvl0.width() &&
        currentSaliency_->height() == lvl0.height())
      sal = *currentSaliency_;
    else
      sal.values = Image::Constant(lvl0.height(), lvl0.width(), 0.5f);

    const SelectionResult sel = selectPoints(sal, gradMag, cfg_.selection(), rng_);
    report.pointsSelected += int(sel.points.size());
    for (const auto& px : sel.points) {
      CandidatePoint c;
      c.u = px.x;
      c.v = px.y;
      c.idepth = 1.0;
      c.idepthMin = cfg_.idepthMinInit;
      c.idepthMax = cfg_.idepthMaxInit;
      kf.candidates.push_back(c);
    }
  }

  std::vector<TrackPoint> trackingPoints() const {
    std::vector<TrackPoint> refs;
    const KeyFrame& latest = window_.latest();
    if (!bootstrapped_) {
      for (const auto& c : latest.candidates) {
        if (c.dead) continue;
        refs.push_back({c.u, c.v, c.idepth});
      }
      return refs;
    }
    for (const auto& host : window_.frames) {
      for (const auto& p : host.points) {
        if (p.status != PointStatus::Active) continue;
        if (host.id == latest.id) {
          refs.push_back({p.u, p.v, p.idepth});
        } else if (auto proj = project(p.u, p.v, p.idepth, host.pose, latest.pose, K_)) {
          refs.push_back({proj->u, proj->v, proj->idepth});
        }
      }
    }
    return refs;
  }

  void recordFinalPose(int kfId) {
    const KeyFrame* f = window_.frameById(kfId);
    if (f) finalPoses_[kfId] = f->pose;
  }

  Trajectory materializeTrajectory() {
    for (const auto& f : window_.frames) finalPoses_[f.id] = f.pose;
    Trajectory traj;
    for (const auto& e : trajectory_) {
      const auto it = finalPoses_.find(e.kfId);
      const SE3 base = it != finalPoses_.end() ? it->second : SE3();
      traj.append(e.timestamp, base * e.kfFromFrame);
    }
    return traj;
  }

  const DatasetSource& ds_;
  RunConfig cfg_;
  ClassWeights weights_;
  CameraIntrinsics K_;
  PhotoConfig pc_;
  TrackerConfig tc_;
  TraceConfig trace_;
  ActivationConfig ac_;
  MarginalizationPolicy mp_;
  BackendConfig bc_;
  Rng rng_;

  bool saliencyMode_ = false;
  bool useSemantics_ = false;
  bool bootstrapped_ = false;
  int nextKfId_ = 0;
  int lastKfFrame_ = 0;
  double startTime_ = 0;
  SE3 prevPose_;
  SE3 lastRelMotion_;
  std::optional<SaliencyMap> currentSaliency_;
  WindowState window_;
  std::vector<TrajectoryEntry> trajectory_;
  std::map<int, SE3> finalPoses_;
  std::vector<MargPointRecord> cloud_;
};

}  // namespace

std::string RunReport::summary() const {
  std::ostringstream out;
  out << "frames " << framesProcessed << "/" << frameCount << ", keyframes " << keyframes
      << ", selected " << pointsSelected << ", activated " << pointsActivated
      << ", marginalized " << pointsMarginalized << ", outliers " << pointsDroppedAsOutliers
      << ", recoveries " << recoveries << ", " << (success ? "success" : "FAILED") << " ("
      << (failureReason.empty() ? "ok" : failureReason) << "), " << seconds << " s";
  return out.str();
}

RunOutput runOdometry(const DatasetSource& ds, const RunConfig& cfg,
                      const ClassWeights& classWeights) {
  cfg.validate();
  if (cfg.selectionMode == "saliency" && ds.frameCount() > 0 && !ds.hasSaliency())
    throw ConfigError("saliency mode requires sidecar saliency maps");
  Pipeline pipeline(ds, cfg, classWeights);
  return pipeline.run();
}

void exportPointCloud(const std::vector<MargPointRecord>& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write point cloud: " + path);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property float intensity\nend_header\n";
  char line[160];
  for (const auto& p : points) {
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f %.6f\n", p.world.x(), p.world.y(),
                  p.world.z(), p.intensity);
    out << line;
  }
}

std::vector<MargPointRecord> readPointCloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read point cloud: " + path);
  std::string line;
  size_t count = 0;
  while (std::getline(in, line)) {
    if (line.rfind("element vertex", 0) == 0) count = std::stoul(line.substr(15));
    if (line == "end_header") break;
  }
  std::vector<MargPointRecord> points;
  for (size_t i = 0; i < count; ++i) {
    MargPointRecord p;
    if (!(in >> p.world.x() >> p.world.y() >> p.world.z() >> p.intensity))
      throw InputError(path + ": truncated vertex list");
    points.push_back(p);
  }
  return points;
}

}  // namespace salvo
