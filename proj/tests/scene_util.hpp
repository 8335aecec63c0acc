#pragma once

#include <memory>
#include <vector>

#include "salvo/pyramid.hpp"
#include "salvo/scene.hpp"
#include "salvo/window.hpp"

// Builders that turn rendered synthetic frames into keyframes/windows with
// exact ground-truth poses and inverse depths, for solver and energy tests.
namespace testutil {

inline salvo::KeyFrame keyframeFromRender(const salvo::SyntheticScene& scene, int frame,
                                          int id, int pyramidLevels = 3) {
  const salvo::FrameRender r = scene.renderFrame(frame);
  salvo::KeyFrame kf;
  kf.id = id;
  kf.timestamp = double(frame) / scene.spec.fps;
  kf.pyramid =
      std::make_shared<salvo::ImagePyramid>(salvo::buildPyramid(r.image, pyramidLevels));
  kf.pose = scene.poseAt(frame);
  kf.affine = salvo::AffineBrightness{0, 0, r.exposure};
  return kf;
}

/// Window with keyframes at the given scene frames; points sampled on a grid
/// wherever the finest-level gradient is strong, with exact inverse depths.
inline salvo::WindowState windowFromScene(const salvo::SyntheticScene& scene,
                                          const std::vector<int>& frames, int gridStep = 24,
                                          double minGrad = 6.0, int maxPointsPerFrame = 1000) {
  using namespace salvo;
  WindowState window;
  std::vector<FrameRender> renders;
  for (size_t i = 0; i < frames.size(); ++i) {
    renders.push_back(scene.renderFrame(frames[i]));
    window.frames.push_back(keyframeFromRender(scene, frames[i], int(i)));
  }
  const CameraIntrinsics& K = scene.spec.camera;

  for (size_t fi = 0; fi < frames.size(); ++fi) {
    KeyFrame& host = window.frames[fi];
    const FrameRender& r = renders[fi];
    const PyramidLevel& lvl = (*host.pyramid)[0];
    int added = 0;
    for (int y = gridStep; y < K.height - gridStep && added < maxPointsPerFrame; y += gridStep)
      for (int x = gridStep; x < K.width - gridStep && added < maxPointsPerFrame;
           x += gridStep) {
        const double g = std::hypot(double(lvl.gx(y, x)), double(lvl.gy(y, x)));
        if (g < minGrad) continue;
        ActivePoint p;
        p.u = x;
        p.v = y;
        p.idepth = 1.0 / double(r.depth(y, x));
        p.idepthVariance = 1e-4;
        p.hostIntensity = double(lvl.intensity(y, x));
        for (size_t ti = 0; ti < frames.size(); ++ti) {
          if (ti == fi) continue;
          if (project(p.u, p.v, p.idepth, host.pose, window.frames[ti].pose, K))
            p.obsTargets.push_back(int(ti));
        }
        if (p.obsTargets.empty()) continue;
        host.points.push_back(std::move(p));
        ++added;
      }
  }
  return window;
}

}  // namespace testutil
