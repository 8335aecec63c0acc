#include "salvo/window.hpp"

namespace salvo {

double totalEnergy(const WindowState& window, const CameraIntrinsics& K, const PhotoConfig& pc) {
  double energy = 0;
  for (const auto& host : window.frames) {
    for (const auto& p : host.points) {
      if (p.status != PointStatus::Active) continue;
      for (int targetId : p.obsTargets) {
        const KeyFrame* target = window.frameById(targetId);
        if (!target) continue;
        PatternResidual res;
        evaluatePatternResidual((*host.pyramid)[0], host.params(), (*target->pyramid)[0],
                                target->params(), K, p.u, p.v, p.idepth, pc, false, res);
        if (res.valid) energy += res.energy;
      }
    }
  }
  return energy;
}

}  // namespace salvo
