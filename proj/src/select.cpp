#include "salvo/select.hpp"

#include <algorithm>

namespace salvo {

namespace {

std::vector<double> patchValues(const PatchBounds& p, const Image& grid) {
  std::vector<double> vals;
  vals.reserve(size_t(p.width()) * size_t(p.height()));
  for (int y = p.y0; y < p.y1; ++y)
    for (int x = p.x0; x < p.x1; ++x) vals.push_back(double(grid(y, x)));
  return vals;
}

// Argmax-gradient pixel of a block; emits it when the magnitude exceeds th.
bool selectInBlock(int bx0, int by0, int bx1, int by1, const Image& gradMag, double th,
                   PixelCoord& out) {
  double best = -1.0;
  for (int y = by0; y < by1; ++y)
    for (int x = bx0; x < bx1; ++x) {
      double g = double(gradMag(y, x));
      if (g > best) {
        best = g;
        out = {x, y};
      }
    }
  return best > th;
}

}  // namespace

PatchGrid buildPatchGrid(const SaliencyMap& sal, const Image& gradMag,
                         const SelectionConfig& cfg) {
  if (sal.width() != int(gradMag.cols()) || sal.height() != int(gradMag.rows()))
    throw InputError("buildPatchGrid: saliency/gradient dimension mismatch");
  const int K = cfg.gridK;
  const int w = sal.width();
  const int h = sal.height();

  PatchGrid grid;
  grid.patches.reserve(size_t(K) * size_t(K));
  for (int gy = 0; gy < K; ++gy)
    for (int gx = 0; gx < K; ++gx) {
      PatchBounds b;
      b.x0 = gx * w / K;
      b.x1 = (gx + 1) * w / K;
      b.y0 = gy * h / K;
      b.y1 = (gy + 1) * h / K;
      grid.patches.push_back(b);
    }

  grid.samplingWeights.reserve(grid.patches.size());
  grid.gradientThresholds.reserve(grid.patches.size());
  for (const auto& p : grid.patches) {
    grid.samplingWeights.push_back(medianOf(patchValues(p, sal.values)) + cfg.sSmooth);
    grid.gradientThresholds.push_back(medianOf(patchValues(p, gradMag)) + cfg.gTh);
  }
  return grid;
}

std::vector<double> samplingDistribution(const PatchGrid& grid) {
  double sum = 0;
  for (double w : grid.samplingWeights) sum += w;
  std::vector<double> p(grid.samplingWeights.size());
  for (size_t i = 0; i < p.size(); ++i) p[i] = grid.samplingWeights[i] / sum;
  return p;
}

std::vector<PixelCoord> selectInPatch(const PatchBounds& patch, const Image& gradMag,
                                      double threshold, int d, double decay2, double decay3) {
  std::vector<PixelCoord> selected;
  const int w = patch.width();
  const int h = patch.height();
  if (w <= 0 || h <= 0) return selected;

  const int bw = (w + d - 1) / d;  // d-block count per axis, last block clamped
  const int bh = (h + d - 1) / d;
  std::vector<uint8_t> dBlockHasPoint(size_t(bw) * size_t(bh), 0);

  auto blockBounds = [&](int bx, int by, int side, int& x0, int& y0, int& x1, int& y1) {
    x0 = patch.x0 + bx * side;
    y0 = patch.y0 + by * side;
    x1 = std::min(x0 + side, patch.x1);
    y1 = std::min(y0 + side, patch.y1);
  };
  auto markDBlocks = [&](int px, int py) {
    dBlockHasPoint[size_t((py - patch.y0) / d) * size_t(bw) + size_t((px - patch.x0) / d)] = 1;
  };
  auto regionEmpty = [&](int x0, int y0, int x1, int y1) {
    for (int by = (y0 - patch.y0) / d; by <= (y1 - 1 - patch.y0) / d; ++by)
      for (int bx = (x0 - patch.x0) / d; bx <= (x1 - 1 - patch.x0) / d; ++bx)
        if (dBlockHasPoint[size_t(by) * size_t(bw) + size_t(bx)]) return false;
    return true;
  };

  // Pass 1: one argmax pixel per d x d block above the full threshold.
  for (int by = 0; by < bh; ++by)
    for (int bx = 0; bx < bw; ++bx) {
      int x0, y0, x1, y1;
      blockBounds(bx, by, d, x0, y0, x1, y1);
      PixelCoord pt;
      if (selectInBlock(x0, y0, x1, y1, gradMag, threshold, pt)) {
        selected.push_back(pt);
        markDBlocks(pt.x, pt.y);
      }
    }

  // Pass 2: 2d x 2d blocks that stayed empty, weaker threshold.
  const int bw2 = (w + 2 * d - 1) / (2 * d);
  const int bh2 = (h + 2 * d - 1) / (2 * d);
  for (int by = 0; by < bh2; ++by)
    for (int bx = 0; bx < bw2; ++bx) {
      int x0, y0, x1, y1;
      blockBounds(bx, by, 2 * d, x0, y0, x1, y1);
      if (!regionEmpty(x0, y0, x1, y1)) continue;
      PixelCoord pt;
      if (selectInBlock(x0, y0, x1, y1, gradMag, threshold * decay2, pt)) {
        selected.push_back(pt);
        markDBlocks(pt.x, pt.y);
      }
    }

  // Pass 3: 4d x 4d blocks still empty, much weaker threshold.
  const int bw4 = (w + 4 * d - 1) / (4 * d);
  const int bh4 = (h + 4 * d - 1) / (4 * d);
  for (int by = 0; by < bh4; ++by)
    for (int bx = 0; bx < bw4; ++bx) {
      int x0, y0, x1, y1;
      blockBounds(bx, by, 4 * d, x0, y0, x1, y1);
      if (!regionEmpty(x0, y0, x1, y1)) continue;
      PixelCoord pt;
      if (selectInBlock(x0, y0, x1, y1, gradMag, threshold * decay3, pt)) {
        selected.push_back(pt);
        markDBlocks(pt.x, pt.y);
      }
    }

  return selected;
}

SelectionResult selectPoints(const SaliencyMap& sal, const Image& gradMag,
                             const SelectionConfig& cfg, Rng& rng) {
  PatchGrid grid = buildPatchGrid(sal, gradMag, cfg);
  std::vector<double> probs = samplingDistribution(grid);
  if (cfg.mode == SelectionMode::Uniform)
    std::fill(probs.begin(), probs.end(), 1.0 / double(probs.size()));

  SelectionResult result;
  result.perPatchCounts.assign(grid.patches.size(), 0);
  std::vector<uint8_t> processed(grid.patches.size(), 0);
  size_t processedCount = 0;

  const long budget = long(cfg.drawBudgetFactor) * long(grid.patches.size());
  long draws = 0;
  while (int(result.points.size()) < cfg.nDesired && draws < budget &&
         processedCount < grid.patches.size()) {
    ++draws;
    const size_t i = sampleDiscrete(probs, rng);
    if (processed[i]) continue;  // redrawn; with replacement across iterations
    processed[i] = 1;
    ++processedCount;
    auto pts = selectInPatch(grid.patches[i], gradMag, grid.gradientThresholds[i], cfg.blockD,
                             cfg.decayPass2, cfg.decayPass3);
    result.perPatchCounts[i] = int(pts.size());
    result.points.insert(result.points.end(), pts.begin(), pts.end());
  }
  result.shortfall = int(result.points.size()) < cfg.nDesired;
  return result;
}

}  // namespace salvo
