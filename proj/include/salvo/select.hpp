#pragma once

#include <vector>

#include "salvo/rng.hpp"
#include "salvo/saliency.hpp"
#include "salvo/types.hpp"

namespace salvo {

struct PixelCoord {
  int x = 0, y = 0;
  bool operator==(const PixelCoord&) const = default;
};

struct PatchBounds {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

/// K x K grid of patches tiling the image, with the per-patch sampling weight
/// (median filtered saliency + smoothing term) and region-adaptive gradient
/// threshold (median gradient magnitude + global constant).
struct PatchGrid {
  std::vector<PatchBounds> patches;
  std::vector<double> samplingWeights;
  std::vector<double> gradientThresholds;
};

enum class SelectionMode { Saliency, Uniform };

struct SelectionConfig {
  int nDesired = 2000;        // N_des
  int gridK = 8;              // patches per image side
  int blockD = 4;             // pass-1 block side in pixels
  double sSmooth = 0.05;      // Laplacian smoothing term
  double gTh = 7.0;           // global gradient constant
  double decayPass2 = 0.75;   // pass-2 threshold multiplier
  double decayPass3 = 0.5;    // pass-3 threshold multiplier
  int drawBudgetFactor = 10;  // draws per round = factor * |patches|
  SelectionMode mode = SelectionMode::Saliency;
};

struct SelectionResult {
  std::vector<PixelCoord> points;
  bool shortfall = false;
  std::vector<int> perPatchCounts;  // indexed like PatchGrid::patches
};

/// Per-patch medians of filtered saliency and gradient magnitude.
PatchGrid buildPatchGrid(const SaliencyMap& sal, const Image& gradMag,
                         const SelectionConfig& cfg);

/// P_S(M_i) = sw_i / sum_m sw_m.
std::vector<double> samplingDistribution(const PatchGrid& grid);

/// Three-pass gradient selection inside one patch: d x d blocks above the
/// threshold, then 2d x 2d blocks above threshold*decay2 where pass 1 found
/// nothing, then 4d x 4d blocks above threshold*decay3 still empty.
std::vector<PixelCoord> selectInPatch(const PatchBounds& patch, const Image& gradMag,
                                      double threshold, int d, double decay2, double decay3);

/// Draws patches from the sampling distribution (uniform in Uniform mode) and
/// runs the three-pass selection until nDesired points accumulate or the draw
/// budget is exhausted. Deterministic for a fixed rng state.
SelectionResult selectPoints(const SaliencyMap& sal, const Image& gradMag,
                             const SelectionConfig& cfg, Rng& rng);

}  // namespace salvo
