#pragma once

#include <vector>

#include "salvo/types.hpp"

namespace salvo {

/// One pyramid level: intensity plus central-difference gradients.
struct PyramidLevel {
  Image intensity;
  Image gx;
  Image gy;

  int width() const { return int(intensity.cols()); }
  int height() const { return int(intensity.rows()); }
};

struct ImagePyramid {
  std::vector<PyramidLevel> levels;

  int numLevels() const { return int(levels.size()); }
  const PyramidLevel& operator[](int l) const { return levels[size_t(l)]; }
};

/// Central-difference gradients, one-sided at the borders.
void computeGradients(const Image& img, Image& gx, Image& gy);

/// Coarser levels are 2x2 box-filter downsamples of the previous level.
/// Throws ConfigError when the image cannot support the requested depth.
ImagePyramid buildPyramid(const Image& image, int numLevels);

/// Squared gradient magnitude grid of the finest level (selection input).
Image gradientMagnitude(const PyramidLevel& level);

}  // namespace salvo
