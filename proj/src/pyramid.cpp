#include "salvo/pyramid.hpp"

#include <cmath>

namespace salvo {

void computeGradients(const Image& img, Image& gx, Image& gy) {
  const int h = int(img.rows());
  const int w = int(img.cols());
  gx.resize(h, w);
  gy.resize(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (w == 1)
        gx(y, x) = 0.f;
      else if (x == 0)
        gx(y, x) = img(y, 1) - img(y, 0);
      else if (x == w - 1)
        gx(y, x) = img(y, w - 1) - img(y, w - 2);
      else
        gx(y, x) = 0.5f * (img(y, x + 1) - img(y, x - 1));

      if (h == 1)
        gy(y, x) = 0.f;
      else if (y == 0)
        gy(y, x) = img(1, x) - img(0, x);
      else if (y == h - 1)
        gy(y, x) = img(h - 1, x) - img(h - 2, x);
      else
        gy(y, x) = 0.5f * (img(y + 1, x) - img(y - 1, x));
    }
  }
}

ImagePyramid buildPyramid(const Image& image, int numLevels) {
  if (numLevels < 1) throw ConfigError("buildPyramid: numLevels must be >= 1");
  const long minDim = 1L << (numLevels - 1);
  if (image.cols() < minDim || image.rows() < minDim)
    throw ConfigError("buildPyramid: image too small for " + std::to_string(numLevels) +
                      " levels");

  ImagePyramid pyr;
  pyr.levels.resize(size_t(numLevels));
  pyr.levels[0].intensity = image;
  for (int l = 1; l < numLevels; ++l) {
    const Image& prev = pyr.levels[size_t(l - 1)].intensity;
    const int w = int(prev.cols()) / 2;
    const int h = int(prev.rows()) / 2;
    Image& cur = pyr.levels[size_t(l)].intensity;
    cur.resize(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        cur(y, x) = 0.25f * (prev(2 * y, 2 * x) + prev(2 * y, 2 * x + 1) +
                             prev(2 * y + 1, 2 * x) + prev(2 * y + 1, 2 * x + 1));
  }
  for (auto& lvl : pyr.levels) computeGradients(lvl.intensity, lvl.gx, lvl.gy);
  return pyr;
}

Image gradientMagnitude(const PyramidLevel& level) {
  return (level.gx.square() + level.gy.square()).sqrt();
}

}  // namespace salvo
