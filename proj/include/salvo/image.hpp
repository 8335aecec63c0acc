#pragma once

#include <cassert>
#include <cmath>

#include "salvo/types.hpp"

namespace salvo {

/// Bilinear blend of the four pixels around (x, y). Pixel centers sit at
/// integer coordinates; valid range is [0, w-1] x [0, h-1].
template <typename Derived>
double interpolateBilinear(const Eigen::ArrayBase<Derived>& img, double x, double y) {
  const int w = int(img.cols());
  const int h = int(img.rows());
  assert(x >= 0.0 && x <= w - 1.0 && y >= 0.0 && y <= h - 1.0);
  int x0 = int(std::floor(x));
  int y0 = int(std::floor(y));
  if (x0 >= w - 1) x0 = w - 2;
  if (y0 >= h - 1) y0 = h - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = img(y0, x0);
  const double v10 = img(y0, x0 + 1);
  const double v01 = img(y0 + 1, x0);
  const double v11 = img(y0 + 1, x0 + 1);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

/// Value plus the exact partial derivatives of the bilinear surface.
/// The derivatives are what analytic residual Jacobians must use so that they
/// agree with finite differences of the interpolated intensity.
template <typename Derived>
Vec3 interpolateBilinearWithGradient(const Eigen::ArrayBase<Derived>& img, double x, double y) {
  const int w = int(img.cols());
  const int h = int(img.rows());
  assert(x >= 0.0 && x <= w - 1.0 && y >= 0.0 && y <= h - 1.0);
  int x0 = int(std::floor(x));
  int y0 = int(std::floor(y));
  if (x0 >= w - 1) x0 = w - 2;
  if (y0 >= h - 1) y0 = h - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = img(y0, x0);
  const double v10 = img(y0, x0 + 1);
  const double v01 = img(y0 + 1, x0);
  const double v11 = img(y0 + 1, x0 + 1);
  Vec3 out;
  out[0] = (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
  out[1] = (1 - fy) * (v10 - v00) + fy * (v11 - v01);
  out[2] = (1 - fx) * (v01 - v00) + fx * (v11 - v10);
  return out;
}

}  // namespace salvo
