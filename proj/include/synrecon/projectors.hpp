/*
 * synrecon : synergistic PET/CT reconstruction with multibranch VAE priors
 *
 * Copyright 2026 The synrecon Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <span>
#include <variant>

#include "synrecon/core.hpp"

namespace synrecon::projectors {

struct GridSpec {
  int width = 64;
  int height = 64;
  double pixel_mm = 4.0;

  static GridSpec of(const Image& img) { return {img.width, img.height, img.pixel_mm}; }
  bool matches(const Image& img) const {
    return img.width == width && img.height == height && img.pixel_mm == pixel_mm;
  }
};

/// Parallel beam over [0, pi): angle a is a * pi / n_angles, bins centred on the origin.
struct ParallelGeometry {
  int n_angles = 60;
  int n_bins = 96;
  double bin_mm = 4.0;
};

/// Flat-detector fan beam over [0, 2 pi).
struct FanGeometry {
  int n_angles = 60;
  int n_bins = 110;
  double detector_mm = 5.0;
  double source_mm = 600.0;    // origin to source
  double detector_dist_mm = 600.0;  // origin to detector
};

using Geometry = std::variant<ParallelGeometry, FanGeometry>;

/// A line through the plane: point + unit direction.
struct Ray {
  double ox, oy;
  double dx, dy;
};

/// Matrix-free Joseph projector. Forward and backward share one ray tracer, so the
/// pair is an exact transpose. Immutable after construction.
class Projector {
 public:
  Projector(GridSpec grid, Geometry geometry);

  const GridSpec& grid() const { return grid_; }
  const Geometry& geometry() const { return geometry_; }
  int n_angles() const;
  int n_bins() const;
  std::size_t n_rays() const { return static_cast<std::size_t>(n_angles()) * n_bins(); }

  Ray ray(int angle, int bin) const;

  Sinogram forward(const Image& x) const;
  Image backward(const Sinogram& y) const;
  /// backward() of per-ray weights; the MLEM / SPS denominators.
  Image sensitivity(std::span<const double> weights) const;

  Sinogram zero_sinogram(double fill = 0.0) const { return Sinogram(n_angles(), n_bins(), fill); }
  Image zero_image(double fill = 0.0) const { return Image(grid_.width, grid_.height, grid_.pixel_mm, fill); }

 private:
  GridSpec grid_;
  Geometry geometry_;
};

/// Calls fn(pixel_index, weight_mm) for every pixel the ray touches. Weights are
/// Joseph interpolation weights times the step length along the driving axis.
template <typename Fn>
void trace_ray(const GridSpec& g, const Ray& ray, Fn&& fn) {
  const double px = g.pixel_mm;
  const double cx = 0.5 * (g.width - 1), cy = 0.5 * (g.height - 1);
  if (std::abs(ray.dx) >= std::abs(ray.dy)) {
    const double step = px / std::abs(ray.dx);
    for (int c = 0; c < g.width; ++c) {
      const double x = (c - cx) * px;
      const double y = ray.oy + (x - ray.ox) * ray.dy / ray.dx;
      const double rho = y / px + cy;
      const double r0 = std::floor(rho);
      const double f = rho - r0;
      const int r = static_cast<int>(r0);
      if (r >= 0 && r < g.height && f < 1.0)
        fn(static_cast<std::size_t>(r) * g.width + c, step * (1.0 - f));
      if (r + 1 >= 0 && r + 1 < g.height && f > 0.0)
        fn(static_cast<std::size_t>(r + 1) * g.width + c, step * f);
    }
  } else {
    const double step = px / std::abs(ray.dy);
    for (int r = 0; r < g.height; ++r) {
      const double y = (r - cy) * px;
      const double x = ray.ox + (y - ray.oy) * ray.dx / ray.dy;
      const double gamma = x / px + cx;
      const double c0 = std::floor(gamma);
      const double f = gamma - c0;
      const int c = static_cast<int>(c0);
      if (c >= 0 && c < g.width && f < 1.0)
        fn(static_cast<std::size_t>(r) * g.width + c, step * (1.0 - f));
      if (c + 1 >= 0 && c + 1 < g.width && f > 0.0)
        fn(static_cast<std::size_t>(r) * g.width + c + 1, step * f);
    }
  }
}

/// Serial implementations kept as the reference for the OpenMP kernels.
namespace reference {
Sinogram forward(const Projector& p, const Image& x);
Image backward(const Projector& p, const Sinogram& y);
}  // namespace reference

}  // namespace synrecon::projectors
