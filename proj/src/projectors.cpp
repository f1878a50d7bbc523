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

#include "synrecon/projectors.hpp"

#include <algorithm>
#include <numbers>

namespace synrecon::projectors {

namespace {

// Angles per backprojection chunk. Chunk buffers are reduced in chunk order, so the
// result does not depend on the thread count.
constexpr int kBackprojectChunk = 4;

void check_image(const Projector& p, const Image& x) {
  if (!p.grid().matches(x))
    throw ShapeError("projector: image grid " + std::to_string(x.width) + "x" + std::to_string(x.height) +
                     " does not match projector grid");
}

void check_sinogram(const Projector& p, const Sinogram& y) {
  if (y.n_angles != p.n_angles() || y.n_bins != p.n_bins())
    throw ShapeError("projector: sinogram shape does not match geometry");
}

}  // namespace

Projector::Projector(GridSpec grid, Geometry geometry) : grid_(grid), geometry_(geometry) {
  if (grid_.width < 1 || grid_.height < 1 || !(grid_.pixel_mm > 0.0))
    throw ParameterError("projector: invalid grid");
  if (const auto* par = std::get_if<ParallelGeometry>(&geometry_)) {
    if (par->n_angles < 1 || par->n_bins < 1 || !(par->bin_mm > 0.0))
      throw ParameterError("parallel geometry: need n_angles >= 1, n_bins >= 1, bin_mm > 0");
  } else {
    const auto& fan = std::get<FanGeometry>(geometry_);
    if (fan.n_angles < 1 || fan.n_bins < 1 || !(fan.detector_mm > 0.0) || !(fan.source_mm > 0.0) ||
        !(fan.detector_dist_mm > 0.0))
      throw ParameterError("fan geometry: counts and distances must be positive");
    const double half_diag =
        0.5 * grid_.pixel_mm * std::hypot(static_cast<double>(grid_.width), static_cast<double>(grid_.height));
    if (fan.source_mm <= half_diag) throw ParameterError("fan geometry: source inside the image support");
  }
}

int Projector::n_angles() const {
  return std::visit([](const auto& g) { return g.n_angles; }, geometry_);
}

int Projector::n_bins() const {
  return std::visit([](const auto& g) { return g.n_bins; }, geometry_);
}

Ray Projector::ray(int angle, int bin) const {
  if (const auto* par = std::get_if<ParallelGeometry>(&geometry_)) {
    const double theta = angle * std::numbers::pi / par->n_angles;
    const double nx = std::cos(theta), ny = std::sin(theta);
    const double t = (bin - 0.5 * (par->n_bins - 1)) * par->bin_mm;
    return {t * nx, t * ny, -ny, nx};
  }
  const auto& fan = std::get<FanGeometry>(geometry_);
  const double theta = angle * 2.0 * std::numbers::pi / fan.n_angles;
  const double nx = std::cos(theta), ny = std::sin(theta);
  // Central ray direction d = (-ny, nx); detector axis is n.
  const double sx = fan.source_mm * ny, sy = -fan.source_mm * nx;
  const double t = (bin - 0.5 * (fan.n_bins - 1)) * fan.detector_mm;
  const double ex = -fan.detector_dist_mm * ny + t * nx, ey = fan.detector_dist_mm * nx + t * ny;
  const double lx = ex - sx, ly = ey - sy;
  const double len = std::hypot(lx, ly);
  return {sx, sy, lx / len, ly / len};
}

Sinogram Projector::forward(const Image& x) const {
  check_image(*this, x);
  Sinogram y = zero_sinogram();
  const int na = n_angles(), nb = n_bins();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(na) * nb; ++i) {
    const Ray r = ray(static_cast<int>(i / nb), static_cast<int>(i % nb));
    double s = 0.0;
    trace_ray(grid_, r, [&](std::size_t j, double w) { s += w * x.data[j]; });
    y.data[i] = s;
  }
  return y;
}

Image Projector::backward(const Sinogram& y) const {
  check_sinogram(*this, y);
  const int na = n_angles(), nb = n_bins();
  const int n_chunks = (na + kBackprojectChunk - 1) / kBackprojectChunk;
  const std::size_t npix = static_cast<std::size_t>(grid_.width) * grid_.height;
  std::vector<double> partial(static_cast<std::size_t>(n_chunks) * npix, 0.0);
#pragma omp parallel for schedule(static)
  for (int chunk = 0; chunk < n_chunks; ++chunk) {
    double* acc = partial.data() + static_cast<std::size_t>(chunk) * npix;
    const int a_end = std::min(na, (chunk + 1) * kBackprojectChunk);
    for (int a = chunk * kBackprojectChunk; a < a_end; ++a)
      for (int b = 0; b < nb; ++b) {
        const double v = y(a, b);
        if (v == 0.0) continue;
        trace_ray(grid_, ray(a, b), [&](std::size_t j, double w) { acc[j] += w * v; });
      }
  }
  Image x = zero_image();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(npix); ++j) {
    double s = 0.0;
    for (int chunk = 0; chunk < n_chunks; ++chunk) s += partial[static_cast<std::size_t>(chunk) * npix + j];
    x.data[j] = s;
  }
  return x;
}

Image Projector::sensitivity(std::span<const double> weights) const {
  if (weights.size() != n_rays()) throw ShapeError("sensitivity: weight count does not match ray count");
  Sinogram w = zero_sinogram();
  std::copy(weights.begin(), weights.end(), w.data.begin());
  return backward(w);
}

namespace reference {

Sinogram forward(const Projector& p, const Image& x) {
  check_image(p, x);
  Sinogram y = p.zero_sinogram();
  for (int a = 0; a < p.n_angles(); ++a)
    for (int b = 0; b < p.n_bins(); ++b) {
      double s = 0.0;
      trace_ray(p.grid(), p.ray(a, b), [&](std::size_t j, double w) { s += w * x.data[j]; });
      y(a, b) = s;
    }
  return y;
}

Image backward(const Projector& p, const Sinogram& y) {
  check_sinogram(p, y);
  Image x = p.zero_image();
  for (int a = 0; a < p.n_angles(); ++a)
    for (int b = 0; b < p.n_bins(); ++b) {
      const double v = y(a, b);
      trace_ray(p.grid(), p.ray(a, b), [&](std::size_t j, double w) { x.data[j] += w * v; });
    }
  return x;
}

}  // namespace reference

}  // namespace synrecon::projectors
