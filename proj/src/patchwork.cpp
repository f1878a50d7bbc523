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

#include "synrecon/patchwork.hpp"

#include <cmath>

#include "synrecon/rng.hpp"

namespace synrecon::patchwork {

namespace {

std::vector<int> axis_positions(int n, int w, int stride) {
  std::vector<int> pos;
  for (int p = 0; p + w <= n; p += stride) pos.push_back(p);
  if (pos.back() + w < n) pos.push_back(n - w);
  return pos;
}

void check_patches(const PatchLayout& layout, std::span<const double> patches) {
  if (patches.size() != layout.count() * static_cast<std::size_t>(layout.dim()))
    throw ShapeError("scatter_add: expected " + std::to_string(layout.count()) + " patches of " +
                     std::to_string(layout.dim()) + " values");
}

}  // namespace

std::uint64_t PatchLayout::hash() const {
  std::uint64_t h = fnv1a("PatchLayout");
  const int header[4] = {grid_width, grid_height, patch, stride};
  h = fnv1a(header, sizeof(header), h);
  for (const auto& p : positions) {
    const int rc[2] = {p.row, p.col};
    h = fnv1a(rc, sizeof(rc), h);
  }
  return h;
}

PatchLayout build_layout(int grid_width, int grid_height, int patch, double overlap_fraction) {
  if (patch < 1 || patch > grid_width || patch > grid_height)
    throw ParameterError("build_layout: patch size " + std::to_string(patch) + " does not fit the grid");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw ParameterError("build_layout: overlap must lie in [0, 1)");
  const int stride = static_cast<int>(std::lround(patch * (1.0 - overlap_fraction)));
  if (stride < 1) throw ParameterError("build_layout: stride rounds to zero");

  PatchLayout layout;
  layout.grid_width = grid_width;
  layout.grid_height = grid_height;
  layout.patch = patch;
  layout.stride = stride;
  const auto rows = axis_positions(grid_height, patch, stride);
  const auto cols = axis_positions(grid_width, patch, stride);
  for (int r : rows)
    for (int c : cols) layout.positions.push_back({r, c});
  layout.coverage.assign(static_cast<std::size_t>(grid_width) * grid_height, 0);
  for (const auto& p : layout.positions)
    for (int r = 0; r < patch; ++r)
      for (int c = 0; c < patch; ++c) ++layout.coverage[static_cast<std::size_t>(p.row + r) * grid_width + p.col + c];
  return layout;
}

void extract(const PatchLayout& layout, const Image& x, std::size_t p, std::span<double> out) {
  if (p >= layout.count()) throw ParameterError("extract: patch index " + std::to_string(p) + " out of range");
  if (x.width != layout.grid_width || x.height != layout.grid_height) throw ShapeError("extract: grid mismatch");
  if (out.size() != static_cast<std::size_t>(layout.dim())) throw ShapeError("extract: output size mismatch");
  const auto pos = layout.positions[p];
  for (int r = 0; r < layout.patch; ++r)
    for (int c = 0; c < layout.patch; ++c) out[r * layout.patch + c] = x(pos.row + r, pos.col + c);
}

std::vector<double> extract(const PatchLayout& layout, const Image& x, std::size_t p) {
  std::vector<double> out(layout.dim());
  extract(layout, x, p, out);
  return out;
}

std::vector<double> extract_all(const PatchLayout& layout, const Image& x) {
  const std::size_t d = layout.dim();
  std::vector<double> out(layout.count() * d);
  for (std::size_t p = 0; p < layout.count(); ++p) extract(layout, x, p, std::span(out).subspan(p * d, d));
  return out;
}

Image scatter_add(const PatchLayout& layout, std::span<const double> patches, double pixel_mm) {
  check_patches(layout, patches);
  Image acc(layout.grid_width, layout.grid_height, pixel_mm);
  const int w = layout.patch;
  const std::size_t d = layout.dim();
  // Each thread owns whole output rows; patches are visited in position order.
#pragma omp parallel for schedule(static)
  for (int row = 0; row < layout.grid_height; ++row) {
    for (std::size_t p = 0; p < layout.count(); ++p) {
      const auto pos = layout.positions[p];
      if (row < pos.row || row >= pos.row + w) continue;
      const double* src = patches.data() + p * d + static_cast<std::size_t>(row - pos.row) * w;
      double* dst = acc.data.data() + static_cast<std::size_t>(row) * layout.grid_width + pos.col;
      for (int c = 0; c < w; ++c) dst[c] += src[c];
    }
  }
  return acc;
}

Image coverage_image(const PatchLayout& layout, double pixel_mm) {
  Image cov(layout.grid_width, layout.grid_height, pixel_mm);
  for (std::size_t j = 0; j < cov.size(); ++j) cov.data[j] = layout.coverage[j];
  return cov;
}

namespace reference {

Image scatter_add(const PatchLayout& layout, std::span<const double> patches, double pixel_mm) {
  check_patches(layout, patches);
  Image acc(layout.grid_width, layout.grid_height, pixel_mm);
  const int w = layout.patch;
  for (std::size_t p = 0; p < layout.count(); ++p) {
    const auto pos = layout.positions[p];
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < w; ++c) acc(pos.row + r, pos.col + c) += patches[p * layout.dim() + r * w + c];
  }
  return acc;
}

}  // namespace reference

}  // namespace synrecon::patchwork
