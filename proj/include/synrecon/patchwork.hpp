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

#include <cstdint>
#include <span>
#include <vector>

#include "synrecon/core.hpp"

namespace synrecon::patchwork {

struct PatchPosition {
  int row;
  int col;
};

/// Square w x w patches at stride s, positions sorted row-major. The last position on
/// each axis is clamped to the border so every pixel is covered.
struct PatchLayout {
  int grid_width = 0;
  int grid_height = 0;
  int patch = 0;
  int stride = 0;
  std::vector<PatchPosition> positions;
  std::vector<int> coverage;  // per pixel, number of patches containing it

  int dim() const { return patch * patch; }
  std::size_t count() const { return positions.size(); }
  std::uint64_t hash() const;
};

PatchLayout build_layout(int grid_width, int grid_height, int patch, double overlap_fraction);

/// Copies the w x w window at position p, row-major.
void extract(const PatchLayout& layout, const Image& x, std::size_t p, std::span<double> out);
std::vector<double> extract(const PatchLayout& layout, const Image& x, std::size_t p);
/// All patches, concatenated [p][d].
std::vector<double> extract_all(const PatchLayout& layout, const Image& x);

/// sum_p P_p^T g_p. Rows are reduced in position order, so the OpenMP and serial
/// versions agree bit for bit.
Image scatter_add(const PatchLayout& layout, std::span<const double> patches, double pixel_mm = 1.0);
Image coverage_image(const PatchLayout& layout, double pixel_mm = 1.0);

namespace reference {
Image scatter_add(const PatchLayout& layout, std::span<const double> patches, double pixel_mm = 1.0);
}  // namespace reference

}  // namespace synrecon::patchwork
