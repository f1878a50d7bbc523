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

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "synrecon/core.hpp"

namespace synrecon::metrics {

/// Returned by psnr for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// data_range <= 0 selects max(reference) - min(reference).
double psnr(const Image& x, const Image& reference, double data_range = 0.0);

/// Mean local SSIM over all 11x11 windows that fit inside the image (Gaussian weights, sigma 1.5).
double ssim(const Image& x, const Image& reference, double data_range = 0.0);

/// Normalized 11x11 Gaussian window, row-major.
std::array<double, 121> ssim_window();

struct MetricReport {
  std::string tag;
  double psnr = 0.0;
  double ssim = 0.0;
  std::uint64_t config_hash = 0;
};

struct PcaProjection {
  std::array<std::vector<double>, 2> axes;
  std::vector<double> mean;
  std::array<double, 2> explained_variance{0.0, 0.0};
  std::array<double, 2> explained_ratio{0.0, 0.0};
  std::vector<std::array<double, 2>> coords;        // one per latent
  std::vector<std::array<double, 2>> extra_coords;  // one per extra point
  bool degenerate = false;

  std::array<double, 2> project(std::span<const double> v) const;
};

PcaProjection pca_latents(const std::vector<std::vector<double>>& latents,
                          const std::vector<std::vector<double>>& extra = {});

}  // namespace synrecon::metrics
