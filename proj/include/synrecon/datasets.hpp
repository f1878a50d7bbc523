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
#include <optional>
#include <string>
#include <vector>

#include "synrecon/core.hpp"

namespace synrecon::datasets {

/// Positive per-channel scale: channel-native units per model unit.
struct NormalizationConstants {
  std::vector<double> scale;
};

struct Ellipse {
  double cx_mm = 0.0, cy_mm = 0.0;
  double ax_mm = 1.0, ay_mm = 1.0;
  double rotation_rad = 0.0;
  std::array<double, 2> intensity{0.0, 0.0};
};

struct Lesion {
  double cx_mm = 0.0, cy_mm = 0.0;
  double radius_mm = 3.0;
  int channel = 0;  // 0 = channel 1
  double intensity = 0.0;
};

/// Ellipses are painted in order: a later ellipse replaces earlier values.
struct PhantomSpec {
  int width = 64;
  int height = 64;
  double pixel_mm = 4.0;
  std::vector<Ellipse> ellipses;
  std::optional<Lesion> lesion;
  /// Relative amplitude of smooth seeded texture on channel 1 (0 disables).
  double texture = 0.0;
};

/// A patch-pair dataset: `count` samples, each holding `channels` patches of `dim` values.
struct PatchSet {
  int channels = 2;
  int dim = 0;
  std::size_t count = 0;
  std::vector<float> values;  // [sample][channel][dim]

  float* patch(std::size_t sample, int channel) {
    return values.data() + (sample * channels + channel) * static_cast<std::size_t>(dim);
  }
  const float* patch(std::size_t sample, int channel) const {
    return values.data() + (sample * channels + channel) * static_cast<std::size_t>(dim);
  }
};

/// IDX ubyte image file (magic 0x00000803), scaled to [0,1] and zero-padded to target_size.
std::vector<Image> load_idx_images(const std::string& path, int target_size);
/// Symmetric zero padding (odd excess goes to the bottom/right).
Image pad_to(const Image& img, int target_size);

/// Smoothed Roberts gradient magnitude: sqrt((g1^2 + g2^2) / 2), then Gaussian blur
/// with a kernel truncated at ceil(3 sigma). sigma = 0 skips the blur.
Image derive_edge_channel(const Image& x1, double gaussian_sigma = 1.0);
Image gaussian_blur(const Image& x, double sigma);

ImagePair make_phantom_pair(const PhantomSpec& spec, std::uint64_t seed);
Image insert_lesion(const Image& image, double cx_mm, double cy_mm, double radius_mm, double intensity);
/// Pixel centres inside (or on) the disc, row-major indices.
std::vector<std::size_t> disc_pixels(const Image& grid, double cx_mm, double cy_mm, double radius_mm);
std::vector<std::size_t> annulus_pixels(const Image& grid, double cx_mm, double cy_mm, double r_in_mm,
                                        double r_out_mm);

NormalizationConstants compute_normalization(const std::vector<ImagePair>& pairs);

PatchSet extract_training_patches(const std::vector<ImagePair>& pairs, int patch_size, std::size_t count,
                                  std::uint64_t seed);
/// Divides channel k of every sample by scale[k].
void normalize(PatchSet& set, const NormalizationConstants& c);
/// Whole images as single patches, in pair order.
PatchSet pairs_to_patchset(const std::vector<ImagePair>& pairs);

/// "MVPS", u32 channels, u32 dim, u64 count, then float32 values.
void save_patches(const std::string& path, const PatchSet& set);
PatchSet load_patches(const std::string& path);

/// Procedural abdomen-like PET/CT phantom (activity in a.u., attenuation in 1/mm).
/// PET-only hot spots are included so the pair is not structurally redundant.
PhantomSpec abdomen_phantom_spec(std::uint64_t seed, int grid = 64, double pixel_mm = 4.0);
/// Centre (mm) of a lung-base region of an abdomen phantom, for lesion placement.
std::array<double, 2> lung_lesion_site(const PhantomSpec& spec);

/// Stroke-rendered digit glyphs, 28x28 in [0,1], MNIST-like. Stand-in when no IDX files are present.
std::vector<Image> make_glyph_images(std::size_t count, std::uint64_t seed);
/// (digit, edge) pairs on the padded grid.
std::vector<ImagePair> make_edge_pairs(const std::vector<Image>& digits, double gaussian_sigma = 1.0);

}  // namespace synrecon::datasets
