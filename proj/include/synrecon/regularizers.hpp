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
#include <string>
#include <vector>

#include "synrecon/core.hpp"
#include "synrecon/lbfgs.hpp"
#include "synrecon/neuralgen.hpp"
#include "synrecon/patchwork.hpp"

namespace synrecon::regularizers {

/// eta weights channel 1 (channel 2 gets 1 - eta); alpha scales the latent penalty.
struct SynergyWeights {
  double eta = 0.5;
  double beta = 1.0;
  double alpha = 0.0;
};

void validate(const SynergyWeights& w);

/// One latent vector per patch position, stored [p][s].
struct LatentState {
  int latent_dim = 0;
  std::vector<double> z;
  std::size_t iteration = 0;
  std::vector<std::size_t> flagged;  // patches whose last line search failed

  std::size_t count() const { return latent_dim ? z.size() / latent_dim : 0; }
  std::span<double> at(std::size_t p) { return std::span(z).subspan(p * latent_dim, latent_dim); }
  std::span<const double> at(std::size_t p) const { return std::span(z).subspan(p * latent_dim, latent_dim); }
};

using Generator = neuralgen::Compiled<double>;

/// H(z) = |z|^2 / 2; writes the gradient if grad is non-empty.
double latent_penalty_H(std::span<const double> z, std::span<double> grad = {});

/// Per-channel fitting weights for the latent step. Entries may be any non-negative
/// numbers (the reconstruction loop passes eta_k * beta_k).
struct ChannelWeights {
  std::vector<double> eta;
  double alpha = 0.0;
};

ChannelWeights channel_weights(const SynergyWeights& w);

/// sum_p [ sum_k eta_k/2 |c_k G_k(z_p) - P_p x_k|^2 + alpha H(z_p) ].
double r_theta_value(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2,
                     const ChannelWeights& w, const LatentState& state);
double r_theta_value(const neuralgen::MvaeModel& m, const patchwork::PatchLayout& layout, const Image& x1,
                     const Image& x2, const SynergyWeights& w, const LatentState& state);

/// Per-channel quadratic misfits Q_k = 1/2 sum_p |c_k G_k(z_p) - P_p x_k|^2.
std::vector<double> patch_misfits(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1,
                                  const Image& x2, const LatentState& state);

/// Warm-started per-patch L-BFGS on the latent objective.
LatentState fit_latents(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2,
                        const ChannelWeights& w, const LatentState& state, const solvers::LbfgsConfig& cfg);
LatentState fit_latents(const neuralgen::MvaeModel& m, const patchwork::PatchLayout& layout, const Image& x1,
                        const Image& x2, const SynergyWeights& w, const LatentState& state,
                        const solvers::LbfgsConfig& cfg);

namespace reference {
LatentState fit_latents(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2,
                        const ChannelWeights& w, const LatentState& state, const solvers::LbfgsConfig& cfg);
}  // namespace reference

/// Encoder means of the normalized image patches.
LatentState encode_patches(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2);

/// scatter_add of c_k G_k(z_p) over all patches.
Image generated_aggregate(const Generator& g, const patchwork::PatchLayout& layout, const LatentState& state,
                          int channel, double pixel_mm);

struct ModelFit {
  std::vector<double> z;
  Image x1;  // c_1 G_1(z)
  Image x2;
  double value = 0.0;
  int best_start = 0;  // 0 = encoder initialization
};

/// Minimizes f_eta over a single full-image latent from the encoder start plus random restarts.
ModelFit model_fit_eta(const Generator& g, const Image& x1, const Image& x2, double eta, int restarts,
                       std::uint64_t seed, const solvers::LbfgsConfig& cfg, std::span<const double> warm_start = {});
ModelFit model_fit_eta(const neuralgen::MvaeModel& m, const Image& x1, const Image& x2, double eta, int restarts,
                       std::uint64_t seed);

struct PlsResult {
  double value = 0.0;
  Image grad1;
  Image grad2;
};

/// sum_j sqrt(|a_j|^2 |b_j|^2 - <a_j, b_j>^2 + eps^2) with a = grad x1, b = grad x2
/// (forward differences, zero past the last row/column).
PlsResult pls_value_grad(const Image& x1, const Image& x2, double eps);

void save_latents(const std::string& path, const LatentState& state, const patchwork::PatchLayout& layout);
LatentState load_latents(const std::string& path, const patchwork::PatchLayout& layout, int latent_dim);

}  // namespace synrecon::regularizers
