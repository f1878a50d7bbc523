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

#include <optional>
#include <string>
#include <vector>

#include "synrecon/core.hpp"
#include "synrecon/lbfgs.hpp"
#include "synrecon/neuralgen.hpp"
#include "synrecon/patchwork.hpp"
#include "synrecon/physics.hpp"
#include "synrecon/regularizers.hpp"

namespace synrecon::solvers {

/// Emission data with the model used for reconstruction (its acf may come from a scout).
struct PetData {
  physics::PetModel model;
  Sinogram counts;
};

struct CtData {
  physics::CtModel model;
  physics::WlsTerms wls;
};

/// Quadratic patch penalty folded per pixel: beta/2 sum_j (w_j x_j^2 - 2 t_j x_j).
struct PenaltyTarget {
  Image t;  // scatter_add of c_k G_k(z_p)
  Image w;  // coverage
};

struct ReconConfig {
  double beta = 0.0;
  double eta = 0.5;
  double alpha = 0.0;
  std::optional<double> beta_pet;  // per-channel overrides of beta
  std::optional<double> beta_ct;
  int outer_iterations = 20;
  int pet_sub_iterations = 10;
  int ct_sub_iterations = 10;
  int init_iterations = 10;
  double pet_mu_scale = 0.5;  // 511 keV attenuation per unit of CT attenuation
  LbfgsConfig latent_lbfgs{7, 50, 1e-6, 1e-4, 0.5, 30, false};

  double beta1() const { return beta_pet.value_or(beta); }
  double beta2() const { return beta_ct.value_or(beta); }
};

void validate(const ReconConfig& cfg);

struct PetUpdateReport {
  std::size_t excluded_rays = 0;  // y > 0 where the expectation vanished
  std::vector<double> objective;  // penalized objective before and after each sub-iteration
};

/// EM surrogate plus the separable patch penalty; per-voxel positive root of
/// beta w x^2 + (s - beta t) x - q = 0.
Image pet_x_update(const PetData& data, const Image& x, const PenaltyTarget* target, double beta, int sub_iters,
                   PetUpdateReport* report = nullptr);
/// Penalized objective that pet_x_update decreases.
double pet_objective(const PetData& data, const Image& x, const PenaltyTarget* target, double beta);

/// Closed-form root used by pet_x_update; exposed for the optimality test.
double pet_root(double s, double q, double t, double w, double beta, double x_keep);

/// Separable paraboloidal surrogate steps on the WLS loss plus the patch penalty.
Image ct_x_update(const CtData& data, const Image& x, const PenaltyTarget* target, double beta, int sub_iters,
                  std::vector<double>* objective = nullptr);
double ct_objective(const CtData& data, const Image& x, const PenaltyTarget* target, double beta);

/// (x_noisy + beta * generated) / (1 + beta)
Image denoise_update_closed_form(const Image& x_noisy, const Image& generated, double beta);

Image mlem_baseline(const PetData& data, const Image& x0, int iters, std::vector<double>* nll = nullptr);
Image wls_baseline(const CtData& data, const Image& x0, int iters, std::vector<double>* objective = nullptr);

struct TraceRow {
  int outer_iter;
  double data_fit_1;
  double data_fit_2;
  double regularizer;
  double total;
};

struct SynergisticResult {
  Image x1;
  Image x2;
  Image scout;  // CT scout used for attenuation correction
  regularizers::LatentState latents;
  std::vector<TraceRow> trace;  // row 0 is the initialization
};

/// Builds the reconstruction-side PET data: acf from the CT scout replaces the model's acf.
PetData scout_corrected(const PetData& data, const Image& scout, double mu_scale);

/// Scout CT, scout-corrected MLEM init, encoder latents, then outer iterations of
/// [fit_latents; PET update; CT update].
SynergisticResult reconstruct_synergistic(const PetData& pet, const CtData& ct, const regularizers::Generator& model,
                                          const patchwork::PatchLayout& layout, const ReconConfig& cfg);

struct PlsConfig {
  double beta = 0.0;
  double eta = 0.5;
  double eps = 1e-2;
  std::vector<double> scale{1.0, 1.0};  // images enter the PLS term as x_k / c_k
  LbfgsConfig lbfgs{7, 300, 1e-9, 1e-4, 0.5, 30, true};
  int init_iterations = 10;
};

struct PlsOutput {
  Image x1;
  Image x2;
  std::vector<double> trace;
  std::vector<double> pls_trace;
};

/// Quadratic PET data term 1/2 sum_{y>0} (y - ybar)^2 / y.
double pet_quadratic(const PetData& data, const Image& x, Image* grad);
double wls_value_grad(const CtData& data, const Image& x, Image* grad);

/// Joint projected L-BFGS on eta * PET quadratic + (1 - eta) * WLS + beta * PLS.
/// pet.model.acf must already be the reconstruction acf.
PlsOutput reconstruct_pls(const PetData& pet, const CtData& ct, const PlsConfig& cfg, const Image& x1_init,
                          const Image& x2_init);

std::string trace_csv(const std::vector<TraceRow>& rows);

}  // namespace synrecon::solvers
