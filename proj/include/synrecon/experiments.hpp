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

#include "synrecon/datasets.hpp"
#include "synrecon/metrics.hpp"
#include "synrecon/neuralgen.hpp"
#include "synrecon/projectors.hpp"
#include "synrecon/solvers.hpp"

namespace synrecon::experiments {

// ---- two-channel denoising sweep over eta ----

struct EtaSweepConfig {
  double sigma1 = 0.1;
  double sigma2 = 0.15;
  double beta = 1.0;
  std::vector<double> etas{0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0};
  int alternations = 10;
  int restarts = 4;
  solvers::LbfgsConfig lbfgs{7, 200, 1e-7, 1e-4, 0.5, 30, false};
};

struct EtaSweepPoint {
  double eta = 0.0;
  double psnr1 = 0.0;
  double psnr2 = 0.0;
  ImagePair denoised;
  std::vector<double> z_fit;      // latent from the last z-step
  std::vector<double> z_encoded;  // encoder mean of the denoised pair
};

struct EtaSweepResult {
  ImagePair clean;
  ImagePair noisy;
  std::vector<EtaSweepPoint> points;
  std::vector<double> target_latent;  // encoder mean of the clean pair
};

/// Adds N(0, sigma_k^2) noise, then alternates the latent fit and the closed-form
/// image update for every eta.
EtaSweepResult run_eta_sweep(const neuralgen::MvaeModel& model, const ImagePair& clean, const EtaSweepConfig& cfg,
                             std::uint64_t seed);
ImagePair add_gaussian_noise(const ImagePair& clean, double sigma1, double sigma2, std::uint64_t seed);
std::string eta_sweep_csv(const EtaSweepResult& r);
std::string eta_sweep_csv(const std::vector<double>& etas, const std::vector<std::array<double, 2>>& mean_psnr);

/// PCA of training latents with the eta points and target projected; CSV rows
/// (kind, label, pc1, pc2).
std::string pca_csv(const metrics::PcaProjection& p, const std::vector<double>& labels);

// ---- PET/CT studies ----

enum class Setting { HL, LH };
Setting parse_setting(const std::string& s);
const char* setting_name(Setting s);

struct DosePreset {
  double pet_tau = 1.0;
  double ct_intensity = 1e4;
};

struct StudyConfig {
  Setting setting = Setting::HL;
  DosePreset dose;
  double background_fraction = 0.2;
  double pet_mu_scale = 0.5;
  projectors::GridSpec grid;
  projectors::ParallelGeometry pet_geometry;
  projectors::FanGeometry ct_geometry;
  int patch = 16;
  double overlap = 0.75;
  solvers::ReconConfig recon;
  solvers::PlsConfig pls;
  std::vector<std::uint64_t> phantom_seeds;
  std::uint64_t noise_seed = 0;
};

struct SimulatedCase {
  ImagePair truth;
  solvers::PetData pet;  // acquisition model with the true attenuation
  solvers::CtData ct;
};

SimulatedCase simulate_case(const ImagePair& truth, const StudyConfig& cfg, std::uint64_t noise_seed);

struct StudyRow {
  std::size_t phantom_id;
  std::string method;
  int channel;
  double psnr;
  double ssim;
};

struct CaseImages {
  ImagePair truth;
  ImagePair baseline;
  ImagePair mvae;
  ImagePair pls;
  std::vector<solvers::TraceRow> trace;
  regularizers::LatentState latents;
};

struct StudyResult {
  std::vector<StudyRow> rows;
  std::vector<CaseImages> cases;
  /// Mean PSNR over phantoms, indexed [method][channel-1] for MLEM/WLS (baseline), MVAE, PLS.
  double mean_psnr(const std::string& method, int channel) const;
  double mean_ssim(const std::string& method, int channel) const;
};

StudyResult run_petct_study(const neuralgen::MvaeModel& model, const StudyConfig& cfg, bool run_pls = true);
std::string study_csv(const std::vector<StudyRow>& rows);

struct LesionSpec {
  double radius_mm = 12.0;
  double intensity = 4.0;  // added to channel 1 inside the disc
};

struct MismatchReport {
  double contrast_recovery = 0.0;
  double ct_crosstalk = 0.0;  // relative change of the CT ROI mean
  double ct_roi_with = 0.0;
  double ct_roi_without = 0.0;
  ImagePair with_lesion;
  ImagePair without_lesion;
  ImagePair truth;
};

MismatchReport run_mismatch_study(const neuralgen::MvaeModel& model, std::uint64_t phantom_seed, const LesionSpec& lesion,
                                  const StudyConfig& cfg);
std::string mismatch_csv(const MismatchReport& r);

struct TuningRow {
  std::string method;
  double beta_pet;
  double beta_ct;
  double psnr1;
  double psnr2;
};

struct TuningResult {
  std::vector<TuningRow> rows;
  double best_beta_pet = 0.0;
  double best_beta_ct = 0.0;
  double best_pls_beta = 0.0;
};

/// Grid search on one calibration phantom; picks the largest PSNR sum.
TuningResult tune_betas(const neuralgen::MvaeModel& model, const StudyConfig& cfg, std::uint64_t calibration_seed,
                        const std::vector<double>& pet_grid, const std::vector<double>& ct_grid,
                        const std::vector<double>& pls_grid);
std::string tuning_csv(const TuningResult& r);

}  // namespace synrecon::experiments
