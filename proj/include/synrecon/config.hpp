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

namespace synrecon::config {

/// Everything a command needs. Sections and keys mirror the INI layout written by echo().
struct RunConfig {
  // [run]
  std::string experiment = "petct";  // petct | eta_sweep
  std::uint64_t seed = 2026;
  int threads = 0;
  std::string out = "out";

  // [dataset]
  std::string dataset = "abdomen";  // abdomen | glyph | idx
  std::string idx_path;
  int train_images = 40;
  std::uint64_t train_patches = 20000;
  int test_images = 5;
  int grid = 64;
  double pixel_mm = 4.0;
  int patch = 16;
  double overlap = 0.75;
  double edge_sigma = 1.0;

  // [geometry]
  int pet_angles = 60;
  int pet_bins = 96;
  double pet_bin_mm = 4.0;
  int ct_angles = 60;
  int ct_bins = 110;
  double ct_detector_mm = 5.0;
  double ct_source_mm = 600.0;
  double ct_detector_dist_mm = 600.0;

  // [physics]
  std::string setting = "HL";
  double hl_pet_tau = 2.0;
  double hl_ct_intensity = 1e3;
  double lh_pet_tau = 0.2;
  double lh_ct_intensity = 1e5;
  double background_fraction = 0.2;
  double pet_mu_scale = 0.5;

  // [model]
  std::string model_path = "model.mvae";
  int latent_dim = 32;
  int feature_dim = 64;
  std::vector<int> hidden{256, 128};

  // [train]
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 100;
  double kl_weight = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool resume = false;

  // [solver]
  double eta = 0.5;
  double alpha = 0.0;
  int outer_iterations = 20;
  int pet_sub_iterations = 10;
  int ct_sub_iterations = 10;
  int z_sub_iterations = 50;
  int init_iterations = 10;
  double hl_beta_pet = 1.0;
  double hl_beta_ct = 1e4;
  double lh_beta_pet = 0.05;
  double lh_beta_ct = 300.0;
  std::vector<double> tune_pet_grid{0.03, 0.1, 0.3, 1.0, 3.0};
  std::vector<double> tune_ct_grid{1e2, 1e3, 1e4, 1e5};

  // [pls]
  double pls_eps = 1e-2;
  int pls_iterations = 300;
  double hl_pls_beta = 1e5;
  double lh_pls_beta = 1e5;
  std::vector<double> tune_pls_grid{1e3, 1e4, 1e5, 1e6};

  // [denoise]
  double sigma1 = 0.1;
  double sigma2 = 0.15;
  double denoise_beta = 1.0;
  std::vector<double> etas{0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0};
  int alternations = 10;
  int restarts = 4;

  // [generate]
  int generate_count = 16;
  std::string generate_mode = "uniform";  // uniform | normal

  // [lesion]
  double lesion_radius_mm = 12.0;
  double lesion_intensity = 4.0;

  // [eval]
  std::string eval_reference;
  std::vector<std::string> eval_images;

  // [thresholds]
  bool check_thresholds = true;
  double min_gain_db = 2.0;
  double min_contrast = 0.5;
  double max_crosstalk = 0.01;
};

/// Parses INI text. Unknown sections or keys, duplicates and malformed values raise ConfigError.
RunConfig parse(const std::string& text, const std::string& origin = "<config>");
RunConfig load(const std::string& path);
/// Canonical INI text; parse(echo(c)) reproduces c exactly.
std::string echo(const RunConfig& c);
std::uint64_t hash(const RunConfig& c);
void validate(const RunConfig& c);

}  // namespace synrecon::config
