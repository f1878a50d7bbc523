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

#include <cmath>

#include "doctest.h"
#include "synrecon/experiments.hpp"
#include "synrecon/metrics.hpp"

using namespace synrecon;
using namespace synrecon::experiments;

namespace {

StudyConfig small_study() {
  StudyConfig c;
  c.dose = {0.5, 1e4};
  c.grid = {32, 32, 8.0};
  c.pet_geometry = {45, 48, 8.0};
  c.ct_geometry = {45, 64, 10.0, 600.0, 600.0};
  c.patch = 8;
  c.overlap = 0.5;
  c.recon.beta_pet = 0.5;
  c.recon.beta_ct = 1e3;
  c.recon.outer_iterations = 3;
  c.recon.pet_sub_iterations = 3;
  c.recon.ct_sub_iterations = 3;
  c.recon.init_iterations = 5;
  c.recon.latent_lbfgs.max_iterations = 10;
  c.pls.beta = 10.0;
  c.pls.lbfgs.max_iterations = 20;
  c.phantom_seeds = {1, 2};
  c.noise_seed = 99;
  return c;
}

neuralgen::MvaeModel tiny_model(int patch = 8) {
  neuralgen::ModelShape s;
  s.patch_width = patch;
  s.latent_dim = 4;
  s.feature_dim = 8;
  s.hidden = {16, 12};
  return neuralgen::init_model(s, {1.0, 0.02}, 17);
}

ImagePair small_pair() {
  ImagePair p{Image(16, 16), Image(16, 16)};
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      p.channel1(r, c) = (r > 4 && r < 11 && c > 3 && c < 12) ? 1.0 : 0.0;
      p.channel2(r, c) = 0.5 * p.channel1(r, c);
    }
  return p;
}

}  // namespace

TEST_CASE("simulated acquisitions depend only on the noise seed") {
  const auto cfg = small_study();
  const auto truth = datasets::make_phantom_pair(datasets::abdomen_phantom_spec(1, 32, 8.0), 1);
  const auto a = simulate_case(truth, cfg, 5), b = simulate_case(truth, cfg, 5), c = simulate_case(truth, cfg, 6);
  CHECK(a.pet.counts.data == b.pet.counts.data);
  CHECK(a.ct.wls.line_integrals.data == b.ct.wls.line_integrals.data);
  CHECK(a.pet.counts.data != c.pet.counts.data);
  CHECK(a.pet.model.background.size() == a.pet.counts.size());
}

TEST_CASE("a study is reproducible and reports every method and channel") {
  const auto cfg = small_study();
  const auto model = tiny_model();
  const auto r1 = run_petct_study(model, cfg), r2 = run_petct_study(model, cfg);
  REQUIRE(r1.rows.size() == 2 * 3 * 2);
  for (std::size_t i = 0; i < r1.rows.size(); ++i) {
    CHECK(r1.rows[i].psnr == r2.rows[i].psnr);
    CHECK(r1.rows[i].ssim == r2.rows[i].ssim);
  }
  CHECK(r1.cases[0].mvae.channel1.data == r2.cases[0].mvae.channel1.data);
  CHECK(std::isfinite(r1.mean_psnr("MVAE", 1)));
  CHECK(study_csv(r1.rows).rfind("phantom_id,method,channel,psnr,ssim\n", 0) == 0);
}

TEST_CASE("with beta = 0 the MVAE rows equal the baseline rows") {
  auto cfg = small_study();
  cfg.recon.beta_pet = 0.0;
  cfg.recon.beta_ct = 0.0;
  const auto r = run_petct_study(tiny_model(), cfg, false);
  CHECK(r.mean_psnr("MVAE", 1) == r.mean_psnr("MLEM", 1));
  CHECK(r.mean_psnr("MVAE", 2) == r.mean_psnr("WLS", 2));
  CHECK(r.cases[1].mvae.channel2.data == r.cases[1].baseline.channel2.data);
}

TEST_CASE("a zero-intensity lesion leaves the CT untouched") {
  const auto cfg = small_study();
  const auto rep = run_mismatch_study(tiny_model(), 3, {24.0, 0.0}, cfg);
  CHECK(rep.ct_crosstalk == 0.0);
  CHECK(rep.ct_roi_with == rep.ct_roi_without);
  CHECK(rep.with_lesion.channel1.data == rep.without_lesion.channel1.data);
}

TEST_CASE("without coupling a real lesion cannot reach the CT") {
  auto cfg = small_study();
  cfg.recon.beta_pet = 0.0;
  cfg.recon.beta_ct = 0.0;
  const auto rep = run_mismatch_study(tiny_model(), 3, {24.0, 4.0}, cfg);
  CHECK(rep.ct_crosstalk == 0.0);
  CHECK(rep.contrast_recovery > 0.0);
  CHECK(mismatch_csv(rep).rfind("contrast_recovery,ct_crosstalk,", 0) == 0);
}

TEST_CASE("gaussian noise has the requested spread and is seeded") {
  ImagePair z{Image(64, 64), Image(64, 64)};
  const auto n = add_gaussian_noise(z, 0.15, 0.35, 4);
  double s1 = 0, s2 = 0;
  for (std::size_t j = 0; j < n.channel1.size(); ++j) {
    s1 += n.channel1[j] * n.channel1[j];
    s2 += n.channel2[j] * n.channel2[j];
  }
  CHECK(std::sqrt(s1 / 4096) == doctest::Approx(0.15).epsilon(0.05));
  CHECK(std::sqrt(s2 / 4096) == doctest::Approx(0.35).epsilon(0.05));
  CHECK(add_gaussian_noise(z, 0.15, 0.35, 4).channel1.data == n.channel1.data);
  CHECK_THROWS_AS(add_gaussian_noise(z, -1.0, 0.1, 4), ParameterError);
}

TEST_CASE("eta sweep with beta = 0 returns the noisy pair at every eta") {
  const auto model = tiny_model(16);
  EtaSweepConfig cfg;
  cfg.beta = 0.0;
  cfg.etas = {0.0, 0.5, 1.0};
  cfg.alternations = 2;
  cfg.restarts = 1;
  cfg.lbfgs.max_iterations = 10;
  const auto clean = small_pair();
  const auto r = run_eta_sweep(model, clean, cfg, 8);
  REQUIRE(r.points.size() == 3);
  const double p1 = metrics::psnr(r.noisy.channel1, clean.channel1);
  for (const auto& p : r.points) {
    CHECK(p.psnr1 == p1);
    CHECK(p.denoised.channel2.data == r.noisy.channel2.data);
    CHECK(p.z_fit.size() == 4);
    CHECK(p.z_encoded.size() == 4);
  }
  CHECK(r.target_latent.size() == 4);
  const auto again = run_eta_sweep(model, clean, cfg, 8);
  CHECK(again.points[1].z_fit == r.points[1].z_fit);
  CHECK(eta_sweep_csv(r).rfind("eta,psnr_ch1,psnr_ch2\n0,", 0) == 0);
}

TEST_CASE("setting names round-trip") {
  CHECK(parse_setting("HL") == Setting::HL);
  CHECK(std::string(setting_name(parse_setting("LH"))) == "LH");
  CHECK_THROWS_AS(parse_setting("XX"), ConfigError);
}
