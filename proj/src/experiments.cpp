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

#include "synrecon/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "synrecon/physics.hpp"
#include "synrecon/regularizers.hpp"
#include "synrecon/rng.hpp"

namespace synrecon::experiments {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double mean_at(const Image& x, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ParameterError("roi is empty");
  double s = 0.0;
  for (std::size_t j : idx) s += x[j];
  return s / static_cast<double>(idx.size());
}

std::vector<double> encode_pair(const regularizers::Generator& g, const ImagePair& p) {
  std::vector<neuralgen::Mat<double>> u(2, neuralgen::Mat<double>(g.dim, 1));
  const Image* x[2] = {&p.channel1, &p.channel2};
  for (int k = 0; k < 2; ++k) {
    if (static_cast<int>(x[k]->size()) != g.dim) throw ShapeError("encode_pair: image size does not match the model");
    for (int j = 0; j < g.dim; ++j) u[k](j, 0) = x[k]->data[j] / g.scale[k];
  }
  const auto mu = neuralgen::encode_mean<double>(g, u);
  return {mu.data(), mu.data() + mu.size()};
}

ImagePair phantom_truth(std::uint64_t seed, const projectors::GridSpec& grid) {
  if (grid.width != grid.height) throw ParameterError("phantom grid must be square");
  return datasets::make_phantom_pair(datasets::abdomen_phantom_spec(seed, grid.width, grid.pixel_mm), seed);
}

solvers::ReconConfig unregularized(solvers::ReconConfig cfg) {
  cfg.beta = 0.0;
  cfg.beta_pet.reset();
  cfg.beta_ct.reset();
  return cfg;
}

struct CaseRun {
  solvers::SynergisticResult baseline;
  solvers::SynergisticResult mvae;
  solvers::PlsOutput pls;
};

solvers::PlsOutput run_pls(const SimulatedCase& sim, const solvers::SynergisticResult& base, const StudyConfig& cfg,
                           const neuralgen::MvaeModel& model, double beta) {
  const auto pr = solvers::scout_corrected(sim.pet, base.scout, cfg.pet_mu_scale);
  auto pc = cfg.pls;
  pc.beta = beta;
  pc.scale = model.scale;
  const Image x1 = solvers::mlem_baseline(pr, pr.model.projector.zero_image(1.0), pc.init_iterations);
  return solvers::reconstruct_pls(pr, sim.ct, pc, x1, base.scout);
}

}  // namespace

ImagePair add_gaussian_noise(const ImagePair& clean, double sigma1, double sigma2, std::uint64_t seed) {
  if (sigma1 < 0.0 || sigma2 < 0.0) throw ParameterError("noise levels must be non-negative");
  ImagePair n = clean;
  Rng r1(derive_seed(seed, "channel1")), r2(derive_seed(seed, "channel2"));
  for (auto& v : n.channel1.data) v += sigma1 * r1.normal();
  for (auto& v : n.channel2.data) v += sigma2 * r2.normal();
  return n;
}

EtaSweepResult run_eta_sweep(const neuralgen::MvaeModel& model, const ImagePair& clean, const EtaSweepConfig& cfg,
                             std::uint64_t seed) {
  if (cfg.etas.empty()) throw ParameterError("eta sweep: empty eta grid");
  if (cfg.alternations < 1) throw ParameterError("eta sweep: need at least one alternation");
  const regularizers::Generator g(model);
  EtaSweepResult res;
  res.clean = clean;
  res.noisy = add_gaussian_noise(clean, cfg.sigma1, cfg.sigma2, derive_seed(seed, "noise"));
  res.target_latent = encode_pair(g, clean);

  for (std::size_t e = 0; e < cfg.etas.size(); ++e) {
    const double eta = cfg.etas[e];
    EtaSweepPoint pt;
    pt.eta = eta;
    ImagePair x = res.noisy;
    std::vector<double> z;
    for (int a = 0; a < cfg.alternations; ++a) {
      const int restarts = a == 0 ? cfg.restarts : 0;
      const auto fit = regularizers::model_fit_eta(g, x.channel1, x.channel2, eta, restarts,
                                                   derive_seed(derive_seed(seed, "restarts"), e), cfg.lbfgs, z);
      z = fit.z;
      x.channel1 = solvers::denoise_update_closed_form(res.noisy.channel1, fit.x1, cfg.beta);
      x.channel2 = solvers::denoise_update_closed_form(res.noisy.channel2, fit.x2, cfg.beta);
    }
    pt.denoised = x;
    pt.z_fit = z;
    pt.z_encoded = encode_pair(g, x);
    pt.psnr1 = metrics::psnr(x.channel1, clean.channel1);
    pt.psnr2 = metrics::psnr(x.channel2, clean.channel2);
    res.points.push_back(std::move(pt));
  }
  return res;
}

std::string eta_sweep_csv(const EtaSweepResult& r) {
  std::string s = "eta,psnr_ch1,psnr_ch2\n";
  for (const auto& p : r.points) s += fmt(p.eta) + "," + fmt(p.psnr1) + "," + fmt(p.psnr2) + "\n";
  return s;
}

std::string eta_sweep_csv(const std::vector<double>& etas, const std::vector<std::array<double, 2>>& mean_psnr) {
  if (etas.size() != mean_psnr.size()) throw ShapeError("eta_sweep_csv: size mismatch");
  std::string s = "eta,psnr_ch1,psnr_ch2\n";
  for (std::size_t i = 0; i < etas.size(); ++i)
    s += fmt(etas[i]) + "," + fmt(mean_psnr[i][0]) + "," + fmt(mean_psnr[i][1]) + "\n";
  return s;
}

std::string pca_csv(const metrics::PcaProjection& p, const std::vector<double>& labels) {
  std::string s = "kind,label,pc1,pc2\n";
  for (std::size_t i = 0; i < p.coords.size(); ++i)
    s += "train," + std::to_string(i) + "," + fmt(p.coords[i][0]) + "," + fmt(p.coords[i][1]) + "\n";
  for (std::size_t i = 0; i < p.extra_coords.size(); ++i) {
    const bool target = i >= labels.size();
    s += std::string(target ? "target," : "eta,") + (target ? "" : fmt(labels[i])) + "," + fmt(p.extra_coords[i][0]) +
         "," + fmt(p.extra_coords[i][1]) + "\n";
  }
  return s;
}

Setting parse_setting(const std::string& s) {
  if (s == "HL" || s == "hl") return Setting::HL;
  if (s == "LH" || s == "lh") return Setting::LH;
  throw ConfigError("unknown dose setting '" + s + "' (expected HL or LH)");
}

const char* setting_name(Setting s) { return s == Setting::HL ? "HL" : "LH"; }

SimulatedCase simulate_case(const ImagePair& truth, const StudyConfig& cfg, std::uint64_t noise_seed) {
  projectors::Projector pet_proj(cfg.grid, cfg.pet_geometry);
  projectors::Projector ct_proj(cfg.grid, cfg.ct_geometry);
  physics::PetModel pm{pet_proj, cfg.dose.pet_tau, {}, physics::attenuation_factors(pet_proj, truth.channel2, cfg.pet_mu_scale)};
  physics::validate(pm);
  Sinogram rate = physics::pet_expectation(pm, truth.channel1);
  for (auto& v : rate.data) v /= pm.tau;
  pm.background = physics::uniform_background(rate, cfg.background_fraction);
  const auto pet_counts = physics::sample_poisson(physics::pet_expectation(pm, truth.channel1), derive_seed(noise_seed, "pet"));

  physics::CtModel cm{ct_proj, cfg.dose.ct_intensity};
  const auto ct_counts = physics::sample_poisson(physics::ct_expectation(cm, truth.channel2), derive_seed(noise_seed, "ct"));
  return SimulatedCase{truth, solvers::PetData{pm, pet_counts.counts}, solvers::CtData{cm, physics::wls_terms(ct_counts, cm)}};
}

double StudyResult::mean_psnr(const std::string& method, int channel) const {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.method == method && r.channel == channel) {
      s += r.psnr;
      ++n;
    }
  if (n == 0) throw ParameterError("no rows for method " + method);
  return s / n;
}

double StudyResult::mean_ssim(const std::string& method, int channel) const {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (r.method == method && r.channel == channel) {
      s += r.ssim;
      ++n;
    }
  if (n == 0) throw ParameterError("no rows for method " + method);
  return s / n;
}

StudyResult run_petct_study(const neuralgen::MvaeModel& model, const StudyConfig& cfg, bool run_pls_comparator) {
  if (cfg.phantom_seeds.empty()) throw ParameterError("study: empty phantom list");
  const regularizers::Generator g(model);
  const auto layout = patchwork::build_layout(cfg.grid.width, cfg.grid.height, cfg.patch, cfg.overlap);
  StudyResult res;
  for (std::size_t i = 0; i < cfg.phantom_seeds.size(); ++i) {
    const auto truth = phantom_truth(cfg.phantom_seeds[i], cfg.grid);
    const auto sim = simulate_case(truth, cfg, derive_seed(cfg.noise_seed, static_cast<std::uint64_t>(i)));
    CaseImages c;
    c.truth = truth;
    auto tag = [&](const char* method, const std::exception& e) {
      return std::string(method) + " on phantom " + std::to_string(i) + ": " + e.what();
    };
    solvers::SynergisticResult base, mv;
    try {
      base = solvers::reconstruct_synergistic(sim.pet, sim.ct, g, layout, unregularized(cfg.recon));
    } catch (const NumericError& e) {
      throw NumericError(tag("baseline", e));
    }
    try {
      mv = solvers::reconstruct_synergistic(sim.pet, sim.ct, g, layout, cfg.recon);
    } catch (const NumericError& e) {
      throw NumericError(tag("MVAE", e));
    }
    c.baseline = {base.x1, base.x2};
    c.mvae = {mv.x1, mv.x2};
    c.trace = mv.trace;
    c.latents = mv.latents;
    auto add = [&](const char* method, int ch, const Image& x) {
      const Image& ref = ch == 1 ? truth.channel1 : truth.channel2;
      res.rows.push_back({i, method, ch, metrics::psnr(x, ref), metrics::ssim(x, ref)});
    };
    add("MLEM", 1, base.x1);
    add("WLS", 2, base.x2);
    add("MVAE", 1, mv.x1);
    add("MVAE", 2, mv.x2);
    if (run_pls_comparator) {
      try {
        const auto p = run_pls(sim, base, cfg, model, cfg.pls.beta);
        c.pls = {p.x1, p.x2};
      } catch (const NumericError& e) {
        throw NumericError(tag("PLS", e));
      }
      add("PLS", 1, c.pls.channel1);
      add("PLS", 2, c.pls.channel2);
    }
    res.cases.push_back(std::move(c));
  }
  return res;
}

std::string study_csv(const std::vector<StudyRow>& rows) {
  std::string s = "phantom_id,method,channel,psnr,ssim\n";
  for (const auto& r : rows)
    s += std::to_string(r.phantom_id) + "," + r.method + "," + std::to_string(r.channel) + "," + fmt(r.psnr) + "," +
         fmt(r.ssim) + "\n";
  return s;
}

MismatchReport run_mismatch_study(const neuralgen::MvaeModel& model, std::uint64_t phantom_seed,
                                  const LesionSpec& lesion, const StudyConfig& cfg) {
  const auto spec = datasets::abdomen_phantom_spec(phantom_seed, cfg.grid.width, cfg.grid.pixel_mm);
  const auto truth = datasets::make_phantom_pair(spec, phantom_seed);
  const auto site = datasets::lung_lesion_site(spec);
  ImagePair with = truth;
  with.channel1 = datasets::insert_lesion(truth.channel1, site[0], site[1], lesion.radius_mm, lesion.intensity);

  const regularizers::Generator g(model);
  const auto layout = patchwork::build_layout(cfg.grid.width, cfg.grid.height, cfg.patch, cfg.overlap);
  // Same noise seed for both acquisitions: rays missing the lesion see identical counts.
  const auto noise = derive_seed(cfg.noise_seed, "mismatch");
  const auto sim_with = simulate_case(with, cfg, noise);
  const auto sim_without = simulate_case(truth, cfg, noise);
  const auto r_with = solvers::reconstruct_synergistic(sim_with.pet, sim_with.ct, g, layout, cfg.recon);
  const auto r_without = solvers::reconstruct_synergistic(sim_without.pet, sim_without.ct, g, layout, cfg.recon);

  const auto roi = datasets::disc_pixels(truth.channel1, site[0], site[1], lesion.radius_mm);
  const auto bg = datasets::annulus_pixels(truth.channel1, site[0], site[1], lesion.radius_mm, 2.0 * lesion.radius_mm);
  MismatchReport rep;
  rep.truth = with;
  rep.with_lesion = {r_with.x1, r_with.x2};
  rep.without_lesion = {r_without.x1, r_without.x2};
  const double gt_contrast = mean_at(with.channel1, roi) - mean_at(with.channel1, bg);
  if (gt_contrast == 0.0)
    rep.contrast_recovery = 0.0;
  else
    rep.contrast_recovery = (mean_at(r_with.x1, roi) - mean_at(r_with.x1, bg)) / gt_contrast;
  rep.ct_roi_with = mean_at(r_with.x2, roi);
  rep.ct_roi_without = mean_at(r_without.x2, roi);
  const double d = rep.ct_roi_with - rep.ct_roi_without;
  rep.ct_crosstalk = d == 0.0 ? 0.0 : std::abs(d) / std::abs(rep.ct_roi_without);
  return rep;
}

std::string mismatch_csv(const MismatchReport& r) {
  return "contrast_recovery,ct_crosstalk,ct_roi_with,ct_roi_without\n" + fmt(r.contrast_recovery) + "," +
         fmt(r.ct_crosstalk) + "," + fmt(r.ct_roi_with) + "," + fmt(r.ct_roi_without) + "\n";
}

TuningResult tune_betas(const neuralgen::MvaeModel& model, const StudyConfig& cfg, std::uint64_t calibration_seed,
                        const std::vector<double>& pet_grid, const std::vector<double>& ct_grid,
                        const std::vector<double>& pls_grid) {
  const regularizers::Generator g(model);
  const auto layout = patchwork::build_layout(cfg.grid.width, cfg.grid.height, cfg.patch, cfg.overlap);
  const auto truth = phantom_truth(calibration_seed, cfg.grid);
  const auto sim = simulate_case(truth, cfg, derive_seed(cfg.noise_seed, "calibration"));
  const auto base = solvers::reconstruct_synergistic(sim.pet, sim.ct, g, layout, unregularized(cfg.recon));

  TuningResult res;
  res.rows.push_back({"baseline", 0.0, 0.0, metrics::psnr(base.x1, truth.channel1), metrics::psnr(base.x2, truth.channel2)});
  double best = -std::numeric_limits<double>::infinity();
  for (double bp : pet_grid)
    for (double bc : ct_grid) {
      auto rc = cfg.recon;
      rc.beta_pet = bp;
      rc.beta_ct = bc;
      const auto r = solvers::reconstruct_synergistic(sim.pet, sim.ct, g, layout, rc);
      TuningRow row{"MVAE", bp, bc, metrics::psnr(r.x1, truth.channel1), metrics::psnr(r.x2, truth.channel2)};
      if (row.psnr1 + row.psnr2 > best) {
        best = row.psnr1 + row.psnr2;
        res.best_beta_pet = bp;
        res.best_beta_ct = bc;
      }
      res.rows.push_back(row);
    }
  best = -std::numeric_limits<double>::infinity();
  for (double b : pls_grid) {
    const auto p = run_pls(sim, base, cfg, model, b);
    TuningRow row{"PLS", b, b, metrics::psnr(p.x1, truth.channel1), metrics::psnr(p.x2, truth.channel2)};
    if (row.psnr1 + row.psnr2 > best) {
      best = row.psnr1 + row.psnr2;
      res.best_pls_beta = b;
    }
    res.rows.push_back(row);
  }
  return res;
}

std::string tuning_csv(const TuningResult& r) {
  std::string s = "method,beta_pet,beta_ct,psnr_ch1,psnr_ch2\n";
  for (const auto& row : r.rows)
    s += row.method + "," + fmt(row.beta_pet) + "," + fmt(row.beta_ct) + "," + fmt(row.psnr1) + "," + fmt(row.psnr2) + "\n";
  return s;
}

}  // namespace synrecon::experiments
