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

#include "synrecon/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include "synrecon/datasets.hpp"
#include "synrecon/experiments.hpp"
#include "synrecon/image_io.hpp"
#include "synrecon/metrics.hpp"
#include "synrecon/neuralgen.hpp"
#include "synrecon/rng.hpp"

namespace synrecon::commands {

namespace fs = std::filesystem;
using config::RunConfig;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Output directory that remembers what it wrote.
class Output {
 public:
  explicit Output(const RunConfig& cfg) : dir_(cfg.out) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_ + ": " + ec.message());
  }

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void text(const std::string& name, const std::string& content) {
    io::write_text(path(name), content);
    add(name);
  }
  void pgm(const std::string& name, const Image& img) {
    io::write_pgm16(path(name), img);
    add(name);
    add(name + ".meta");
  }
  void add(const std::string& name) {
    if (std::find(report.files.begin(), report.files.end(), name) == report.files.end()) report.files.push_back(name);
  }
  void check(const std::string& name, bool pass, const std::string& detail) {
    report.checks.push_back({name, pass, detail});
  }

  /// config.ini, checks.txt and the manifest of every artifact.
  Report finish(const RunConfig& cfg, const std::string& command) {
    text("config.ini", config::echo(cfg));
    std::string checks;
    for (const auto& c : report.checks) checks += std::string(c.pass ? "PASS " : "FAIL ") + c.name + " " + c.detail + "\n";
    text("checks.txt", checks);
    auto names = report.files;
    std::sort(names.begin(), names.end());
    std::string m = "command " + command + "\nconfig_hash " + hex(config::hash(cfg)) + "\n";
    for (const auto& n : names) {
      const auto bytes = io::read_file(path(n));
      m += n + " " + std::to_string(bytes.size()) + " " + hex(fnv1a(bytes)) + "\n";
    }
    io::write_text(path("manifest.txt"), m);
    report.files.push_back("manifest.txt");
    return report;
  }

  Report report;

 private:
  std::string dir_;
};

std::uint64_t seed_for(const RunConfig& cfg, const char* label) { return derive_seed(cfg.seed, label); }

bool is_sweep(const RunConfig& cfg) { return cfg.experiment == "eta_sweep"; }

// ---- datasets ----

std::vector<ImagePair> digit_pairs(const RunConfig& cfg, bool test) {
  std::vector<Image> digits;
  if (cfg.dataset == "idx") {
    auto all = datasets::load_idx_images(cfg.idx_path, cfg.grid);
    const std::size_t need = static_cast<std::size_t>(cfg.train_images + cfg.test_images);
    if (all.size() < need)
      throw FormatError(cfg.idx_path + ": holds " + std::to_string(all.size()) + " images, need " + std::to_string(need));
    const auto b = all.begin() + (test ? cfg.train_images : 0);
    digits.assign(b, b + (test ? cfg.test_images : cfg.train_images));
  } else {
    const int n = test ? cfg.test_images : cfg.train_images;
    digits = datasets::make_glyph_images(static_cast<std::size_t>(n), seed_for(cfg, test ? "datasets.test" : "datasets.train"));
  }
  for (auto& d : digits)
    if (d.width != cfg.grid) d = datasets::pad_to(d, cfg.grid);
  return datasets::make_edge_pairs(digits, cfg.edge_sigma);
}

std::uint64_t phantom_seed(const RunConfig& cfg, const char* label, int i) {
  return derive_seed(seed_for(cfg, label), static_cast<std::uint64_t>(i));
}

std::vector<ImagePair> phantom_pairs(const RunConfig& cfg, const char* label, int n) {
  std::vector<ImagePair> pairs;
  for (int i = 0; i < n; ++i) {
    const auto s = phantom_seed(cfg, label, i);
    pairs.push_back(datasets::make_phantom_pair(datasets::abdomen_phantom_spec(s, cfg.grid, cfg.pixel_mm), s));
  }
  return pairs;
}

std::vector<ImagePair> train_pairs(const RunConfig& cfg) {
  if (cfg.train_images <= 0) throw ParameterError("[dataset] train_images must be positive");
  return is_sweep(cfg) ? digit_pairs(cfg, false) : phantom_pairs(cfg, "datasets.train", cfg.train_images);
}

std::vector<ImagePair> test_pairs(const RunConfig& cfg) {
  if (cfg.test_images <= 0) throw ParameterError("[dataset] test_images must be positive");
  return is_sweep(cfg) ? digit_pairs(cfg, true) : phantom_pairs(cfg, "datasets.test", cfg.test_images);
}

struct TrainingData {
  datasets::PatchSet set;
  datasets::NormalizationConstants norm;
  int patch_width = 0;
};

TrainingData training_data(const RunConfig& cfg) {
  const auto pairs = train_pairs(cfg);
  TrainingData d;
  d.norm = datasets::compute_normalization(pairs);
  if (is_sweep(cfg)) {
    d.set = datasets::pairs_to_patchset(pairs);
    d.patch_width = cfg.grid;
  } else {
    if (cfg.train_patches == 0) throw ParameterError("[dataset] train_patches must be positive");
    d.set = datasets::extract_training_patches(pairs, cfg.patch, cfg.train_patches, seed_for(cfg, "datasets.patches"));
    d.patch_width = cfg.patch;
  }
  datasets::normalize(d.set, d.norm);
  return d;
}

neuralgen::MvaeModel load_model(const RunConfig& cfg) {
  const auto p = model_path(cfg);
  if (!fs::exists(p)) throw IoError("model file not found: " + p);
  return neuralgen::load_model(p);
}

// ---- PET/CT study setup ----

experiments::StudyConfig study_config(const RunConfig& cfg) {
  experiments::StudyConfig s;
  s.setting = experiments::parse_setting(cfg.setting);
  const bool hl = s.setting == experiments::Setting::HL;
  s.dose = hl ? experiments::DosePreset{cfg.hl_pet_tau, cfg.hl_ct_intensity}
              : experiments::DosePreset{cfg.lh_pet_tau, cfg.lh_ct_intensity};
  s.background_fraction = cfg.background_fraction;
  s.pet_mu_scale = cfg.pet_mu_scale;
  s.grid = {cfg.grid, cfg.grid, cfg.pixel_mm};
  s.pet_geometry = {cfg.pet_angles, cfg.pet_bins, cfg.pet_bin_mm};
  s.ct_geometry = {cfg.ct_angles, cfg.ct_bins, cfg.ct_detector_mm, cfg.ct_source_mm, cfg.ct_detector_dist_mm};
  s.patch = cfg.patch;
  s.overlap = cfg.overlap;
  auto& r = s.recon;
  r.eta = cfg.eta;
  r.alpha = cfg.alpha;
  r.beta_pet = hl ? cfg.hl_beta_pet : cfg.lh_beta_pet;
  r.beta_ct = hl ? cfg.hl_beta_ct : cfg.lh_beta_ct;
  r.outer_iterations = cfg.outer_iterations;
  r.pet_sub_iterations = cfg.pet_sub_iterations;
  r.ct_sub_iterations = cfg.ct_sub_iterations;
  r.init_iterations = cfg.init_iterations;
  r.pet_mu_scale = cfg.pet_mu_scale;
  r.latent_lbfgs.max_iterations = cfg.z_sub_iterations;
  solvers::validate(r);
  s.pls.beta = hl ? cfg.hl_pls_beta : cfg.lh_pls_beta;
  s.pls.eta = cfg.eta;
  s.pls.eps = cfg.pls_eps;
  s.pls.lbfgs.max_iterations = cfg.pls_iterations;
  s.pls.init_iterations = cfg.init_iterations;
  for (int i = 0; i < cfg.test_images; ++i) s.phantom_seeds.push_back(phantom_seed(cfg, "datasets.test", i));
  s.noise_seed = seed_for(cfg, "physics.noise");
  return s;
}

void require_petct(const RunConfig& cfg, const char* cmd) {
  if (is_sweep(cfg)) throw ConfigError(std::string(cmd) + " needs [run] experiment = petct");
}

Image row_tile(const std::vector<Image>& imgs) { return io::tile(imgs, static_cast<int>(imgs.size())); }

}  // namespace

experiments::StudyConfig petct_study(const RunConfig& cfg) { return study_config(cfg); }

bool Report::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string model_path(const RunConfig& cfg) {
  const fs::path p(cfg.model_path);
  return p.is_absolute() ? p.string() : (fs::path(cfg.out) / p).string();
}

Report make_data(const RunConfig& cfg) {
  Output out(cfg);
  const auto data = training_data(cfg);
  datasets::save_patches(out.path("train_patches.mvps"), data.set);
  out.add("train_patches.mvps");
  std::string info = "channels " + std::to_string(data.set.channels) + "\npatch_width " + std::to_string(data.patch_width) +
                     "\ncount " + std::to_string(data.set.count) + "\noverlap " + fmt(cfg.overlap) + "\nscale " +
                     fmt(data.norm.scale[0]) + " " + fmt(data.norm.scale[1]) + "\n";
  out.text("dataset.txt", info);
  const auto test = test_pairs(cfg);
  for (std::size_t i = 0; i < test.size(); ++i) {
    out.pgm("test_" + std::to_string(i) + "_ch1.pgm", test[i].channel1);
    out.pgm("test_" + std::to_string(i) + "_ch2.pgm", test[i].channel2);
  }
  return out.finish(cfg, "make-data");
}

Report train(const RunConfig& cfg) {
  Output out(cfg);
  const auto data = training_data(cfg);
  neuralgen::MvaeModel model;
  neuralgen::AdamState adam;
  std::vector<double> history;
  int first = 0;
  const std::string adam_path = model_path(cfg) + ".adam";
  const std::string loss_path = out.path("loss.csv");
  if (cfg.resume) {
    model = load_model(cfg);
    if (model.patch_width != data.patch_width) throw ShapeError("resume: model patch width does not match the dataset");
    if (fs::exists(adam_path)) adam = neuralgen::deserialize_adam(io::read_file(adam_path));
    if (fs::exists(loss_path)) {
      std::istringstream in(io::read_file(loss_path));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("epoch", 0) == 0) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw FormatError(loss_path + ": malformed row '" + line + "'");
        try {
          history.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
          throw FormatError(loss_path + ": malformed loss value in '" + line + "'");
        }
      }
    }
    first = static_cast<int>(history.size());
  } else {
    neuralgen::ModelShape shape;
    shape.patch_width = data.patch_width;
    shape.latent_dim = cfg.latent_dim;
    shape.feature_dim = cfg.feature_dim;
    shape.hidden = cfg.hidden;
    model = neuralgen::init_model(shape, data.norm.scale, seed_for(cfg, "neuralgen.init"));
  }
  neuralgen::TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.epochs = std::max(0, cfg.epochs - first);
  tc.kl_weight = cfg.kl_weight;
  tc.seed = seed_for(cfg, "neuralgen.train");
  tc.beta1 = cfg.adam_beta1;
  tc.beta2 = cfg.adam_beta2;
  tc.epsilon = cfg.adam_epsilon;
  tc.first_epoch = first;
  const auto r = neuralgen::train(model, data.set, tc, &adam);
  history.insert(history.end(), r.loss_history.begin(), r.loss_history.end());

  neuralgen::save_model(model_path(cfg), model);
  io::write_text(adam_path, neuralgen::serialize(adam));
  if (!fs::path(cfg.model_path).is_absolute()) {
    out.add(cfg.model_path);
    out.add(cfg.model_path + ".adam");
  }
  std::string csv = "# learning_rate=" + fmt(cfg.learning_rate) + " batch_size=" + std::to_string(cfg.batch_size) +
                    " kl_weight=" + fmt(cfg.kl_weight) + "\nepoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) csv += std::to_string(e) + "," + fmt(history[e]) + "\n";
  out.text("loss.csv", csv);
  out.check("train.converged", !r.diverged, r.diverged ? "loss exceeded the divergence bound" : "");
  return out.finish(cfg, "train");
}

Report generate(const RunConfig& cfg) {
  if (cfg.generate_count <= 0) throw ParameterError("[generate] count must be positive");
  const auto model = load_model(cfg);
  Output out(cfg);
  const auto mode = cfg.generate_mode == "normal" ? neuralgen::PriorMode::normal : neuralgen::PriorMode::uniform;
  const auto base = seed_for(cfg, "neuralgen.generate");
  std::vector<std::vector<Image>> tiles(model.branches);
  for (int i = 0; i < cfg.generate_count; ++i) {
    const auto z = neuralgen::sample_prior(model.latent_dim, derive_seed(base, static_cast<std::uint64_t>(i)), mode);
    const auto g = neuralgen::decode(model, z);
    for (int k = 0; k < model.branches; ++k) {
      Image img(model.patch_width, model.patch_width, cfg.pixel_mm);
      for (std::size_t j = 0; j < img.size(); ++j) img[j] = g[k][j] * model.scale[k];
      tiles[k].push_back(std::move(img));
    }
  }
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.generate_count))));
  for (int k = 0; k < model.branches; ++k) out.pgm("generate_ch" + std::to_string(k + 1) + ".pgm", io::tile(tiles[k], cols));
  return out.finish(cfg, "generate");
}

Report denoise(const RunConfig& cfg) {
  if (!is_sweep(cfg)) throw ConfigError("denoise needs [run] experiment = eta_sweep");
  const auto model = load_model(cfg);
  Output out(cfg);
  const auto pairs = test_pairs(cfg);
  experiments::EtaSweepConfig ec;
  ec.sigma1 = cfg.sigma1;
  ec.sigma2 = cfg.sigma2;
  ec.beta = cfg.denoise_beta;
  ec.etas = cfg.etas;
  ec.alternations = cfg.alternations;
  ec.restarts = cfg.restarts;
  const std::size_t ne = ec.etas.size();
  std::vector<std::array<double, 2>> mean(ne, {0.0, 0.0});
  std::vector<double> dist(ne, 0.0);
  std::vector<std::vector<double>> first_points;
  std::vector<double> first_target;
  const auto base = seed_for(cfg, "evalkit.denoise");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto r = experiments::run_eta_sweep(model, pairs[i], ec, derive_seed(base, static_cast<std::uint64_t>(i)));
    for (std::size_t e = 0; e < ne; ++e) {
      mean[e][0] += r.points[e].psnr1 / static_cast<double>(pairs.size());
      mean[e][1] += r.points[e].psnr2 / static_cast<double>(pairs.size());
      double d2 = 0.0;
      for (std::size_t j = 0; j < r.target_latent.size(); ++j) {
        const double d = r.points[e].z_encoded[j] - r.target_latent[j];
        d2 += d * d;
      }
      dist[e] += std::sqrt(d2) / static_cast<double>(pairs.size());
    }
    if (i == 0) {
      out.text("eta_sweep_pair0.csv", experiments::eta_sweep_csv(r));
      std::vector<Image> c1{r.clean.channel1, r.noisy.channel1}, c2{r.clean.channel2, r.noisy.channel2};
      for (const auto& p : r.points) {
        c1.push_back(p.denoised.channel1);
        c2.push_back(p.denoised.channel2);
        first_points.push_back(p.z_encoded);
      }
      first_target = r.target_latent;
      out.pgm("denoise_ch1.pgm", row_tile(c1));
      out.pgm("denoise_ch2.pgm", row_tile(c2));
    }
  }
  out.text("eta_sweep.csv", experiments::eta_sweep_csv(ec.etas, mean));
  std::string dcsv = "eta,latent_distance\n";
  for (std::size_t e = 0; e < ne; ++e) dcsv += fmt(ec.etas[e]) + "," + fmt(dist[e]) + "\n";
  out.text("latent_distance.csv", dcsv);

  // PCA of the training latents with the eta points of the first pair.
  const auto train = train_pairs(cfg);
  const regularizers::Generator g(model);
  std::vector<neuralgen::Mat<double>> u(2, neuralgen::Mat<double>(g.dim, static_cast<Eigen::Index>(train.size())));
  for (std::size_t i = 0; i < train.size(); ++i)
    for (int j = 0; j < g.dim; ++j) {
      u[0](j, static_cast<Eigen::Index>(i)) = train[i].channel1[j] / g.scale[0];
      u[1](j, static_cast<Eigen::Index>(i)) = train[i].channel2[j] / g.scale[1];
    }
  const auto mu = neuralgen::encode_mean<double>(g, u);
  std::vector<std::vector<double>> latents(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    latents[i].assign(mu.col(static_cast<Eigen::Index>(i)).data(), mu.col(static_cast<Eigen::Index>(i)).data() + mu.rows());
  auto extra = first_points;
  extra.push_back(first_target);
  out.text("pca.csv", experiments::pca_csv(metrics::pca_latents(latents, extra), ec.etas));

  if (cfg.check_thresholds) {
    auto find = [&](double eta) -> int {
      for (std::size_t e = 0; e < ne; ++e)
        if (std::abs(ec.etas[e] - eta) < 1e-12) return static_cast<int>(e);
      return -1;
    };
    const int e0 = find(0.0), eh = find(0.5), e1 = find(1.0), e01 = find(0.1), e75 = find(0.75);
    if (e0 >= 0 && eh >= 0 && e1 >= 0) {
      out.check("denoise.ch2_peak_at_half", mean[eh][1] > mean[e0][1] && mean[eh][1] > mean[e1][1],
                "psnr2(0)=" + fmt(mean[e0][1]) + " psnr2(0.5)=" + fmt(mean[eh][1]) + " psnr2(1)=" + fmt(mean[e1][1]));
      bool minimum = true;
      for (std::size_t e = 0; e < ne; ++e)
        if (static_cast<int>(e) != e0 && !(mean[e][0] > mean[e0][0])) minimum = false;
      out.check("denoise.ch1_min_at_zero", minimum, "psnr1(0)=" + fmt(mean[e0][0]));
    }
    if (e01 >= 0 && eh >= 0 && e75 >= 0 && e1 >= 0) {
      const bool ordered = dist[e01] > dist[eh] && dist[eh] < dist[e75] && dist[e75] < dist[e1];
      out.check("denoise.latent_distance_order", ordered,
                "d(0.1)=" + fmt(dist[e01]) + " d(0.5)=" + fmt(dist[eh]) + " d(0.75)=" + fmt(dist[e75]) +
                    " d(1)=" + fmt(dist[e1]));
    }
  }
  return out.finish(cfg, "denoise");
}

Report reconstruct(const RunConfig& cfg) {
  require_petct(cfg, "reconstruct");
  const auto model = load_model(cfg);
  Output out(cfg);
  const auto sc = study_config(cfg);
  const auto res = experiments::run_petct_study(model, sc, true);
  const auto layout = patchwork::build_layout(cfg.grid, cfg.grid, cfg.patch, cfg.overlap);
  out.text("study.csv", experiments::study_csv(res.rows));
  for (std::size_t i = 0; i < res.cases.size(); ++i) {
    const auto& c = res.cases[i];
    const std::string id = std::to_string(i);
    out.text("trace_" + id + ".csv", solvers::trace_csv(c.trace));
    out.pgm("recon_" + id + "_ch1.pgm", row_tile({c.truth.channel1, c.baseline.channel1, c.mvae.channel1, c.pls.channel1}));
    out.pgm("recon_" + id + "_ch2.pgm", row_tile({c.truth.channel2, c.baseline.channel2, c.mvae.channel2, c.pls.channel2}));
    regularizers::save_latents(out.path("latents_" + id + ".mvzs"), c.latents, layout);
    out.add("latents_" + id + ".mvzs");
  }
  std::string summary = "method,channel,mean_psnr,mean_ssim\n";
  const std::pair<const char*, int> keys[] = {{"MLEM", 1}, {"WLS", 2}, {"MVAE", 1}, {"MVAE", 2}, {"PLS", 1}, {"PLS", 2}};
  for (const auto& [m, ch] : keys)
    summary += std::string(m) + "," + std::to_string(ch) + "," + fmt(res.mean_psnr(m, ch)) + "," + fmt(res.mean_ssim(m, ch)) + "\n";
  out.text("summary.csv", summary);

  if (cfg.check_thresholds) {
    const bool hl = sc.setting == experiments::Setting::HL;
    const int ch = hl ? 2 : 1;
    const double b = res.mean_psnr(hl ? "WLS" : "MLEM", ch);
    const double mv = res.mean_psnr("MVAE", ch), pl = res.mean_psnr("PLS", ch);
    const std::string tag = std::string(experiments::setting_name(sc.setting));
    out.check("reconstruct." + tag + ".mvae_gain", mv - b >= cfg.min_gain_db,
              "baseline=" + fmt(b) + " mvae=" + fmt(mv) + " gain=" + fmt(mv - b) + " dB, need " + fmt(cfg.min_gain_db));
    out.check("reconstruct." + tag + ".pls_beats_baseline", pl > b, "baseline=" + fmt(b) + " pls=" + fmt(pl));
  }
  return out.finish(cfg, "reconstruct");
}

Report eval(const RunConfig& cfg) {
  if (cfg.eval_reference.empty() || cfg.eval_images.empty())
    throw ConfigError("eval needs [eval] reference and images");
  Output out(cfg);
  const Image ref = io::read_pgm16(cfg.eval_reference);
  std::string csv = "image,psnr,ssim\n";
  for (const auto& p : cfg.eval_images) {
    const Image x = io::read_pgm16(p);
    if (!x.same_grid(ref)) throw ShapeError("eval: " + p + " does not match the reference grid");
    const double ps = metrics::psnr(x, ref);
    csv += p + "," + (std::isinf(ps) ? std::string("inf") : fmt(ps)) + "," + fmt(metrics::ssim(x, ref)) + "\n";
  }
  out.text("eval.csv", csv);
  return out.finish(cfg, "eval");
}

Report mismatch(const RunConfig& cfg) {
  require_petct(cfg, "mismatch");
  const auto model = load_model(cfg);
  Output out(cfg);
  const auto sc = study_config(cfg);
  const auto rep = experiments::run_mismatch_study(model, phantom_seed(cfg, "datasets.test", 0),
                                                   {cfg.lesion_radius_mm, cfg.lesion_intensity}, sc);
  out.text("mismatch.csv", experiments::mismatch_csv(rep));
  out.pgm("mismatch_ch1.pgm", row_tile({rep.truth.channel1, rep.with_lesion.channel1, rep.without_lesion.channel1}));
  out.pgm("mismatch_ch2.pgm", row_tile({rep.truth.channel2, rep.with_lesion.channel2, rep.without_lesion.channel2}));
  if (cfg.check_thresholds) {
    out.check("mismatch.contrast_recovery", rep.contrast_recovery > cfg.min_contrast,
              fmt(rep.contrast_recovery) + " need > " + fmt(cfg.min_contrast));
    out.check("mismatch.ct_crosstalk", rep.ct_crosstalk < cfg.max_crosstalk,
              fmt(rep.ct_crosstalk) + " need < " + fmt(cfg.max_crosstalk));
  }
  return out.finish(cfg, "mismatch");
}

Report tune(const RunConfig& cfg) {
  require_petct(cfg, "tune");
  const auto model = load_model(cfg);
  Output out(cfg);
  const auto sc = study_config(cfg);
  const auto r = experiments::tune_betas(model, sc, phantom_seed(cfg, "datasets.calibration", 0), cfg.tune_pet_grid,
                                         cfg.tune_ct_grid, cfg.tune_pls_grid);
  out.text("tuning.csv", experiments::tuning_csv(r));
  const std::string p = cfg.setting == "HL" ? "hl_" : "lh_";
  out.text("tuned.ini", "[solver]\n" + p + "beta_pet = " + fmt(r.best_beta_pet) + "\n" + p + "beta_ct = " +
                            fmt(r.best_beta_ct) + "\n\n[pls]\n" + p + "beta = " + fmt(r.best_pls_beta) + "\n");
  return out.finish(cfg, "tune");
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> n{"make-data", "train", "generate", "denoise", "reconstruct", "eval", "mismatch", "tune"};
  return n;
}

Report run(const std::string& command, const RunConfig& cfg) {
  using Fn = Report (*)(const RunConfig&);
  static const std::map<std::string, Fn> table{{"make-data", make_data}, {"train", train},
                                               {"generate", generate},   {"denoise", denoise},
                                               {"reconstruct", reconstruct}, {"eval", eval},
                                               {"mismatch", mismatch},   {"tune", tune}};
  const auto it = table.find(command);
  if (it == table.end()) throw ConfigError("unknown command '" + command + "'");
  return it->second(cfg);
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) || dynamic_cast<const ShapeError*>(&e))
    return 3;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 4;
  return 1;
}

int execute(const std::string& command, const RunConfig& cfg, std::ostream& log) {
  try {
    const auto r = run(command, cfg);
    for (const auto& c : r.checks) log << (c.pass ? "PASS " : "FAIL ") << c.name << " " << c.detail << "\n";
    log << command << ": wrote " << r.files.size() << " files to " << cfg.out << "\n";
    return r.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return exit_code(e);
  }
}

}  // namespace synrecon::commands
