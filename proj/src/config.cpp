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

#include "synrecon/config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "synrecon/core.hpp"
#include "synrecon/image_io.hpp"
#include "synrecon/rng.hpp"

namespace synrecon::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& where, const std::string& v, const char* what) {
  throw ConfigError(where + ": cannot read '" + v + "' as " + what);
}

template <typename T>
T parse_number(const std::string& v, const std::string& where, const char* what) {
  T out{};
  const char* b = v.data();
  const char* e = v.data() + v.size();
  const auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) bad(where, v, what);
  return out;
}

void read(const std::string& v, const std::string& w, int& out) { out = parse_number<int>(v, w, "an integer"); }
void read(const std::string& v, const std::string& w, std::uint64_t& out) {
  out = parse_number<std::uint64_t>(v, w, "an unsigned integer");
}
void read(const std::string& v, const std::string& w, double& out) { out = parse_number<double>(v, w, "a number"); }
void read(const std::string& v, const std::string&, std::string& out) { out = v; }
void read(const std::string& v, const std::string& w, bool& out) {
  if (v == "true" || v == "1" || v == "yes")
    out = true;
  else if (v == "false" || v == "0" || v == "no")
    out = false;
  else
    bad(w, v, "a boolean");
}
template <typename T>
void read(const std::string& v, const std::string& w, std::vector<T>& out) {
  out.clear();
  for (const auto& item : split_list(v)) {
    T x{};
    read(item, w, x);
    out.push_back(x);
  }
}

std::string show(int v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(double v) {
  char buf[40];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}
std::string show(const std::string& v) { return v; }
std::string show(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string show(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + show(v[i]);
  return s;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field field(const char* section, const char* key, T RunConfig::*m) {
  return {section, key, [m](RunConfig& c, const std::string& v, const std::string& w) { read(v, w, c.*m); },
          [m](const RunConfig& c) { return show(c.*m); }};
}

const std::vector<Field>& fields() {
  using C = RunConfig;
  static const std::vector<Field> f = {
      field("run", "experiment", &C::experiment),
      field("run", "seed", &C::seed),
      field("run", "threads", &C::threads),
      field("run", "out", &C::out),
      field("dataset", "kind", &C::dataset),
      field("dataset", "idx_path", &C::idx_path),
      field("dataset", "train_images", &C::train_images),
      field("dataset", "train_patches", &C::train_patches),
      field("dataset", "test_images", &C::test_images),
      field("dataset", "grid", &C::grid),
      field("dataset", "pixel_mm", &C::pixel_mm),
      field("dataset", "patch", &C::patch),
      field("dataset", "overlap", &C::overlap),
      field("dataset", "edge_sigma", &C::edge_sigma),
      field("geometry", "pet_angles", &C::pet_angles),
      field("geometry", "pet_bins", &C::pet_bins),
      field("geometry", "pet_bin_mm", &C::pet_bin_mm),
      field("geometry", "ct_angles", &C::ct_angles),
      field("geometry", "ct_bins", &C::ct_bins),
      field("geometry", "ct_detector_mm", &C::ct_detector_mm),
      field("geometry", "ct_source_mm", &C::ct_source_mm),
      field("geometry", "ct_detector_dist_mm", &C::ct_detector_dist_mm),
      field("physics", "setting", &C::setting),
      field("physics", "hl_pet_tau", &C::hl_pet_tau),
      field("physics", "hl_ct_intensity", &C::hl_ct_intensity),
      field("physics", "lh_pet_tau", &C::lh_pet_tau),
      field("physics", "lh_ct_intensity", &C::lh_ct_intensity),
      field("physics", "background_fraction", &C::background_fraction),
      field("physics", "pet_mu_scale", &C::pet_mu_scale),
      field("model", "path", &C::model_path),
      field("model", "latent_dim", &C::latent_dim),
      field("model", "feature_dim", &C::feature_dim),
      field("model", "hidden", &C::hidden),
      field("train", "learning_rate", &C::learning_rate),
      field("train", "batch_size", &C::batch_size),
      field("train", "epochs", &C::epochs),
      field("train", "kl_weight", &C::kl_weight),
      field("train", "adam_beta1", &C::adam_beta1),
      field("train", "adam_beta2", &C::adam_beta2),
      field("train", "adam_epsilon", &C::adam_epsilon),
      field("train", "resume", &C::resume),
      field("solver", "eta", &C::eta),
      field("solver", "alpha", &C::alpha),
      field("solver", "outer_iterations", &C::outer_iterations),
      field("solver", "pet_sub_iterations", &C::pet_sub_iterations),
      field("solver", "ct_sub_iterations", &C::ct_sub_iterations),
      field("solver", "z_sub_iterations", &C::z_sub_iterations),
      field("solver", "init_iterations", &C::init_iterations),
      field("solver", "hl_beta_pet", &C::hl_beta_pet),
      field("solver", "hl_beta_ct", &C::hl_beta_ct),
      field("solver", "lh_beta_pet", &C::lh_beta_pet),
      field("solver", "lh_beta_ct", &C::lh_beta_ct),
      field("solver", "tune_pet_grid", &C::tune_pet_grid),
      field("solver", "tune_ct_grid", &C::tune_ct_grid),
      field("pls", "eps", &C::pls_eps),
      field("pls", "iterations", &C::pls_iterations),
      field("pls", "hl_beta", &C::hl_pls_beta),
      field("pls", "lh_beta", &C::lh_pls_beta),
      field("pls", "tune_grid", &C::tune_pls_grid),
      field("denoise", "sigma1", &C::sigma1),
      field("denoise", "sigma2", &C::sigma2),
      field("denoise", "beta", &C::denoise_beta),
      field("denoise", "etas", &C::etas),
      field("denoise", "alternations", &C::alternations),
      field("denoise", "restarts", &C::restarts),
      field("generate", "count", &C::generate_count),
      field("generate", "mode", &C::generate_mode),
      field("lesion", "radius_mm", &C::lesion_radius_mm),
      field("lesion", "intensity", &C::lesion_intensity),
      field("eval", "reference", &C::eval_reference),
      field("eval", "images", &C::eval_images),
      field("thresholds", "check", &C::check_thresholds),
      field("thresholds", "min_gain_db", &C::min_gain_db),
      field("thresholds", "min_contrast", &C::min_contrast),
      field("thresholds", "max_crosstalk", &C::max_crosstalk),
  };
  return f;
}

}  // namespace

RunConfig parse(const std::string& text, const std::string& origin) {
  std::map<std::pair<std::string, std::string>, const Field*> index;
  std::set<std::string> sections;
  for (const auto& f : fields()) {
    index[{f.section, f.key}] = &f;
    sections.insert(f.section);
  }
  RunConfig c;
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    line = trim(line);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const auto it = index.find({section, key});
    if (it == index.end()) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert({section, key}).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    it->second->set(c, value, where + " [" + section + "] " + key);
  }
  validate(c);
  return c;
}

RunConfig load(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError&) {
    throw ConfigError("cannot read config file " + path);
  }
  return parse(text, path);
}

std::string echo(const RunConfig& c) {
  std::string s, section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      s += (section.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    s += f.key + " = " + f.get(c) + "\n";
  }
  return s;
}

std::uint64_t hash(const RunConfig& c) { return fnv1a(echo(c)); }

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.experiment == "petct" || c.experiment == "eta_sweep", "[run] experiment must be petct or eta_sweep");
  need(c.threads >= 0, "[run] threads must be >= 0");
  need(c.dataset == "abdomen" || c.dataset == "glyph" || c.dataset == "idx", "[dataset] kind must be abdomen, glyph or idx");
  if (c.dataset == "idx") {
    need(!c.idx_path.empty(), "[dataset] idx_path is required for kind = idx");
    need(std::filesystem::exists(c.idx_path), "[dataset] idx_path does not exist: " + c.idx_path);
  }
  need(c.train_images >= 0 && c.test_images >= 0, "[dataset] image counts must be >= 0");
  need(c.grid > 0 && c.pixel_mm > 0.0, "[dataset] grid and pixel_mm must be positive");
  need(c.patch > 0 && c.patch <= c.grid, "[dataset] patch must lie in [1, grid]");
  need(c.overlap >= 0.0 && c.overlap < 1.0, "[dataset] overlap must lie in [0, 1)");
  need(c.pet_angles > 0 && c.pet_bins > 0 && c.ct_angles > 0 && c.ct_bins > 0, "[geometry] sizes must be positive");
  need(c.setting == "HL" || c.setting == "LH", "[physics] setting must be HL or LH");
  need(c.hl_pet_tau > 0 && c.lh_pet_tau > 0 && c.hl_ct_intensity > 0 && c.lh_ct_intensity > 0,
       "[physics] dose presets must be positive");
  need(c.background_fraction >= 0.0 && c.pet_mu_scale >= 0.0, "[physics] background and mu scale must be >= 0");
  need(c.latent_dim > 0 && c.feature_dim > 0, "[model] sizes must be positive");
  for (int h : c.hidden) need(h > 0, "[model] hidden sizes must be positive");
  need(c.learning_rate > 0.0, "[train] learning_rate must be positive");
  need(c.batch_size > 0 && c.epochs >= 0, "[train] batch_size > 0 and epochs >= 0 required");
  need(c.kl_weight >= 0.0, "[train] kl_weight must be >= 0");
  need(c.eta >= 0.0 && c.eta <= 1.0, "[solver] eta must lie in [0, 1]");
  need(c.alpha >= 0.0, "[solver] alpha must be >= 0");
  need(c.outer_iterations >= 0 && c.pet_sub_iterations >= 0 && c.ct_sub_iterations >= 0 && c.z_sub_iterations >= 0 &&
           c.init_iterations >= 0,
       "[solver] iteration counts must be >= 0");
  need(c.hl_beta_pet >= 0 && c.hl_beta_ct >= 0 && c.lh_beta_pet >= 0 && c.lh_beta_ct >= 0, "[solver] betas must be >= 0");
  need(c.pls_eps > 0.0 && c.pls_iterations >= 0 && c.hl_pls_beta >= 0 && c.lh_pls_beta >= 0, "[pls] invalid settings");
  need(c.sigma1 >= 0.0 && c.sigma2 >= 0.0 && c.denoise_beta >= 0.0, "[denoise] sigmas and beta must be >= 0");
  for (double e : c.etas) need(e >= 0.0 && e <= 1.0, "[denoise] etas must lie in [0, 1]");
  need(c.alternations >= 1 && c.restarts >= 0, "[denoise] alternations >= 1 and restarts >= 0 required");
  need(c.generate_mode == "uniform" || c.generate_mode == "normal", "[generate] mode must be uniform or normal");
  need(c.lesion_radius_mm > 0.0, "[lesion] radius must be positive");
}

}  // namespace synrecon::config
