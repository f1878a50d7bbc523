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

#include "synrecon/regularizers.hpp"

#include <cmath>
#include <cstring>

#include "synrecon/image_io.hpp"
#include "synrecon/rng.hpp"

namespace synrecon::regularizers {

namespace {

using neuralgen::Vec;

constexpr char kMagic[4] = {'M', 'V', 'Z', 'S'};

void check_images(const patchwork::PatchLayout& layout, const Image& x1, const Image& x2, const Generator& g) {
  if (x1.width != layout.grid_width || x1.height != layout.grid_height || !x1.same_grid(x2))
    throw ShapeError("regularizer: images do not match the patch layout");
  if (layout.dim() != g.dim) throw ShapeError("regularizer: patch size does not match the model");
  if (g.branches() != 2) throw ShapeError("regularizer: two-channel model required");
}

void check_state(const patchwork::PatchLayout& layout, const LatentState& s, const Generator& g) {
  if (s.latent_dim != g.latent_dim || s.z.size() != layout.count() * static_cast<std::size_t>(g.latent_dim))
    throw ShapeError("regularizer: latent state does not match layout and model");
}

std::vector<Vec<double>> targets(const patchwork::PatchLayout& layout, const Image& x1, const Image& x2, std::size_t p) {
  std::vector<Vec<double>> t(2, Vec<double>(layout.dim()));
  patchwork::extract(layout, x1, p, std::span(t[0].data(), t[0].size()));
  patchwork::extract(layout, x2, p, std::span(t[1].data(), t[1].size()));
  return t;
}

double patch_objective(const Generator& g, const std::vector<Vec<double>>& t, const ChannelWeights& w,
                       std::span<const double> z, std::span<double> grad) {
  const Eigen::Map<const Vec<double>> zv(z.data(), z.size());
  Vec<double> gz;
  double v = neuralgen::fit_value_grad<double>(g, zv, t, w.eta, grad.empty() ? nullptr : &gz);
  if (!grad.empty()) std::copy(gz.data(), gz.data() + gz.size(), grad.begin());
  if (w.alpha > 0.0) {
    std::vector<double> hg(z.size());
    v += w.alpha * latent_penalty_H(z, hg);
    if (!grad.empty())
      for (std::size_t i = 0; i < z.size(); ++i) grad[i] += w.alpha * hg[i];
  }
  return v;
}

LatentState fit_impl(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2,
                     const ChannelWeights& w, const LatentState& state, const solvers::LbfgsConfig& cfg,
                     bool parallel) {
  check_images(layout, x1, x2, g);
  check_state(layout, state, g);
  solvers::validate(cfg);
  LatentState out = state;
  out.flagged.clear();
  ++out.iteration;
  const long P = static_cast<long>(layout.count());
  std::vector<char> failed(P, 0);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (long p = 0; p < P; ++p) {
    const auto t = targets(layout, x1, x2, static_cast<std::size_t>(p));
    auto z = out.at(static_cast<std::size_t>(p));
    const solvers::Objective f = [&](std::span<const double> zz, std::span<double> gg) {
      return patch_objective(g, t, w, zz, gg);
    };
    std::vector<double> trial(z.begin(), z.end());
    const auto tr = solvers::lbfgs_minimize(f, trial, cfg);
    // The iterate only moves on accepted (strictly decreasing) steps.
    std::copy(trial.begin(), trial.end(), z.begin());
    failed[p] = tr.line_search_failed && tr.iterations == 0;
  }
  for (long p = 0; p < P; ++p)
    if (failed[p]) out.flagged.push_back(static_cast<std::size_t>(p));
  return out;
}

}  // namespace

void validate(const SynergyWeights& w) {
  if (!(w.eta >= 0.0 && w.eta <= 1.0)) throw ParameterError("weights: eta must lie in [0, 1]");
  if (!(w.beta >= 0.0)) throw ParameterError("weights: beta must be non-negative");
  if (!(w.alpha >= 0.0)) throw ParameterError("weights: alpha must be non-negative");
}

ChannelWeights channel_weights(const SynergyWeights& w) {
  validate(w);
  return {{w.eta, 1.0 - w.eta}, w.alpha};
}

double latent_penalty_H(std::span<const double> z, std::span<double> grad) {
  if (!grad.empty()) {
    if (grad.size() != z.size()) throw ShapeError("latent_penalty_H: gradient size mismatch");
    std::copy(z.begin(), z.end(), grad.begin());
  }
  return 0.5 * dot(z, z);
}

double r_theta_value(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2,
                     const ChannelWeights& w, const LatentState& state) {
  if (w.eta.size() != 2) throw ShapeError("r_theta_value: need two channel weights");
  const auto q = patch_misfits(g, layout, x1, x2, state);
  double total = w.eta[0] * q[0] + w.eta[1] * q[1];
  if (w.alpha > 0.0)
    for (std::size_t p = 0; p < state.count(); ++p) total += w.alpha * latent_penalty_H(state.at(p));
  return total;
}

double r_theta_value(const neuralgen::MvaeModel& m, const patchwork::PatchLayout& layout, const Image& x1,
                     const Image& x2, const SynergyWeights& w, const LatentState& state) {
  return r_theta_value(Generator(m), layout, x1, x2, channel_weights(w), state);
}

std::vector<double> patch_misfits(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1,
                                  const Image& x2, const LatentState& state) {
  check_images(layout, x1, x2, g);
  check_state(layout, state, g);
  const auto P = static_cast<Eigen::Index>(layout.count());
  const Eigen::Map<const neuralgen::Mat<double>> z(state.z.data(), g.latent_dim, P);
  const Image* x[2] = {&x1, &x2};
  std::vector<double> q(2, 0.0);
  for (int k = 0; k < 2; ++k) {
    const neuralgen::Mat<double> out = neuralgen::forward<double>(g.decoders[k], z) * g.scale[k];
    const auto u = patchwork::extract_all(layout, *x[k]);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double r = out.data()[i] - u[i];
      s += r * r;
    }
    q[k] = 0.5 * s;
  }
  return q;
}

LatentState fit_latents(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2,
                        const ChannelWeights& w, const LatentState& state, const solvers::LbfgsConfig& cfg) {
  return fit_impl(g, layout, x1, x2, w, state, cfg, true);
}

LatentState fit_latents(const neuralgen::MvaeModel& m, const patchwork::PatchLayout& layout, const Image& x1,
                        const Image& x2, const SynergyWeights& w, const LatentState& state,
                        const solvers::LbfgsConfig& cfg) {
  return fit_latents(Generator(m), layout, x1, x2, channel_weights(w), state, cfg);
}

namespace reference {
LatentState fit_latents(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2,
                        const ChannelWeights& w, const LatentState& state, const solvers::LbfgsConfig& cfg) {
  return fit_impl(g, layout, x1, x2, w, state, cfg, false);
}
}  // namespace reference

LatentState encode_patches(const Generator& g, const patchwork::PatchLayout& layout, const Image& x1, const Image& x2) {
  check_images(layout, x1, x2, g);
  const auto P = static_cast<Eigen::Index>(layout.count());
  std::vector<neuralgen::Mat<double>> u(2, neuralgen::Mat<double>(layout.dim(), P));
  const Image* x[2] = {&x1, &x2};
  for (int k = 0; k < 2; ++k)
    for (Eigen::Index p = 0; p < P; ++p) {
      patchwork::extract(layout, *x[k], static_cast<std::size_t>(p), std::span(u[k].col(p).data(), layout.dim()));
      u[k].col(p) /= g.scale[k];
    }
  const auto mu = neuralgen::encode_mean<double>(g, u);
  LatentState s;
  s.latent_dim = g.latent_dim;
  s.z.assign(mu.data(), mu.data() + mu.size());  // column-major s x P is [p][s]
  return s;
}

Image generated_aggregate(const Generator& g, const patchwork::PatchLayout& layout, const LatentState& state,
                          int channel, double pixel_mm) {
  check_state(layout, state, g);
  if (channel < 0 || channel >= g.branches()) throw ParameterError("generated_aggregate: bad channel");
  const auto P = static_cast<Eigen::Index>(layout.count());
  const Eigen::Map<const neuralgen::Mat<double>> z(state.z.data(), g.latent_dim, P);
  const neuralgen::Mat<double> out = neuralgen::forward<double>(g.decoders[channel], z) * g.scale[channel];
  return patchwork::scatter_add(layout, std::span(out.data(), out.size()), pixel_mm);
}

ModelFit model_fit_eta(const Generator& g, const Image& x1, const Image& x2, double eta, int restarts,
                       std::uint64_t seed, const solvers::LbfgsConfig& cfg, std::span<const double> warm_start) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("model_fit_eta: eta must lie in [0, 1]");
  if (restarts < 0) throw ParameterError("model_fit_eta: negative restart count");
  const auto layout = patchwork::build_layout(x1.width, x1.height, x1.width, 0.0);
  if (layout.count() != 1) throw ShapeError("model_fit_eta: images must be square full-patch inputs");
  check_images(layout, x1, x2, g);
  const auto t = targets(layout, x1, x2, 0);
  const ChannelWeights w{{eta, 1.0 - eta}, 0.0};

  std::vector<std::vector<double>> starts;
  if (!warm_start.empty()) {
    if (static_cast<int>(warm_start.size()) != g.latent_dim) throw ShapeError("model_fit_eta: warm start size");
    starts.emplace_back(warm_start.begin(), warm_start.end());
  }
  {
    // An ignored channel must not steer the encoder; feed it the decoder's output at z = 0.
    std::vector<neuralgen::Mat<double>> u(2);
    const Vec<double> zero = Vec<double>::Zero(g.latent_dim);
    for (int k = 0; k < 2; ++k) {
      if (w.eta[k] > 0.0)
        u[k] = t[k] / g.scale[k];
      else
        u[k] = neuralgen::forward<double>(g.decoders[k], zero);
    }
    const auto mu = neuralgen::encode_mean<double>(g, u);
    starts.emplace_back(mu.data(), mu.data() + mu.size());
  }
  for (int r = 0; r < restarts; ++r)
    starts.push_back(neuralgen::sample_prior(g.latent_dim, derive_seed(seed, static_cast<std::uint64_t>(r)),
                                             neuralgen::PriorMode::normal));

  const solvers::Objective f = [&](std::span<const double> z, std::span<double> gg) {
    return patch_objective(g, t, w, z, gg);
  };
  ModelFit best;
  best.value = std::numeric_limits<double>::infinity();
  const int first = warm_start.empty() ? 0 : -1;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    auto z = starts[i];
    solvers::lbfgs_minimize(f, z, cfg);
    const double v = f(z, {});
    if (v < best.value) {
      best.value = v;
      best.z = z;
      best.best_start = first + static_cast<int>(i);
    }
  }
  const auto out = neuralgen::decode<double>(g, Eigen::Map<const Vec<double>>(best.z.data(), best.z.size()));
  best.x1 = Image(x1.width, x1.height, x1.pixel_mm);
  best.x2 = Image(x1.width, x1.height, x1.pixel_mm);
  for (std::size_t j = 0; j < best.x1.size(); ++j) {
    best.x1.data[j] = g.scale[0] * out[0][static_cast<Eigen::Index>(j)];
    best.x2.data[j] = g.scale[1] * out[1][static_cast<Eigen::Index>(j)];
  }
  return best;
}

ModelFit model_fit_eta(const neuralgen::MvaeModel& m, const Image& x1, const Image& x2, double eta, int restarts,
                       std::uint64_t seed) {
  solvers::LbfgsConfig cfg;
  cfg.max_iterations = 200;
  return model_fit_eta(Generator(m), x1, x2, eta, restarts, seed, cfg);
}

PlsResult pls_value_grad(const Image& x1, const Image& x2, double eps) {
  if (!(eps > 0.0)) throw ParameterError("pls_value_grad: eps must be positive");
  if (x1.width != x2.width || x1.height != x2.height) throw ShapeError("pls_value_grad: images differ in shape");
  const int W = x1.width, H = x1.height;
  PlsResult r{0.0, Image(W, H, x1.pixel_mm), Image(W, H, x2.pixel_mm)};
  // Extended accumulator: the sum is O(N) while line searches compare O(1) differences.
  long double value = 0.0L;
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const double ax = j + 1 < W ? x1(i, j + 1) - x1(i, j) : 0.0;
      const double ay = i + 1 < H ? x1(i + 1, j) - x1(i, j) : 0.0;
      const double bx = j + 1 < W ? x2(i, j + 1) - x2(i, j) : 0.0;
      const double by = i + 1 < H ? x2(i + 1, j) - x2(i, j) : 0.0;
      const double D = ax * by - ay * bx;
      const double root = std::sqrt(D * D + eps * eps);
      value += root;
      const double q = D / root;
      // d/da = q (by, -bx), d/db = q (-ay, ax); pushed back through the differences.
      const double gax = q * by, gay = -q * bx, gbx = -q * ay, gby = q * ax;
      if (j + 1 < W) {
        r.grad1(i, j + 1) += gax;
        r.grad1(i, j) -= gax;
        r.grad2(i, j + 1) += gbx;
        r.grad2(i, j) -= gbx;
      }
      if (i + 1 < H) {
        r.grad1(i + 1, j) += gay;
        r.grad1(i, j) -= gay;
        r.grad2(i + 1, j) += gby;
        r.grad2(i, j) -= gby;
      }
    }
  r.value = static_cast<double>(value);
  return r;
}

void save_latents(const std::string& path, const LatentState& state, const patchwork::PatchLayout& layout) {
  if (state.count() != layout.count() || state.z.size() != state.count() * state.latent_dim)
    throw ShapeError("save_latents: state does not match layout");
  std::string out(kMagic, 4);
  auto put = [&](const auto& v) { out.append(reinterpret_cast<const char*>(&v), sizeof(v)); };
  put(layout.hash());
  put(static_cast<std::uint32_t>(layout.count()));
  put(static_cast<std::uint32_t>(state.latent_dim));
  for (double v : state.z) put(static_cast<float>(v));
  io::write_text(path, out);
}

LatentState load_latents(const std::string& path, const patchwork::PatchLayout& layout, int latent_dim) {
  const std::string b = io::read_file(path);
  const std::size_t header = 4 + 8 + 4 + 4;
  if (b.size() < header) throw FormatError("latent file " + path + ": truncated header");
  if (std::memcmp(b.data(), kMagic, 4) != 0) throw FormatError("latent file " + path + ": bad magic");
  std::uint64_t hash;
  std::uint32_t P, s;
  std::memcpy(&hash, b.data() + 4, 8);
  std::memcpy(&P, b.data() + 12, 4);
  std::memcpy(&s, b.data() + 16, 4);
  if (hash != layout.hash()) throw FormatError("latent file " + path + ": patch layout differs");
  if (P != layout.count() || static_cast<int>(s) != latent_dim) throw FormatError("latent file " + path + ": size mismatch");
  if (b.size() != header + sizeof(float) * P * s) throw FormatError("latent file " + path + ": truncated payload");
  LatentState st;
  st.latent_dim = latent_dim;
  st.z.resize(static_cast<std::size_t>(P) * s);
  for (std::size_t i = 0; i < st.z.size(); ++i) {
    float f;
    std::memcpy(&f, b.data() + header + 4 * i, 4);
    st.z[i] = f;
  }
  return st;
}

}  // namespace synrecon::regularizers
