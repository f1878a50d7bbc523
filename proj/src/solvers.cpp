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

#include "synrecon/solvers.hpp"

#include <cmath>
#include <cstdio>

namespace synrecon::solvers {

namespace {

void check_nonnegative(const Image& x, const char* what) {
  for (double v : x.data)
    if (!(v >= 0.0)) throw DomainError(std::string(what) + ": image must be non-negative and finite");
}

void check_target(const PenaltyTarget* target, const Image& x, double beta, const char* what) {
  if (beta < 0.0 || !std::isfinite(beta)) throw ParameterError(std::string(what) + ": beta must be non-negative");
  if (beta > 0.0 && !target) throw ParameterError(std::string(what) + ": beta > 0 needs a penalty target");
  if (target && (target->t.size() != x.size() || target->w.size() != x.size()))
    throw ShapeError(std::string(what) + ": penalty target does not match the image");
}

double penalty(const PenaltyTarget* target, const Image& x, double beta) {
  if (!target || beta == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += target->w[j] * x[j] * x[j] - 2.0 * target->t[j] * x[j];
  return 0.5 * beta * s;
}

std::vector<double> ray_weights(const physics::PetModel& m) {
  const std::size_t n = m.projector.n_rays();
  std::vector<double> w(n, m.tau);
  if (!m.acf.empty())
    for (std::size_t i = 0; i < n; ++i) w[i] *= m.acf[i];
  return w;
}

Image to_image(const projectors::Projector& p, std::span<const double> v) {
  Image x = p.zero_image();
  std::copy(v.begin(), v.end(), x.data.begin());
  return x;
}

}  // namespace

void validate(const ReconConfig& cfg) {
  if (!(cfg.beta1() >= 0.0) || !(cfg.beta2() >= 0.0)) throw ParameterError("recon: beta must be non-negative");
  if (!(cfg.eta >= 0.0 && cfg.eta <= 1.0)) throw ParameterError("recon: eta must lie in [0, 1]");
  if (!(cfg.alpha >= 0.0)) throw ParameterError("recon: alpha must be non-negative");
  if (cfg.outer_iterations < 0 || cfg.pet_sub_iterations < 0 || cfg.ct_sub_iterations < 0 || cfg.init_iterations < 0)
    throw ParameterError("recon: iteration counts must be non-negative");
  if (!(cfg.pet_mu_scale >= 0.0)) throw ParameterError("recon: PET attenuation scale must be non-negative");
  validate(cfg.latent_lbfgs);
}

double pet_root(double s, double q, double t, double w, double beta, double x_keep) {
  if (beta == 0.0) return s > 0.0 ? q / s : x_keep;
  const double a = beta * w;
  const double b = s - beta * t;
  if (a <= 0.0) return b > 0.0 ? q / b : x_keep;
  const double disc = std::sqrt(b * b + 4.0 * a * q);
  // Pick the cancellation-free form of the positive root.
  if (b >= 0.0) return b + disc > 0.0 ? 2.0 * q / (b + disc) : 0.0;
  return (disc - b) / (2.0 * a);
}

double pet_objective(const PetData& data, const Image& x, const PenaltyTarget* target, double beta) {
  return physics::poisson_nll(data.counts, physics::pet_expectation(data.model, x)) + penalty(target, x, beta);
}

Image pet_x_update(const PetData& data, const Image& x0, const PenaltyTarget* target, double beta, int sub_iters,
                   PetUpdateReport* report) {
  physics::validate(data.model);
  const auto& P = data.model.projector;
  if (!P.grid().matches(x0)) throw ShapeError("pet_x_update: image does not match the projector grid");
  if (data.counts.n_angles != P.n_angles() || data.counts.n_bins != P.n_bins())
    throw ShapeError("pet_x_update: counts do not match the projector");
  check_nonnegative(x0, "pet_x_update");
  check_target(target, x0, beta, "pet_x_update");
  if (sub_iters < 0) throw ParameterError("pet_x_update: negative iteration count");

  const auto w = ray_weights(data.model);
  const Image s = P.sensitivity(w);
  Image x = x0;
  std::vector<double> ratio(P.n_rays());
  if (report) {
    report->objective.clear();
    report->excluded_rays = 0;
    report->objective.push_back(pet_objective(data, x, target, beta));
  }
  for (int it = 0; it < sub_iters; ++it) {
    const Sinogram ybar = physics::pet_expectation(data.model, x);
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
      const double y = data.counts.data[i];
      if (ybar.data[i] > 0.0) {
        ratio[i] = w[i] * y / ybar.data[i];
      } else {
        ratio[i] = 0.0;
        excluded += y > 0.0;
      }
    }
    const Image back = P.sensitivity(ratio);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double q = x[j] * back[j];
      x[j] = target ? pet_root(s[j], q, target->t[j], target->w[j], beta, x[j]) : pet_root(s[j], q, 0.0, 0.0, 0.0, x[j]);
    }
    if (report) {
      report->excluded_rays = excluded;
      report->objective.push_back(pet_objective(data, x, target, beta));
    }
  }
  return x;
}

double ct_objective(const CtData& data, const Image& x, const PenaltyTarget* target, double beta) {
  return physics::wls_objective(data.wls, data.model.projector.forward(x)) + penalty(target, x, beta);
}

Image ct_x_update(const CtData& data, const Image& x0, const PenaltyTarget* target, double beta, int sub_iters,
                  std::vector<double>* objective) {
  physics::validate(data.model);
  const auto& A = data.model.projector;
  if (!A.grid().matches(x0)) throw ShapeError("ct_x_update: image does not match the projector grid");
  if (data.wls.weights.size() != A.n_rays() || data.wls.line_integrals.size() != A.n_rays())
    throw ShapeError("ct_x_update: WLS terms do not match the projector");
  check_target(target, x0, beta, "ct_x_update");
  if (sub_iters < 0) throw ParameterError("ct_x_update: negative iteration count");

  const Sinogram ones_proj = A.forward(A.zero_image(1.0));
  std::vector<double> wa(A.n_rays());
  for (std::size_t i = 0; i < wa.size(); ++i) wa[i] = data.wls.weights.data[i] * ones_proj.data[i];
  const Image d = A.sensitivity(wa);

  Image x = x0;
  if (objective) {
    objective->clear();
    objective->push_back(ct_objective(data, x, target, beta));
  }
  std::vector<double> r(A.n_rays());
  for (int it = 0; it < sub_iters; ++it) {
    const Sinogram proj = A.forward(x);
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = data.wls.weights.data[i] * (proj.data[i] - data.wls.line_integrals.data[i]);
    const Image grad = A.sensitivity(r);
    for (std::size_t j = 0; j < x.size(); ++j) {
      double num = grad[j], den = d[j];
      if (target && beta > 0.0) {
        num += beta * (target->w[j] * x[j] - target->t[j]);
        den += beta * target->w[j];
      }
      if (den > 0.0) x[j] = std::max(0.0, x[j] - num / den);
    }
    if (objective) objective->push_back(ct_objective(data, x, target, beta));
  }
  return x;
}

Image denoise_update_closed_form(const Image& x_noisy, const Image& generated, double beta) {
  if (!(beta >= 0.0)) throw ParameterError("denoise_update: beta must be non-negative");
  if (x_noisy.size() != generated.size()) throw ShapeError("denoise_update: size mismatch");
  Image x = x_noisy;
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x_noisy[j] + beta * generated[j]) / (1.0 + beta);
  return x;
}

Image mlem_baseline(const PetData& data, const Image& x0, int iters, std::vector<double>* nll) {
  PetUpdateReport report;
  Image x = pet_x_update(data, x0, nullptr, 0.0, iters, nll ? &report : nullptr);
  if (nll) *nll = report.objective;
  return x;
}

Image wls_baseline(const CtData& data, const Image& x0, int iters, std::vector<double>* objective) {
  return ct_x_update(data, x0, nullptr, 0.0, iters, objective);
}

PetData scout_corrected(const PetData& data, const Image& scout, double mu_scale) {
  PetData out = data;
  out.model.acf = physics::attenuation_factors(data.model.projector, scout, mu_scale);
  return out;
}

SynergisticResult reconstruct_synergistic(const PetData& pet, const CtData& ct, const regularizers::Generator& model,
                                          const patchwork::PatchLayout& layout, const ReconConfig& cfg) {
  validate(cfg);
  const double b1 = cfg.beta1(), b2 = cfg.beta2();
  const bool regularized = b1 > 0.0 || b2 > 0.0;
  const regularizers::ChannelWeights zw{{cfg.eta * b1, (1.0 - cfg.eta) * b2}, cfg.alpha};

  SynergisticResult res;
  res.scout = wls_baseline(ct, ct.model.projector.zero_image(), cfg.init_iterations);
  const PetData pr = scout_corrected(pet, res.scout, cfg.pet_mu_scale);
  res.x1 = mlem_baseline(pr, pr.model.projector.zero_image(1.0), cfg.init_iterations);
  res.x2 = res.scout;
  const double px = res.x1.pixel_mm;
  if (regularized) res.latents = regularizers::encode_patches(model, layout, res.x1, res.x2);

  auto row = [&](int q) {
    TraceRow r{q, physics::poisson_nll(pr.counts, physics::pet_expectation(pr.model, res.x1)),
               physics::wls_objective(ct.wls, ct.model.projector.forward(res.x2)), 0.0, 0.0};
    if (regularized) {
      const auto m = regularizers::patch_misfits(model, layout, res.x1, res.x2, res.latents);
      r.regularizer = zw.eta[0] * m[0] + zw.eta[1] * m[1];
      if (cfg.alpha > 0.0)
        for (std::size_t p = 0; p < res.latents.count(); ++p)
          r.regularizer += cfg.alpha * regularizers::latent_penalty_H(res.latents.at(p));
    }
    r.total = cfg.eta * r.data_fit_1 + (1.0 - cfg.eta) * r.data_fit_2 + r.regularizer;
    res.trace.push_back(r);
  };
  row(0);

  const Image coverage = regularized ? patchwork::coverage_image(layout, px) : Image();
  for (int q = 1; q <= cfg.outer_iterations; ++q) {
    try {
      std::optional<PenaltyTarget> t1, t2;
      if (regularized) {
        res.latents = regularizers::fit_latents(model, layout, res.x1, res.x2, zw, res.latents, cfg.latent_lbfgs);
        t1 = PenaltyTarget{regularizers::generated_aggregate(model, layout, res.latents, 0, px), coverage};
        t2 = PenaltyTarget{regularizers::generated_aggregate(model, layout, res.latents, 1, px), coverage};
      }
      res.x1 = pet_x_update(pr, res.x1, t1 ? &*t1 : nullptr, b1, cfg.pet_sub_iterations);
      res.x2 = ct_x_update(ct, res.x2, t2 ? &*t2 : nullptr, b2, cfg.ct_sub_iterations);
    } catch (const NumericError& e) {
      throw NumericError("outer iteration " + std::to_string(q) + ": " + e.what());
    } catch (const DomainError& e) {
      throw DomainError("outer iteration " + std::to_string(q) + ": " + e.what());
    }
    row(q);
  }
  return res;
}

double pet_quadratic(const PetData& data, const Image& x, Image* grad) {
  const auto& P = data.model.projector;
  const Sinogram ybar = physics::pet_expectation(data.model, x);
  const auto w = ray_weights(data.model);
  std::vector<double> r(P.n_rays(), 0.0);
  double v = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double y = data.counts.data[i];
    if (y <= 0.0) continue;
    const double d = ybar.data[i] - y;
    v += 0.5 * d * d / y;
    r[i] = w[i] * d / y;
  }
  if (grad) *grad = P.sensitivity(r);
  return v;
}

double wls_value_grad(const CtData& data, const Image& x, Image* grad) {
  const auto& A = data.model.projector;
  const Sinogram proj = A.forward(x);
  std::vector<double> r(A.n_rays());
  double v = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = proj.data[i] - data.wls.line_integrals.data[i];
    v += 0.5 * data.wls.weights.data[i] * d * d;
    r[i] = data.wls.weights.data[i] * d;
  }
  if (grad) *grad = A.sensitivity(r);
  return v;
}

PlsOutput reconstruct_pls(const PetData& pet, const CtData& ct, const PlsConfig& cfg, const Image& x1_init,
                          const Image& x2_init) {
  if (!(cfg.beta >= 0.0)) throw ParameterError("pls: beta must be non-negative");
  if (!(cfg.eta >= 0.0 && cfg.eta <= 1.0)) throw ParameterError("pls: eta must lie in [0, 1]");
  if (cfg.scale.size() != 2 || !(cfg.scale[0] > 0.0) || !(cfg.scale[1] > 0.0))
    throw ParameterError("pls: need two positive scales");
  const auto& P = pet.model.projector;
  const std::size_t N = x1_init.size();
  if (x2_init.size() != N || !P.grid().matches(x1_init)) throw ShapeError("pls: initial images do not match the grid");
  const double c1 = cfg.scale[0], c2 = cfg.scale[1];

  PlsOutput out;
  std::vector<double> v(2 * N);
  for (std::size_t j = 0; j < N; ++j) {
    v[j] = x1_init[j] / c1;
    v[N + j] = x2_init[j] / c2;
  }
  Image x1 = P.zero_image(), x2 = P.zero_image(), g1, g2;
  const Objective f = [&](std::span<const double> u, std::span<double> g) {
    for (std::size_t j = 0; j < N; ++j) {
      x1[j] = c1 * u[j];
      x2[j] = c2 * u[N + j];
    }
    const bool want = !g.empty();
    double val = cfg.eta * pet_quadratic(pet, x1, want ? &g1 : nullptr) +
                 (1.0 - cfg.eta) * wls_value_grad(ct, x2, want ? &g2 : nullptr);
    if (want)
      for (std::size_t j = 0; j < N; ++j) {
        g[j] = cfg.eta * c1 * g1[j];
        g[N + j] = (1.0 - cfg.eta) * c2 * g2[j];
      }
    if (cfg.beta > 0.0) {
      Image n1 = to_image(P, u.subspan(0, N)), n2 = to_image(P, u.subspan(N, N));
      const auto pls = regularizers::pls_value_grad(n1, n2, cfg.eps);
      val += cfg.beta * pls.value;
      out.pls_trace.push_back(pls.value);
      if (want)
        for (std::size_t j = 0; j < N; ++j) {
          g[j] += cfg.beta * pls.grad1[j];
          g[N + j] += cfg.beta * pls.grad2[j];
        }
    }
    return val;
  };
  const auto tr = lbfgs_minimize(f, v, cfg.lbfgs);
  out.trace = tr.values;
  out.x1 = P.zero_image();
  out.x2 = P.zero_image();
  for (std::size_t j = 0; j < N; ++j) {
    out.x1[j] = c1 * v[j];
    out.x2[j] = c2 * v[N + j];
  }
  return out;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string s = "outer_iter,data_fit_1,data_fit_2,regularizer,total\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.outer_iter, r.data_fit_1, r.data_fit_2,
                  r.regularizer, r.total);
    s += buf;
  }
  return s;
}

}  // namespace synrecon::solvers
