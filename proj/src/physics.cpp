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

#include "synrecon/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "synrecon/rng.hpp"

namespace synrecon::physics {

namespace {

void check_nonnegative(const Image& x, const char* who) {
  for (double v : x.data)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(who) + ": image must be finite and >= 0");
}

}  // namespace

void validate(const PetModel& m) {
  if (!(m.tau > 0.0)) throw ParameterError("PET model: tau must be > 0");
  if (!m.background.empty() && m.background.size() != m.projector.n_rays())
    throw ShapeError("PET model: background size mismatch");
  if (!m.acf.empty() && m.acf.size() != m.projector.n_rays()) throw ShapeError("PET model: acf size mismatch");
  for (double r : m.background)
    if (!(r >= 0.0)) throw DomainError("PET model: background must be >= 0");
  for (double a : m.acf)
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("PET model: acf must lie in (0,1]");
}

void validate(const CtModel& m) {
  if (!(m.intensity > 0.0)) throw ParameterError("CT model: intensity must be > 0");
}

Sinogram pet_expectation(const PetModel& m, const Image& x) {
  validate(m);
  check_nonnegative(x, "pet_expectation");
  Sinogram y = m.projector.forward(x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = m.acf.empty() ? 1.0 : m.acf[i];
    const double r = m.background.empty() ? 0.0 : m.background[i];
    y.data[i] = m.tau * (a * y.data[i] + r);
  }
  return y;
}

Sinogram ct_expectation(const CtModel& m, const Image& x) {
  validate(m);
  check_nonnegative(x, "ct_expectation");
  Sinogram y = m.projector.forward(x);
  for (double& v : y.data) v = m.intensity * std::exp(-v);
  return y;
}

std::uint64_t poisson_draw(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  if (mean < 30.0) {
    const double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  // Transformed rejection with squeeze (Hormann 1993).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

CountData sample_poisson(const Sinogram& expectation, std::uint64_t seed) {
  for (double m : expectation.data)
    if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("sample_poisson: mean must be finite and >= 0");
  CountData out{Sinogram(expectation.n_angles, expectation.n_bins), seed};
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(expectation.size()); ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.counts.data[i] = static_cast<double>(poisson_draw(expectation.data[i], rng));
  }
  return out;
}

double poisson_nll(const Sinogram& y, const Sinogram& ybar) {
  if (!y.same_shape(ybar)) throw ShapeError("poisson_nll: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = ybar.data[i];
    if (y.data[i] > 0.0) {
      if (m <= 0.0) return std::numeric_limits<double>::infinity();
      s += m - y.data[i] * std::log(m);
    } else {
      s += m;
    }
  }
  return s;
}

WlsTerms wls_terms(const CountData& y, const CtModel& m) {
  validate(m);
  if (y.counts.n_angles != m.projector.n_angles() || y.counts.n_bins != m.projector.n_bins())
    throw ShapeError("wls_terms: counts do not match CT geometry");
  WlsTerms t{Sinogram(y.counts.n_angles, y.counts.n_bins), Sinogram(y.counts.n_angles, y.counts.n_bins)};
  for (std::size_t i = 0; i < y.counts.size(); ++i) {
    const double c = y.counts.data[i];
    t.line_integrals.data[i] = std::log(m.intensity / std::max(c, 1.0));
    t.weights.data[i] = c;  // zero counts carry no weight
  }
  return t;
}

double wls_objective(const WlsTerms& t, const Sinogram& projection) {
  if (!t.weights.same_shape(projection)) throw ShapeError("wls_objective: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < projection.size(); ++i) {
    const double r = t.line_integrals.data[i] - projection.data[i];
    s += t.weights.data[i] * r * r;
  }
  return 0.5 * s;
}

std::vector<double> attenuation_factors(const projectors::Projector& pet, const Image& mu, double mu_scale) {
  check_nonnegative(mu, "attenuation_factors");
  if (!(mu_scale >= 0.0)) throw ParameterError("attenuation_factors: mu scale must be non-negative");
  Sinogram l = pet.forward(mu);
  for (auto& v : l.data) v *= mu_scale;
  std::vector<double> acf(l.size());
  // Floor at the smallest normal double so factors stay in (0, 1].
  for (std::size_t i = 0; i < l.size(); ++i)
    acf[i] = std::max(std::exp(-l.data[i]), std::numeric_limits<double>::min());
  return acf;
}

std::vector<double> uniform_background(const Sinogram& attenuated_true_rate, double fraction) {
  if (fraction < 0.0) throw ParameterError("background fraction must be >= 0");
  double mean = 0.0;
  for (double v : attenuated_true_rate.data) mean += v;
  mean /= std::max<std::size_t>(1, attenuated_true_rate.size());
  return std::vector<double>(attenuated_true_rate.size(), fraction * mean);
}

}  // namespace synrecon::physics
