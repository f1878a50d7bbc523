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
#include <vector>

#include "synrecon/core.hpp"
#include "synrecon/projectors.hpp"
#include "synrecon/rng.hpp"

namespace synrecon::physics {

/// ybar(x) = tau * (acf * P x + r).
struct PetModel {
  projectors::Projector projector;
  double tau = 1.0;                 // acquisition time (s)
  std::vector<double> background;   // r, counts/s per ray; empty means zero
  std::vector<double> acf;          // attenuation factors in (0,1]; empty means 1
};

/// ybar(x) = I * exp(-A x).
struct CtModel {
  projectors::Projector projector;
  double intensity = 1.0;
};

struct CountData {
  Sinogram counts;
  std::uint64_t seed = 0;
};

/// Line integrals l and statistical weights w of the WLS approximation.
struct WlsTerms {
  Sinogram line_integrals;
  Sinogram weights;
};

void validate(const PetModel& m);
void validate(const CtModel& m);

Sinogram pet_expectation(const PetModel& m, const Image& x);
Sinogram ct_expectation(const CtModel& m, const Image& x);

/// Independent Poisson draws; entry i uses the stream derive_seed(seed, i).
CountData sample_poisson(const Sinogram& expectation, std::uint64_t seed);
/// One Poisson draw: sequential inversion below mean 30, PTRS rejection above.
std::uint64_t poisson_draw(double mean, Rng& rng);

/// sum_i (ybar_i - y_i log ybar_i), with 0 log 0 = 0 and +inf when y_i > 0, ybar_i = 0.
double poisson_nll(const Sinogram& y, const Sinogram& ybar);

/// l_i = log(I / max(y_i, 1)), w_i = y_i (zero-count rays get weight 0).
WlsTerms wls_terms(const CountData& y, const CtModel& m);
/// 1/2 sum_i w_i (l_i - [A x]_i)^2 given the projection A x.
double wls_objective(const WlsTerms& t, const Sinogram& projection);

/// exp(-forward(mu)) per ray of a parallel-beam projector.
/// exp(-mu_scale * A mu); mu_scale converts a CT-energy map to 511 keV.
std::vector<double> attenuation_factors(const projectors::Projector& pet, const Image& mu, double mu_scale = 1.0);

/// Uniform background at `fraction` of the mean attenuated true rate, counts/s per ray.
std::vector<double> uniform_background(const Sinogram& attenuated_true_rate, double fraction);

}  // namespace synrecon::physics
