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

#include <functional>
#include <span>
#include <vector>

namespace synrecon::solvers {

struct LbfgsConfig {
  int memory = 7;
  int max_iterations = 50;
  double gradient_tolerance = 1e-6;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 30;
  /// Project onto x >= 0 after each step; components held at the bound are frozen.
  bool nonnegative = false;
};

struct LbfgsTrace {
  std::vector<double> values;  // f at x0 and after each accepted step
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Writes the gradient into its second argument and returns f.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

/// Two-loop L-BFGS with Armijo backtracking. x is updated in place.
LbfgsTrace lbfgs_minimize(const Objective& f, std::span<double> x, const LbfgsConfig& cfg);

void validate(const LbfgsConfig& cfg);

}  // namespace synrecon::solvers
