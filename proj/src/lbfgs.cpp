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

#include "synrecon/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "synrecon/core.hpp"

namespace synrecon::solvers {

namespace {

struct Pair {
  std::vector<double> s, y;
  double rho;
};

void mask_bound(std::span<const double> x, std::span<const double> g, std::span<double> v, double eps = 0.0) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (x[i] <= eps && g[i] > 0.0) v[i] = 0.0;
}

// Width of the near-active band: min(1e-3, |x - max(x - g, 0)|).
double active_band(std::span<const double> x, std::span<const double> g) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - std::max(x[i] - g[i], 0.0);
    s += d * d;
  }
  return std::min(1e-3, std::sqrt(s));
}

}  // namespace

void validate(const LbfgsConfig& cfg) {
  if (cfg.memory < 1) throw ParameterError("lbfgs: memory must be at least 1");
  if (cfg.max_iterations < 0) throw ParameterError("lbfgs: negative iteration cap");
  if (!(cfg.gradient_tolerance > 0.0)) throw ParameterError("lbfgs: gradient tolerance must be positive");
  if (!(cfg.armijo > 0.0 && cfg.armijo < 1.0)) throw ParameterError("lbfgs: Armijo constant must lie in (0, 1)");
  if (!(cfg.backtrack > 0.0 && cfg.backtrack < 1.0)) throw ParameterError("lbfgs: backtracking factor must lie in (0, 1)");
  if (cfg.max_backtracks < 1) throw ParameterError("lbfgs: need at least one backtrack");
}

LbfgsTrace lbfgs_minimize(const Objective& f, std::span<double> x, const LbfgsConfig& cfg) {
  validate(cfg);
  const std::size_t n = x.size();
  LbfgsTrace trace;
  if (cfg.nonnegative)
    for (auto& v : x) v = std::max(v, 0.0);

  std::vector<double> g(n), g_new(n), p(n), x_new(n), q(n), alpha(cfg.memory);
  double fx = f(x, g);
  ++trace.evaluations;
  if (!std::isfinite(fx)) throw NumericError("lbfgs: objective not finite at the starting point");
  trace.values.push_back(fx);
  std::deque<Pair> mem;

  auto projected_gradient_norm = [&] {
    std::vector<double> pg(g.begin(), g.end());
    if (cfg.nonnegative) mask_bound(x, g, pg);
    return norm2(pg);
  };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (projected_gradient_norm() < cfg.gradient_tolerance) {
      trace.converged = true;
      break;
    }
    // Two-loop recursion on the gradient restricted to the free variables.
    const double band = cfg.nonnegative ? active_band(x, g) : 0.0;
    std::copy(g.begin(), g.end(), q.begin());
    if (cfg.nonnegative) mask_bound(x, g, q, band);
    for (std::size_t i = mem.size(); i-- > 0;) {
      alpha[i] = mem[i].rho * dot(mem[i].s, q);
      for (std::size_t j = 0; j < n; ++j) q[j] -= alpha[i] * mem[i].y[j];
    }
    double gamma;
    if (mem.empty()) {
      gamma = 1.0 / std::max(norm2(q), 1e-300);
    } else {
      const auto& last = mem.back();
      gamma = dot(last.s, last.y) / dot(last.y, last.y);
    }
    for (auto& v : q) v *= gamma;
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const double beta = mem[i].rho * dot(mem[i].y, q);
      for (std::size_t j = 0; j < n; ++j) q[j] += (alpha[i] - beta) * mem[i].s[j];
    }
    for (std::size_t j = 0; j < n; ++j) p[j] = -q[j];
    // Near-active variables take a scaled gradient step; the projection clamps them.
    if (cfg.nonnegative)
      for (std::size_t j = 0; j < n; ++j)
        if (x[j] <= band && g[j] > 0.0) p[j] = x[j] > 0.0 ? -gamma * g[j] : 0.0;
    double slope = dot(g, p);
    if (!(slope < 0.0)) {
      // Not a descent direction: restart from steepest descent.
      mem.clear();
      const double gn = std::max(projected_gradient_norm(), 1e-300);
      for (std::size_t j = 0; j < n; ++j) p[j] = -g[j] / gn;
      if (cfg.nonnegative) mask_bound(x, g, p);
      slope = dot(g, p);
      if (!(slope < 0.0)) {
        trace.converged = true;
        break;
      }
    }

    double t = 1.0;
    bool accepted = false;
    double f_new = 0.0;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, t *= cfg.backtrack) {
      for (std::size_t j = 0; j < n; ++j) {
        x_new[j] = x[j] + t * p[j];
        if (cfg.nonnegative) x_new[j] = std::max(x_new[j], 0.0);
      }
      f_new = f(x_new, g_new);
      ++trace.evaluations;
      double decrease = 0.0;
      for (std::size_t j = 0; j < n; ++j) decrease += g[j] * (x_new[j] - x[j]);
      if (std::isfinite(f_new) && f_new < fx && f_new <= fx + cfg.armijo * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      trace.line_search_failed = true;
      break;
    }

    Pair pair{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      pair.s[j] = x_new[j] - x[j];
      pair.y[j] = g_new[j] - g[j];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 0.0) {
      pair.rho = 1.0 / sy;
      mem.push_back(std::move(pair));
      if (static_cast<int>(mem.size()) > cfg.memory) mem.pop_front();
    }
    std::copy(x_new.begin(), x_new.end(), x.begin());
    std::swap(g, g_new);
    fx = f_new;
    trace.values.push_back(fx);
    ++trace.iterations;
  }
  if (!trace.converged && !trace.line_search_failed && projected_gradient_norm() < cfg.gradient_tolerance)
    trace.converged = true;
  return trace;
}

}  // namespace synrecon::solvers
