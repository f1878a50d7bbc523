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

#include "synrecon/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace synrecon::metrics {

namespace {

double default_range(const Image& reference, double data_range) {
  if (data_range > 0.0) return data_range;
  const auto [lo, hi] = std::minmax_element(reference.data.begin(), reference.data.end());
  const double r = *hi - *lo;
  if (!(r > 0.0)) throw ParameterError("metrics: reference is constant; pass an explicit data range");
  return r;
}

void check_pair(const Image& x, const Image& reference, const char* what) {
  if (x.width != reference.width || x.height != reference.height) throw ShapeError(std::string(what) + ": shape mismatch");
  if (x.size() == 0) throw ShapeError(std::string(what) + ": empty image");
}

}  // namespace

double psnr(const Image& x, const Image& reference, double data_range) {
  check_pair(x, reference, "psnr");
  double se = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - reference[j];
    se += d * d;
  }
  if (se == 0.0) return kPsnrIdentical;
  const double range = default_range(reference, data_range);
  const double mse = se / static_cast<double>(x.size());
  return 10.0 * std::log10(range * range / mse);
}

std::array<double, 121> ssim_window() {
  std::array<double, 121> w{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double di = i - 5, dj = j - 5;
      w[i * 11 + j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      sum += w[i * 11 + j];
    }
  for (auto& v : w) v /= sum;
  return w;
}

double ssim(const Image& x, const Image& reference, double data_range) {
  check_pair(x, reference, "ssim");
  if (x.width < 11 || x.height < 11) throw ParameterError("ssim: images must be at least 11x11");
  const double range = default_range(reference, data_range);
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const auto w = ssim_window();
  double total = 0.0;
  std::size_t n = 0;
  for (int r0 = 0; r0 + 11 <= x.height; ++r0)
    for (int q0 = 0; q0 + 11 <= x.width; ++q0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double wt = w[i * 11 + j];
          const double a = x(r0 + i, q0 + j), b = reference(r0 + i, q0 + j);
          mx += wt * a;
          my += wt * b;
          sxx += wt * a * a;
          syy += wt * b * b;
          sxy += wt * a * b;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++n;
    }
  return total / static_cast<double>(n);
}

std::array<double, 2> PcaProjection::project(std::span<const double> v) const {
  if (v.size() != mean.size()) throw ShapeError("pca: point dimension mismatch");
  std::array<double, 2> c{0.0, 0.0};
  for (int a = 0; a < 2; ++a)
    for (std::size_t i = 0; i < v.size(); ++i) c[a] += axes[a][i] * (v[i] - mean[i]);
  if (degenerate) c[1] = 0.0;
  return c;
}

PcaProjection pca_latents(const std::vector<std::vector<double>>& latents, const std::vector<std::vector<double>>& extra) {
  if (latents.size() < 3) throw ParameterError("pca_latents: need at least three latents");
  const std::size_t s = latents.front().size();
  if (s < 2) throw ParameterError("pca_latents: need at least two dimensions");
  Eigen::MatrixXd X(latents.size(), s);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    if (latents[i].size() != s) throw ShapeError("pca_latents: latent dimension mismatch");
    for (std::size_t j = 0; j < s; ++j) X(i, j) = latents[i][j];
  }
  const Eigen::VectorXd mean = X.colwise().mean();
  X.rowwise() -= mean.transpose();
  const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(latents.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd vals = eig.eigenvalues();  // ascending
  const double trace = std::max(vals.sum(), 0.0);

  PcaProjection out;
  out.mean.assign(mean.data(), mean.data() + s);
  for (int a = 0; a < 2; ++a) {
    const Eigen::Index idx = static_cast<Eigen::Index>(s) - 1 - a;
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v[big] < 0) v = -v;
    out.axes[a].assign(v.data(), v.data() + s);
    out.explained_variance[a] = std::max(vals[idx], 0.0);
    out.explained_ratio[a] = trace > 0.0 ? out.explained_variance[a] / trace : 0.0;
  }
  out.degenerate = !(out.explained_variance[1] > 1e-12 * std::max(out.explained_variance[0], 1e-300));
  if (out.degenerate) {
    out.explained_variance[1] = 0.0;
    out.explained_ratio[1] = 0.0;
  }
  for (const auto& l : latents) out.coords.push_back(out.project(l));
  for (const auto& e : extra) out.extra_coords.push_back(out.project(e));
  return out;
}

}  // namespace synrecon::metrics
