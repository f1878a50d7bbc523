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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace synrecon {

// Error hierarchy. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ParameterError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };

/// 2-D pixel grid, row-major, with a physical pixel size in millimetres.
///
/// Pixel (row, col) has its centre at
///   x = (col - (width - 1) / 2) * pixel_mm,  y = (row - (height - 1) / 2) * pixel_mm.
struct Image {
  int width = 0;
  int height = 0;
  double pixel_mm = 1.0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double px = 1.0, double fill = 0.0)
      : width(w), height(h), pixel_mm(px),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::size_t size() const { return data.size(); }
  double& operator()(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  double operator()(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_grid(const Image& o) const {
    return width == o.width && height == o.height && pixel_mm == o.pixel_mm;
  }
};

/// Projection-domain data indexed (angle, bin), row-major by angle.
struct Sinogram {
  int n_angles = 0;
  int n_bins = 0;
  std::vector<double> data;

  Sinogram() = default;
  Sinogram(int angles, int bins, double fill = 0.0)
      : n_angles(angles), n_bins(bins),
        data(static_cast<std::size_t>(angles) * static_cast<std::size_t>(bins), fill) {}

  std::size_t size() const { return data.size(); }
  double& operator()(int a, int b) { return data[static_cast<std::size_t>(a) * n_bins + b]; }
  double operator()(int a, int b) const { return data[static_cast<std::size_t>(a) * n_bins + b]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  bool same_shape(const Sinogram& o) const { return n_angles == o.n_angles && n_bins == o.n_bins; }
};

/// Two co-registered channels on one grid (channel 1: activity / digit, channel 2: attenuation / edges).
struct ImagePair {
  Image channel1;
  Image channel2;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace synrecon
