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

#include "synrecon/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "synrecon/image_io.hpp"
#include "synrecon/rng.hpp"

namespace synrecon::datasets {

namespace {

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off) {
  return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
         (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Pixel centre in mm, consistent with Image's coordinate convention.
double centre_x(const Image& g, int col) { return (col - 0.5 * (g.width - 1)) * g.pixel_mm; }
double centre_y(const Image& g, int row) { return (row - 0.5 * (g.height - 1)) * g.pixel_mm; }

bool inside_ellipse(const Ellipse& e, double x, double y) {
  const double dx = x - e.cx_mm, dy = y - e.cy_mm;
  const double c = std::cos(e.rotation_rad), s = std::sin(e.rotation_rad);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return (u * u) / (e.ax_mm * e.ax_mm) + (v * v) / (e.ay_mm * e.ay_mm) <= 1.0;
}

}  // namespace

Image pad_to(const Image& img, int target_size) {
  if (target_size < img.width || target_size < img.height)
    throw ParameterError("pad_to: target size " + std::to_string(target_size) + " smaller than image");
  Image out(target_size, target_size, img.pixel_mm, 0.0);
  const int top = (target_size - img.height) / 2;
  const int left = (target_size - img.width) / 2;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) out(top + r, left + c) = img(r, c);
  return out;
}

std::vector<Image> load_idx_images(const std::string& path, int target_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 16)
    throw FormatError("IDX header truncated at byte offset " + std::to_string(buf.size()) + " in " + path);
  const std::uint32_t magic = read_be32(buf, 0);
  if (magic != 0x00000803u) {
    std::ostringstream msg;
    msg << "IDX bad magic 0x" << std::hex << magic << " at byte offset 0 in " << path;
    throw FormatError(msg.str());
  }
  const std::size_t n = read_be32(buf, 4), rows = read_be32(buf, 8), cols = read_be32(buf, 12);
  const std::size_t need = 16 + n * rows * cols;
  if (buf.size() < need)
    throw FormatError("IDX payload truncated at byte offset " + std::to_string(buf.size()) + " (expected " +
                      std::to_string(need) + ") in " + path);
  if (static_cast<std::size_t>(target_size) < rows || static_cast<std::size_t>(target_size) < cols)
    throw ParameterError("IDX target size smaller than native image size");

  std::vector<Image> out;
  out.reserve(n);
  std::size_t off = 16;
  for (std::size_t i = 0; i < n; ++i) {
    Image img(static_cast<int>(cols), static_cast<int>(rows), 1.0);
    for (std::size_t j = 0; j < rows * cols; ++j) img.data[j] = buf[off + j] / 255.0;
    off += rows * cols;
    out.push_back(pad_to(img, target_size));
  }
  return out;
}

Image gaussian_blur(const Image& x, double sigma) {
  if (sigma < 0.0) throw ParameterError("gaussian sigma must be >= 0");
  if (sigma == 0.0) return x;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  Image tmp(x.width, x.height, x.pixel_mm);
  for (int r = 0; r < x.height; ++r)
    for (int c = 0; c < x.width; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * x(r, reflect_index(c + i, x.width));
      tmp(r, c) = s;
    }
  Image out(x.width, x.height, x.pixel_mm);
  for (int r = 0; r < x.height; ++r)
    for (int c = 0; c < x.width; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp(reflect_index(r + i, x.height), c);
      out(r, c) = s;
    }
  return out;
}

Image derive_edge_channel(const Image& x1, double gaussian_sigma) {
  if (gaussian_sigma < 0.0) throw ParameterError("derive_edge_channel: sigma must be >= 0");
  if (!all_finite(x1.data)) throw DomainError("derive_edge_channel: non-finite input");
  Image mag(x1.width, x1.height, x1.pixel_mm);
  auto at = [&](int r, int c) {
    return x1(std::min(r, x1.height - 1), std::min(c, x1.width - 1));
  };
  for (int r = 0; r < x1.height; ++r)
    for (int c = 0; c < x1.width; ++c) {
      // Kernels [[1,0],[0,-1]] and [[0,1],[-1,0]] anchored at the top-left tap.
      const double g1 = at(r, c) - at(r + 1, c + 1);
      const double g2 = at(r, c + 1) - at(r + 1, c);
      mag(r, c) = std::sqrt(0.5 * (g1 * g1 + g2 * g2));
    }
  Image out = gaussian_blur(mag, gaussian_sigma);
  for (double& v : out.data) v = std::max(v, 0.0);
  return out;
}

std::vector<std::size_t> disc_pixels(const Image& grid, double cx_mm, double cy_mm, double radius_mm) {
  std::vector<std::size_t> idx;
  const double r2 = radius_mm * radius_mm;
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c) {
      const double dx = centre_x(grid, c) - cx_mm, dy = centre_y(grid, r) - cy_mm;
      if (dx * dx + dy * dy <= r2) idx.push_back(static_cast<std::size_t>(r) * grid.width + c);
    }
  return idx;
}

std::vector<std::size_t> annulus_pixels(const Image& grid, double cx_mm, double cy_mm, double r_in_mm,
                                        double r_out_mm) {
  std::vector<std::size_t> idx;
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c) {
      const double dx = centre_x(grid, c) - cx_mm, dy = centre_y(grid, r) - cy_mm;
      const double d2 = dx * dx + dy * dy;
      if (d2 > r_in_mm * r_in_mm && d2 <= r_out_mm * r_out_mm)
        idx.push_back(static_cast<std::size_t>(r) * grid.width + c);
    }
  return idx;
}

Image insert_lesion(const Image& image, double cx_mm, double cy_mm, double radius_mm, double intensity) {
  if (radius_mm <= 0.0) throw ParameterError("insert_lesion: radius must be > 0");
  const double half_w = 0.5 * image.width * image.pixel_mm, half_h = 0.5 * image.height * image.pixel_mm;
  const double nx = std::clamp(cx_mm, -half_w, half_w), ny = std::clamp(cy_mm, -half_h, half_h);
  if ((nx - cx_mm) * (nx - cx_mm) + (ny - cy_mm) * (ny - cy_mm) > radius_mm * radius_mm)
    throw ParameterError("insert_lesion: disc does not intersect the grid");
  Image out = image;
  if (intensity == 0.0) return out;
  for (std::size_t j : disc_pixels(image, cx_mm, cy_mm, radius_mm)) out.data[j] += intensity;
  return out;
}

ImagePair make_phantom_pair(const PhantomSpec& spec, std::uint64_t seed) {
  if (spec.width <= 0 || spec.height <= 0 || spec.pixel_mm <= 0.0)
    throw ParameterError("phantom: invalid grid");
  ImagePair pair{Image(spec.width, spec.height, spec.pixel_mm), Image(spec.width, spec.height, spec.pixel_mm)};
  for (const auto& e : spec.ellipses) {
    if (e.ax_mm <= 0.0 || e.ay_mm <= 0.0) throw ParameterError("phantom: ellipse radii must be > 0");
    for (int r = 0; r < spec.height; ++r)
      for (int c = 0; c < spec.width; ++c)
        if (inside_ellipse(e, centre_x(pair.channel1, c), centre_y(pair.channel1, r))) {
          pair.channel1(r, c) = e.intensity[0];
          pair.channel2(r, c) = e.intensity[1];
        }
  }
  if (spec.texture > 0.0) {
    Rng rng(derive_seed(seed, "phantom.texture"));
    Image noise(spec.width, spec.height, spec.pixel_mm);
    for (double& v : noise.data) v = rng.normal();
    noise = gaussian_blur(noise, 2.0);
    double var = 0.0;
    for (double v : noise.data) var += v * v;
    const double sd = std::sqrt(var / noise.size());
    for (std::size_t j = 0; j < noise.size(); ++j)
      pair.channel1.data[j] *= std::max(0.0, 1.0 + spec.texture * noise.data[j] / sd);
  }
  if (spec.lesion) {
    const Lesion& l = *spec.lesion;
    const double half_w = 0.5 * spec.width * spec.pixel_mm, half_h = 0.5 * spec.height * spec.pixel_mm;
    if (std::abs(l.cx_mm) + l.radius_mm > half_w || std::abs(l.cy_mm) + l.radius_mm > half_h)
      throw ParameterError("phantom: lesion outside grid");
    Image& target = l.channel == 0 ? pair.channel1 : pair.channel2;
    target = insert_lesion(target, l.cx_mm, l.cy_mm, l.radius_mm, l.intensity);
  }
  return pair;
}

NormalizationConstants compute_normalization(const std::vector<ImagePair>& pairs) {
  NormalizationConstants c{{0.0, 0.0}};
  for (const auto& p : pairs) {
    for (double v : p.channel1.data) c.scale[0] = std::max(c.scale[0], v);
    for (double v : p.channel2.data) c.scale[1] = std::max(c.scale[1], v);
  }
  for (double& s : c.scale)
    if (!(s > 0.0)) s = 1.0;
  return c;
}

PatchSet extract_training_patches(const std::vector<ImagePair>& pairs, int patch_size, std::size_t count,
                                  std::uint64_t seed) {
  PatchSet set;
  set.channels = 2;
  set.dim = patch_size * patch_size;
  set.count = count;
  if (count == 0) return set;
  if (pairs.empty()) throw ParameterError("extract_training_patches: no images");
  for (const auto& p : pairs)
    if (patch_size > p.channel1.width || patch_size > p.channel1.height || !p.channel1.same_grid(p.channel2))
      throw ParameterError("extract_training_patches: patch larger than image or mismatched pair");
  set.values.assign(count * 2 * static_cast<std::size_t>(set.dim), 0.0f);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto& pair = pairs[rng.below(pairs.size())];
    const int row = static_cast<int>(rng.below(pair.channel1.height - patch_size + 1));
    const int col = static_cast<int>(rng.below(pair.channel1.width - patch_size + 1));
    float* u1 = set.patch(i, 0);
    float* u2 = set.patch(i, 1);
    for (int r = 0; r < patch_size; ++r)
      for (int c = 0; c < patch_size; ++c) {
        u1[r * patch_size + c] = static_cast<float>(pair.channel1(row + r, col + c));
        u2[r * patch_size + c] = static_cast<float>(pair.channel2(row + r, col + c));
      }
  }
  return set;
}

void normalize(PatchSet& set, const NormalizationConstants& c) {
  if (static_cast<int>(c.scale.size()) != set.channels) throw ShapeError("normalize: channel count mismatch");
  for (std::size_t i = 0; i < set.count; ++i)
    for (int k = 0; k < set.channels; ++k) {
      const float inv = static_cast<float>(1.0 / c.scale[k]);
      float* u = set.patch(i, k);
      for (int j = 0; j < set.dim; ++j) u[j] *= inv;
    }
}

PhantomSpec abdomen_phantom_spec(std::uint64_t seed, int grid, double pixel_mm) {
  Rng rng(derive_seed(seed, "phantom.abdomen"));
  auto jit = [&](double v, double rel) { return v * (1.0 + rel * (2.0 * rng.uniform() - 1.0)); };
  auto off = [&](double amp) { return amp * (2.0 * rng.uniform() - 1.0); };
  // Layout is authored on a 256-mm field of view and scaled to the requested one.
  const double s = grid * pixel_mm / 256.0;

  PhantomSpec spec;
  spec.width = grid;
  spec.height = grid;
  spec.pixel_mm = pixel_mm;
  auto add = [&](double cx, double cy, double ax, double ay, double rot, double pet, double mu) {
    spec.ellipses.push_back({cx * s, cy * s, ax * s, ay * s, rot, {pet, mu}});
  };

  const double bx = off(4.0), by = off(4.0);
  const double body_ax = jit(112.0, 0.08), body_ay = jit(84.0, 0.08), body_rot = off(0.08);
  const double fat = jit(6.0, 0.4);
  add(bx, by, body_ax, body_ay, body_rot, jit(0.6, 0.15), 0.0175);
  add(bx, by, body_ax - fat, body_ay - fat, body_rot, jit(1.0, 0.15), 0.0195);
  // Lung bases, posterior-lateral.
  const double lung_y = by + jit(28.0, 0.2);
  add(bx - jit(52.0, 0.1), lung_y, jit(26.0, 0.2), jit(30.0, 0.2), off(0.3), jit(0.25, 0.2), 0.003);
  add(bx + jit(52.0, 0.1), lung_y, jit(24.0, 0.2), jit(28.0, 0.2), off(0.3), jit(0.25, 0.2), 0.003);
  // Liver (patient right = image left) and spleen.
  add(bx - jit(38.0, 0.1), by - jit(12.0, 0.3), jit(44.0, 0.12), jit(36.0, 0.12), off(0.4), jit(2.0, 0.15), 0.0215);
  add(bx + jit(50.0, 0.1), by + jit(4.0, 0.5), jit(18.0, 0.2), jit(24.0, 0.2), off(0.4), jit(1.6, 0.15), 0.0210);
  // Stomach with gas.
  add(bx + jit(28.0, 0.2), by - jit(36.0, 0.2), jit(20.0, 0.2), jit(14.0, 0.2), off(0.5), jit(1.2, 0.2), 0.0200);
  add(bx + jit(28.0, 0.2), by - jit(40.0, 0.2), jit(9.0, 0.3), jit(6.0, 0.3), 0.0, 0.05, 0.0005);
  // Kidneys.
  add(bx - jit(30.0, 0.1), by + jit(40.0, 0.1), jit(11.0, 0.15), jit(16.0, 0.15), off(0.4), jit(3.0, 0.2), 0.0210);
  add(bx + jit(30.0, 0.1), by + jit(40.0, 0.1), jit(11.0, 0.15), jit(16.0, 0.15), off(0.4), jit(3.0, 0.2), 0.0210);
  // Vertebra, canal, aorta.
  add(bx, by + jit(56.0, 0.05), jit(15.0, 0.1), jit(14.0, 0.1), 0.0, jit(0.45, 0.2), 0.038);
  add(bx, by + jit(60.0, 0.05), 5.0, 5.0, 0.0, 0.3, 0.020);
  add(bx + off(4.0), by + jit(34.0, 0.1), 8.0, 8.0, 0.0, jit(1.5, 0.15), 0.0215);
  // PET-only uptake: functional features with no attenuation counterpart.
  const int hot = static_cast<int>(rng.below(3));
  for (int i = 0; i < hot; ++i) {
    const double a = 2.0 * std::numbers::pi * rng.uniform();
    const double rr = 0.55 * rng.uniform();
    add(bx + rr * body_ax * std::cos(a), by + rr * body_ay * std::sin(a), jit(7.0, 0.4), jit(7.0, 0.4), 0.0,
        jit(4.5, 0.3), -1.0);
  }
  // A negative attenuation marks "keep the underlying value"; resolve it against the
  // ellipse the hot spot lands in by inheriting the attenuation at its centre.
  PhantomSpec base = spec;
  base.ellipses.erase(std::remove_if(base.ellipses.begin(), base.ellipses.end(),
                                     [](const Ellipse& e) { return e.intensity[1] < 0.0; }),
                      base.ellipses.end());
  for (auto& e : spec.ellipses) {
    if (e.intensity[1] >= 0.0) continue;
    double mu = 0.0;
    for (const auto& b : base.ellipses)
      if (inside_ellipse(b, e.cx_mm, e.cy_mm)) mu = b.intensity[1];
    e.intensity[1] = mu;
    if (mu == 0.0) e.intensity[0] = 0.0;
  }
  spec.texture = 0.08;
  return spec;
}

std::array<double, 2> lung_lesion_site(const PhantomSpec& spec) {
  for (const auto& e : spec.ellipses)
    if (e.intensity[1] > 0.0 && e.intensity[1] < 0.005 && e.ax_mm > 15.0) return {e.cx_mm, e.cy_mm};
  throw ParameterError("lung_lesion_site: phantom has no lung region");
}

namespace {

using Stroke = std::vector<std::array<double, 2>>;

Stroke arc(double cx, double cy, double rx, double ry, double a0_deg, double a1_deg, int n = 24) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = (a0_deg + (a1_deg - a0_deg) * i / n) * std::numbers::pi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

// Unit-box glyphs, x right and y down.
std::vector<Stroke> glyph(int digit) {
  switch (digit) {
    case 0: return {arc(0.5, 0.5, 0.3, 0.42, 0, 360)};
    case 1: return {{{0.35, 0.25}, {0.55, 0.08}, {0.55, 0.92}}};
    case 2: {
      Stroke s = arc(0.5, 0.32, 0.28, 0.24, 190, 390);
      s.push_back({0.2, 0.92});
      s.push_back({0.82, 0.92});
      return {s};
    }
    case 3: return {arc(0.5, 0.3, 0.26, 0.21, 200, 450), arc(0.5, 0.7, 0.29, 0.22, 270, 520)};
    case 4: return {{{0.65, 0.92}, {0.65, 0.08}, {0.18, 0.65}, {0.85, 0.65}}};
    case 5: {
      Stroke s{{0.78, 0.08}, {0.3, 0.08}, {0.26, 0.45}};
      Stroke bowl = arc(0.48, 0.64, 0.3, 0.27, 235, 520);
      return {s, bowl};
    }
    case 6: return {{{0.7, 0.08}, {0.3, 0.55}}, arc(0.5, 0.68, 0.26, 0.24, 0, 360)};
    case 7: return {{{0.18, 0.08}, {0.82, 0.08}, {0.4, 0.92}}};
    case 8: return {arc(0.5, 0.3, 0.22, 0.2, 0, 360), arc(0.5, 0.7, 0.27, 0.22, 0, 360)};
    default: return {arc(0.5, 0.32, 0.26, 0.24, 0, 360), {{0.76, 0.32}, {0.62, 0.92}}};
  }
}

double segment_distance(double px, double py, const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double vx = b[0] - a[0], vy = b[1] - a[1];
  const double wx = px - a[0], wy = py - a[1];
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0.0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

std::vector<Image> make_glyph_images(std::size_t count, std::uint64_t seed) {
  std::vector<Image> out(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    Rng rng(derive_seed(derive_seed(seed, "glyphs"), static_cast<std::uint64_t>(i)));
    const int digit = static_cast<int>(rng.below(10));
    const double scale = rng.uniform(0.8, 1.1);
    const double rot = rng.uniform(-0.25, 0.25);
    const double shear = rng.uniform(-0.25, 0.25);
    const double tx = rng.uniform(-1.5, 1.5), ty = rng.uniform(-1.5, 1.5);
    const double half_width = 0.5 * rng.uniform(1.4, 2.6);
    const double peak = rng.uniform(0.85, 1.0);
    const double c = std::cos(rot), s = std::sin(rot);

    // Unit box -> 20x20 px box centred in 28x28, with jitter.
    std::vector<Stroke> strokes = glyph(digit);
    for (auto& st : strokes)
      for (auto& p : st) {
        const double u = (p[0] - 0.5) * 20.0 * scale, v = (p[1] - 0.5) * 20.0 * scale;
        const double us = u + shear * v;
        p = {13.5 + tx + c * us - s * v, 13.5 + ty + s * us + c * v};
      }
    Image img(28, 28, 1.0);
    for (int r = 0; r < 28; ++r)
      for (int col = 0; col < 28; ++col) {
        double d = 1e9;
        for (const auto& st : strokes)
          for (std::size_t k = 0; k + 1 < st.size(); ++k) d = std::min(d, segment_distance(col, r, st[k], st[k + 1]));
        img(r, col) = peak * std::clamp(half_width - d + 0.5, 0.0, 1.0);
      }
    out[i] = std::move(img);
  }
  return out;
}

std::vector<ImagePair> make_edge_pairs(const std::vector<Image>& digits, double gaussian_sigma) {
  std::vector<ImagePair> pairs(digits.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(digits.size()); ++i) {
    const Image x1 = digits[i].width == 32 ? digits[i] : pad_to(digits[i], 32);
    pairs[i] = {x1, derive_edge_channel(x1, gaussian_sigma)};
  }
  return pairs;
}

}  // namespace synrecon::datasets

namespace synrecon::datasets {

PatchSet pairs_to_patchset(const std::vector<ImagePair>& pairs) {
  if (pairs.empty()) throw ParameterError("pairs_to_patchset: no images");
  const Image& first = pairs.front().channel1;
  PatchSet set;
  set.channels = 2;
  set.dim = static_cast<int>(first.size());
  set.count = pairs.size();
  set.values.resize(set.count * 2 * set.dim);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].channel1.same_grid(first) || !pairs[i].channel2.same_grid(first))
      throw ShapeError("pairs_to_patchset: images differ in shape");
    for (int j = 0; j < set.dim; ++j) {
      set.patch(i, 0)[j] = static_cast<float>(pairs[i].channel1.data[j]);
      set.patch(i, 1)[j] = static_cast<float>(pairs[i].channel2.data[j]);
    }
  }
  return set;
}

void save_patches(const std::string& path, const PatchSet& set) {
  std::string out = "MVPS";
  const std::uint32_t ch = set.channels, dim = set.dim;
  const std::uint64_t count = set.count;
  out.append(reinterpret_cast<const char*>(&ch), 4);
  out.append(reinterpret_cast<const char*>(&dim), 4);
  out.append(reinterpret_cast<const char*>(&count), 8);
  out.append(reinterpret_cast<const char*>(set.values.data()), sizeof(float) * set.values.size());
  io::write_text(path, out);
}

PatchSet load_patches(const std::string& path) {
  const std::string b = io::read_file(path);
  if (b.size() < 20 || b.compare(0, 4, "MVPS") != 0) throw FormatError("patch file " + path + ": bad header");
  std::uint32_t ch, dim;
  std::uint64_t count;
  std::memcpy(&ch, b.data() + 4, 4);
  std::memcpy(&dim, b.data() + 8, 4);
  std::memcpy(&count, b.data() + 12, 8);
  PatchSet set;
  set.channels = static_cast<int>(ch);
  set.dim = static_cast<int>(dim);
  set.count = count;
  const std::size_t n = static_cast<std::size_t>(ch) * dim * count;
  if (ch == 0 || dim == 0 || b.size() != 20 + sizeof(float) * n)
    throw FormatError("patch file " + path + ": payload size disagrees with header");
  set.values.resize(n);
  std::memcpy(set.values.data(), b.data() + 20, sizeof(float) * n);
  return set;
}

}  // namespace synrecon::datasets
