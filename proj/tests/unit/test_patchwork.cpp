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

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "synrecon/patchwork.hpp"
#include "test_util.hpp"

using namespace synrecon;
using namespace synrecon::patchwork;

namespace {

// Values k / 64 with small k: every partial sum is exact in double.
Image dyadic_image(int w, int h, std::uint64_t seed) {
  Image x(w, h, 1.0);
  Rng rng(seed);
  for (auto& v : x.data) v = static_cast<double>(rng.below(4096)) / 64.0;
  return x;
}

// Brute-force coverage: count positions containing each pixel.
std::vector<int> coverage_oracle(const PatchLayout& l) {
  std::vector<int> c(static_cast<std::size_t>(l.grid_width) * l.grid_height, 0);
  for (const auto& p : l.positions)
    for (int r = 0; r < l.patch; ++r)
      for (int col = 0; col < l.patch; ++col) ++c[static_cast<std::size_t>(p.row + r) * l.grid_width + p.col + col];
  return c;
}

}  // namespace

TEST_CASE("layout of the 64/16/75% configuration") {
  const auto l = build_layout(64, 64, 16, 0.75);
  CHECK(l.stride == 4);
  CHECK(l.count() == 169);
  CHECK(l.positions.front().row == 0);
  CHECK(l.positions.back().row == 48);
  CHECK(l.positions.back().col == 48);
  CHECK(l.coverage == coverage_oracle(l));
  CHECK(l.coverage[0] == 1);
  CHECK(l.coverage[static_cast<std::size_t>(32) * 64 + 32] == 16);
}

TEST_CASE("last position is clamped to the border") {
  // 30 wide, patch 8, stride 8 * 0.5 = 4 -> 0,4,...,20 then 22.
  const auto l = build_layout(30, 30, 8, 0.5);
  CHECK(l.stride == 4);
  std::vector<int> cols;
  for (const auto& p : l.positions)
    if (p.row == 0) cols.push_back(p.col);
  CHECK(cols == std::vector<int>{0, 4, 8, 12, 16, 20, 22});
  for (int c : l.coverage) CHECK(c >= 1);
  CHECK(l.coverage == coverage_oracle(l));
}

TEST_CASE("layout validation") {
  CHECK_THROWS_AS(build_layout(10, 10, 12, 0.5), ParameterError);
  CHECK_THROWS_AS(build_layout(10, 10, 4, 1.0), ParameterError);
  CHECK_THROWS_AS(build_layout(10, 10, 4, -0.1), ParameterError);
  CHECK(build_layout(64, 64, 16, 0.75).hash() == build_layout(64, 64, 16, 0.75).hash());
  CHECK(build_layout(64, 64, 16, 0.75).hash() != build_layout(64, 64, 16, 0.5).hash());
}

TEST_CASE("extract copies the window row-major") {
  const auto l = build_layout(12, 10, 4, 0.5);
  const Image x = testutil::random_image(12, 10, 2);
  for (std::size_t p = 0; p < l.count(); ++p) {
    const auto u = extract(l, x, p);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) CHECK(u[r * 4 + c] == x(l.positions[p].row + r, l.positions[p].col + c));
  }
  const auto all = extract_all(l, x);
  CHECK(all.size() == l.count() * 16);
  CHECK(std::equal(all.begin() + 16, all.begin() + 32, extract(l, x, 1).begin()));
}

TEST_CASE("scatter_add of extracted patches is the coverage-weighted image, bitwise") {
  const std::vector<std::array<double, 4>> configs{
      {64, 64, 16, 0.75}, {64, 64, 16, 0.5}, {32, 48, 8, 0.0}, {30, 30, 8, 0.5}, {17, 23, 5, 0.6}};
  for (const auto& c : configs) {
    const auto l = build_layout(static_cast<int>(c[0]), static_cast<int>(c[1]), static_cast<int>(c[2]), c[3]);
    const Image x = dyadic_image(l.grid_width, l.grid_height, static_cast<std::uint64_t>(c[0] + c[2]));
    const Image s = scatter_add(l, extract_all(l, x));
    const Image ref = reference::scatter_add(l, extract_all(l, x));
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double expect = l.coverage[j] * x[j];
      CHECK(std::memcmp(&s.data[j], &expect, sizeof(double)) == 0);
    }
    CHECK(s.data == ref.data);
  }
}

TEST_CASE("scatter_add is the adjoint of extract") {
  const auto l = build_layout(40, 40, 8, 0.75);
  const Image x = testutil::random_image(40, 40, 5, -1.0, 1.0);
  std::vector<double> g(l.count() * l.dim());
  Rng rng(6);
  for (auto& v : g) v = rng.uniform(-1.0, 1.0);
  const auto px = extract_all(l, x);
  const Image ptg = scatter_add(l, g);
  CHECK(dot(px, g) == doctest::Approx(dot(x.data, ptg.data)).epsilon(1e-13));
  // Random (non-dyadic) values: parallel and serial still agree bit for bit.
  CHECK(ptg.data == reference::scatter_add(l, g).data);
}

TEST_CASE("coverage image and shape checks") {
  const auto l = build_layout(20, 20, 6, 0.5);
  const Image cov = coverage_image(l, 2.0);
  CHECK(cov.pixel_mm == 2.0);
  for (std::size_t j = 0; j < cov.size(); ++j) CHECK(cov[j] == l.coverage[j]);
  CHECK_THROWS_AS(scatter_add(l, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(extract(l, Image(21, 20), 0), ShapeError);
}
