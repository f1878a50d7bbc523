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
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "synrecon/datasets.hpp"
#include "test_util.hpp"

using namespace synrecon;
using namespace synrecon::datasets;

namespace {

void write_idx(const std::string& path, std::uint32_t magic, std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
               const std::vector<unsigned char>& pixels) {
  std::ofstream f(path, std::ios::binary);
  for (std::uint32_t v : {magic, n, rows, cols}) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
  }
  f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

}  // namespace

TEST_CASE("idx images are scaled to [0,1] and padded symmetrically") {
  testutil::TempDir dir;
  const auto path = dir.file("img.idx");
  write_idx(path, 0x803, 2, 2, 3, {0, 51, 255, 102, 153, 204, 1, 2, 3, 4, 5, 6});
  const auto imgs = load_idx_images(path, 5);
  REQUIRE(imgs.size() == 2);
  // 5 - 2 rows = 3 spare: 1 on top, 2 below. 5 - 3 cols = 2 spare: 1 on each side.
  CHECK(imgs[0](1, 1) == doctest::Approx(0.0));
  CHECK(imgs[0](1, 2) == doctest::Approx(0.2));
  CHECK(imgs[0](1, 3) == doctest::Approx(1.0));
  CHECK(imgs[0](2, 1) == doctest::Approx(0.4));
  CHECK(imgs[1](2, 3) == doctest::Approx(6.0 / 255.0));
  double total = 0.0;
  for (double v : imgs[0].data) total += v;
  CHECK(total == doctest::Approx((51 + 255 + 102 + 153 + 204) / 255.0));
}

TEST_CASE("idx loader rejects bad magic and truncated payloads") {
  testutil::TempDir dir;
  write_idx(dir.file("bad.idx"), 0x801, 1, 2, 2, {0, 0, 0, 0});
  CHECK_THROWS_AS(load_idx_images(dir.file("bad.idx"), 4), FormatError);
  write_idx(dir.file("short.idx"), 0x803, 2, 2, 2, {0, 0, 0, 0});
  CHECK_THROWS_AS(load_idx_images(dir.file("short.idx"), 4), FormatError);
  CHECK_THROWS_AS(load_idx_images(dir.file("missing.idx"), 4), IoError);
}

TEST_CASE("edge channel matches a direct Roberts oracle without blur") {
  const Image x = testutil::random_image(9, 7, 3);
  const Image e = derive_edge_channel(x, 0.0);
  for (int r = 0; r + 1 < x.height; ++r)
    for (int c = 0; c + 1 < x.width; ++c) {
      const double g1 = x(r, c) - x(r + 1, c + 1);
      const double g2 = x(r, c + 1) - x(r + 1, c);
      CHECK(e(r, c) == doctest::Approx(std::sqrt((g1 * g1 + g2 * g2) / 2.0)).epsilon(1e-14));
    }
  // A constant image has no edges.
  const Image flat = derive_edge_channel(Image(8, 8, 1.0, 0.7), 1.0);
  for (double v : flat.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gaussian blur preserves constants and the mean of a centred impulse") {
  const Image c = gaussian_blur(Image(12, 12, 1.0, 2.5), 1.5);
  for (double v : c.data) CHECK(v == doctest::Approx(2.5).epsilon(1e-13));
  Image impulse(21, 21, 1.0, 0.0);
  impulse(10, 10) = 1.0;
  const Image b = gaussian_blur(impulse, 1.0);
  double sum = 0.0, var = 0.0;
  for (int r = 0; r < 21; ++r)
    for (int col = 0; col < 21; ++col) {
      sum += b(r, col);
      var += b(r, col) * ((r - 10) * (r - 10));
    }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  // Truncated at 3 sigma, the discrete variance is slightly below sigma^2.
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("disc and annulus pixel sets") {
  const Image g(64, 64, 4.0);
  const auto disc = disc_pixels(g, 0.0, 0.0, 40.0);
  // Pixel-centre count approaches the area for radii well above the pixel size.
  CHECK(static_cast<double>(disc.size()) == doctest::Approx(std::numbers::pi * 100.0).epsilon(0.05));
  const auto ring = annulus_pixels(g, 0.0, 0.0, 40.0, 80.0);
  for (std::size_t j : ring) CHECK(std::find(disc.begin(), disc.end(), j) == disc.end());
  CHECK(disc.size() + ring.size() == disc_pixels(g, 0.0, 0.0, 80.0).size());
}

TEST_CASE("lesion insertion adds intensity only inside the disc") {
  const Image base(32, 32, 2.0, 1.0);
  const Image l = insert_lesion(base, 4.0, -6.0, 5.0, 3.0);
  const auto idx = disc_pixels(base, 4.0, -6.0, 5.0);
  double added = 0.0;
  for (std::size_t j = 0; j < l.size(); ++j) added += l[j] - base[j];
  CHECK(added == doctest::Approx(3.0 * idx.size()));
  CHECK(insert_lesion(base, 4.0, -6.0, 5.0, 0.0).data == base.data);
  CHECK_THROWS_AS(insert_lesion(base, 500.0, 0.0, 5.0, 1.0), ParameterError);
}

TEST_CASE("phantoms are seeded, non-negative and carry PET-only structure") {
  const auto spec = abdomen_phantom_spec(5);
  const auto a = make_phantom_pair(spec, 5);
  const auto b = make_phantom_pair(abdomen_phantom_spec(5), 5);
  CHECK(a.channel1.data == b.channel1.data);
  CHECK(a.channel2.data == b.channel2.data);
  const auto c = make_phantom_pair(abdomen_phantom_spec(6), 6);
  CHECK(a.channel1.data != c.channel1.data);
  for (double v : a.channel1.data) CHECK(v >= 0.0);
  for (double v : a.channel2.data) CHECK(v >= 0.0);
  // Attenuation stays in a soft-tissue-to-bone range (1/mm).
  double mx = 0.0;
  for (double v : a.channel2.data) mx = std::max(mx, v);
  CHECK(mx < 0.05);
  const auto site = lung_lesion_site(spec);
  CHECK(std::abs(site[0]) < 128.0);
  CHECK(std::abs(site[1]) < 128.0);
}

TEST_CASE("training patches are sub-windows of the source pair") {
  std::vector<ImagePair> pairs{{testutil::random_image(20, 20, 1), testutil::random_image(20, 20, 2)}};
  const auto set = extract_training_patches(pairs, 6, 50, 99);
  REQUIRE(set.count == 50);
  for (std::size_t i = 0; i < set.count; ++i) {
    const float* u = set.patch(i, 0);
    bool found = false;
    for (int r = 0; r <= 14 && !found; ++r)
      for (int c = 0; c <= 14 && !found; ++c) {
        bool same = true;
        for (int j = 0; j < 36 && same; ++j) same = u[j] == static_cast<float>(pairs[0].channel1(r + j / 6, c + j % 6));
        if (same) {
          const float* v = set.patch(i, 1);
          for (int j = 0; j < 36; ++j) CHECK(v[j] == static_cast<float>(pairs[0].channel2(r + j / 6, c + j % 6)));
          found = true;
        }
      }
    CHECK(found);
  }
  CHECK(extract_training_patches(pairs, 6, 50, 99).values == set.values);
  CHECK_THROWS_AS(extract_training_patches(pairs, 21, 5, 1), ParameterError);
}

TEST_CASE("normalization divides by the per-channel maximum") {
  std::vector<ImagePair> pairs{{Image(4, 4, 1.0, 2.0), Image(4, 4, 1.0, 0.02)}};
  pairs[0].channel1(1, 1) = 8.0;
  const auto c = compute_normalization(pairs);
  CHECK(c.scale[0] == 8.0);
  CHECK(c.scale[1] == 0.02);
  auto set = pairs_to_patchset(pairs);
  normalize(set, c);
  CHECK(set.patch(0, 0)[5] == doctest::Approx(1.0));
  CHECK(set.patch(0, 0)[0] == doctest::Approx(0.25));
  CHECK(set.patch(0, 1)[0] == doctest::Approx(1.0));
}

TEST_CASE("patch sets round-trip through the binary format") {
  testutil::TempDir dir;
  std::vector<ImagePair> pairs{{testutil::random_image(8, 8, 4), testutil::random_image(8, 8, 5)}};
  const auto set = extract_training_patches(pairs, 4, 7, 1);
  save_patches(dir.file("p.mvps"), set);
  const auto back = load_patches(dir.file("p.mvps"));
  CHECK(back.count == set.count);
  CHECK(back.dim == set.dim);
  CHECK(back.values == set.values);
  std::ofstream(dir.file("bad.mvps"), std::ios::binary) << "MVPX";
  CHECK_THROWS_AS(load_patches(dir.file("bad.mvps")), FormatError);
}

TEST_CASE("glyphs are deterministic 28x28 images in [0,1] and edge pairs are 32x32") {
  const auto g = make_glyph_images(6, 11);
  REQUIRE(g.size() == 6);
  CHECK(make_glyph_images(6, 11)[3].data == g[3].data);
  for (const auto& img : g) {
    CHECK(img.width == 28);
    double mx = 0.0;
    for (double v : img.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      mx = std::max(mx, v);
    }
    CHECK(mx > 0.5);
  }
  const auto pairs = make_edge_pairs(g, 1.0);
  CHECK(pairs[0].channel1.width == 32);
  CHECK(pairs[0].channel2.width == 32);
  CHECK(pairs[0].channel1(2, 2) == g[0](0, 0));
}
