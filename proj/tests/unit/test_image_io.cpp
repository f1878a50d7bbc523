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

#include "doctest.h"
#include "synrecon/image_io.hpp"
#include "test_util.hpp"

using namespace synrecon;

TEST_CASE("pgm16 round trip stays within one quantisation step") {
  testutil::TempDir dir;
  const Image x = testutil::random_image(13, 9, 8, -2.0, 5.0, 4.0);
  io::write_pgm16(dir.file("x.pgm"), x);
  const Image y = io::read_pgm16(dir.file("x.pgm"));
  REQUIRE(y.width == 13);
  REQUIRE(y.height == 9);
  CHECK(y.pixel_mm == 4.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) <= 7.0 / 65535.0);
}

TEST_CASE("pgm16 header and encoding are byte-stable") {
  Image x(2, 1, 1.0);
  x[0] = 0.0;
  x[1] = 1.0;
  const std::string b = io::encode_pgm16(x);
  const std::string header = "P5\n# min=0 max=1\n2 1\n65535\n";
  REQUIRE(b.size() == header.size() + 4);
  CHECK(b.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(b[header.size()]) == 0);
  CHECK(static_cast<unsigned char>(b[header.size() + 2]) == 0xff);
  CHECK(static_cast<unsigned char>(b[header.size() + 3]) == 0xff);
  CHECK(io::encode_pgm16(x) == b);
}

TEST_CASE("constant images and the optional sidecar") {
  testutil::TempDir dir;
  const Image c(4, 4, 2.0, 3.25);
  io::write_pgm16(dir.file("c.pgm"), c);
  std::filesystem::remove(dir.file("c.pgm.meta"));
  const Image back = io::read_pgm16(dir.file("c.pgm"));
  for (double v : back.data) CHECK(v == 3.25);
  CHECK(back.pixel_mm == 1.0);
}

TEST_CASE("malformed pgm files raise format errors") {
  testutil::TempDir dir;
  io::write_text(dir.file("a.pgm"), "P2\n1 1\n255\n0");
  CHECK_THROWS_AS(io::read_pgm16(dir.file("a.pgm")), FormatError);
  io::write_text(dir.file("b.pgm"), "P5\n4 4\n65535\nxx");
  CHECK_THROWS_AS(io::read_pgm16(dir.file("b.pgm")), FormatError);
  CHECK_THROWS_AS(io::read_pgm16(dir.file("none.pgm")), IoError);
}

TEST_CASE("tile places images row-major") {
  std::vector<Image> t;
  for (int i = 0; i < 5; ++i) t.emplace_back(2, 3, 1.0, static_cast<double>(i));
  const Image g = io::tile(t, 2);
  CHECK(g.width == 4);
  CHECK(g.height == 9);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 2) == 1.0);
  CHECK(g(3, 0) == 2.0);
  CHECK(g(6, 1) == 4.0);
  CHECK(g(6, 3) == 0.0);
  t.emplace_back(3, 3);
  CHECK_THROWS_AS(io::tile(t, 2), ShapeError);
  CHECK_THROWS_AS(io::tile({}, 2), ParameterError);
}
