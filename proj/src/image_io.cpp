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

#include "synrecon/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace synrecon::io {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string encode_pgm16(const Image& image) {
  double lo = 0.0, hi = 0.0;
  if (!image.data.empty()) {
    lo = *std::min_element(image.data.begin(), image.data.end());
    hi = *std::max_element(image.data.begin(), image.data.end());
  }
  std::string out = "P5\n# min=" + fmt_double(lo) + " max=" + fmt_double(hi) + "\n" + std::to_string(image.width) +
                    " " + std::to_string(image.height) + "\n65535\n";
  out.reserve(out.size() + 2 * image.size());
  const double range = hi - lo;
  for (double v : image.data) {
    const double t = range > 0.0 ? (v - lo) / range : 0.0;
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
    out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << content;
  if (!f) throw IoError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_pgm16(const std::string& path, const Image& image) {
  const std::string bytes = encode_pgm16(image);
  write_text(path, bytes);
  double lo = 0.0, hi = 0.0;
  if (!image.data.empty()) {
    lo = *std::min_element(image.data.begin(), image.data.end());
    hi = *std::max_element(image.data.begin(), image.data.end());
  }
  write_text(path + ".meta",
             "min " + fmt_double(lo) + "\nmax " + fmt_double(hi) + "\npixel_mm " + fmt_double(image.pixel_mm) + "\n");
}

Image read_pgm16(const std::string& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw FormatError("not a binary PGM: " + path);
  double lo = 0.0, hi = 0.0;
  int w = 0, h = 0, maxval = 0;
  in >> std::ws;
  while (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
    double a, b;
    if (std::sscanf(line.c_str(), "# min=%lf max=%lf", &a, &b) == 2) {
      lo = a;
      hi = b;
    }
    in >> std::ws;
  }
  in >> w >> h >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval != 65535) throw FormatError("bad PGM header: " + path);
  in.get();
  const std::size_t off = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < off + 2ull * w * h) throw FormatError("truncated PGM payload: " + path);

  double pixel_mm = 1.0;
  try {
    std::istringstream meta(read_file(path + ".meta"));
    std::string key;
    double v;
    while (meta >> key >> v) {
      if (key == "min") lo = v;
      else if (key == "max") hi = v;
      else if (key == "pixel_mm") pixel_mm = v;
    }
  } catch (const IoError&) {
    // Sidecar is optional; the comment line carries min/max.
  }
  Image img(w, h, pixel_mm);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto q = static_cast<std::uint16_t>((static_cast<unsigned char>(bytes[off + 2 * i]) << 8) |
                                              static_cast<unsigned char>(bytes[off + 2 * i + 1]));
    img.data[i] = lo + (hi - lo) * (q / 65535.0);
  }
  return img;
}

Image tile(const std::vector<Image>& tiles, int columns) {
  if (tiles.empty()) throw ParameterError("tile: no images");
  const int w = tiles[0].width, h = tiles[0].height;
  const int n = static_cast<int>(tiles.size());
  const int rows = (n + columns - 1) / columns;
  Image out(columns * w, rows * h, tiles[0].pixel_mm);
  for (int i = 0; i < n; ++i) {
    if (tiles[i].width != w || tiles[i].height != h) throw ShapeError("tile: size mismatch");
    const int r0 = (i / columns) * h, c0 = (i % columns) * w;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) out(r0 + r, c0 + c) = tiles[i](r, c);
  }
  return out;
}

}  // namespace synrecon::io
