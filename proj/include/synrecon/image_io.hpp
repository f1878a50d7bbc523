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

#include <string>

#include "synrecon/core.hpp"

namespace synrecon::io {

/// 16-bit big-endian binary PGM (P5). A comment line records the float min/max used for
/// quantisation, and a sidecar `<path>.meta` stores min, max and pixel size as text.
void write_pgm16(const std::string& path, const Image& image);
Image read_pgm16(const std::string& path);

/// Bytes of the PGM encoding (used for hashing and tests).
std::string encode_pgm16(const Image& image);

/// Tiles equally sized images into a grid with `columns` columns.
Image tile(const std::vector<Image>& tiles, int columns);

void write_text(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace synrecon::io
