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

#include <cstdint>
#include <string_view>

namespace synrecon {

/// SplitMix64 finaliser; bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over bytes, used for labels and content hashes.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull);

/// Child seed for a labelled purpose, e.g. derive_seed(master, "physics.pet_noise").
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);
/// Child seed for an indexed stream (sample i, ray i, epoch i, ...).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

/// Counter-based generator: output n is mix64(key + n * golden). Streams keyed by
/// derive_seed are independent of evaluation order, which keeps parallel loops
/// reproducible. Distributions are implemented here rather than via <random>
/// so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller, both outputs used).
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace synrecon
