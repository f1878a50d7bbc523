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

// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "synrecon/datasets.hpp"
#include "synrecon/neuralgen.hpp"
#include "synrecon/patchwork.hpp"
#include "synrecon/projectors.hpp"
#include "synrecon/regularizers.hpp"

using namespace synrecon;

namespace {

const ImagePair& phantom() {
  static const ImagePair p = datasets::make_phantom_pair(datasets::abdomen_phantom_spec(7), 7);
  return p;
}

const projectors::Projector& fan() {
  static const projectors::Projector p({64, 64, 4.0}, projectors::FanGeometry{});
  return p;
}

void BM_forward_omp(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(fan().forward(phantom().channel2));
}
void BM_forward_serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(projectors::reference::forward(fan(), phantom().channel2));
}
void BM_backward_omp(benchmark::State& st) {
  const auto y = fan().forward(phantom().channel2);
  for (auto _ : st) benchmark::DoNotOptimize(fan().backward(y));
}
void BM_backward_serial(benchmark::State& st) {
  const auto y = fan().forward(phantom().channel2);
  for (auto _ : st) benchmark::DoNotOptimize(projectors::reference::backward(fan(), y));
}

const patchwork::PatchLayout& layout() {
  static const auto l = patchwork::build_layout(64, 64, 16, 0.75);
  return l;
}

void BM_scatter_omp(benchmark::State& st) {
  const auto p = patchwork::extract_all(layout(), phantom().channel1);
  for (auto _ : st) benchmark::DoNotOptimize(patchwork::scatter_add(layout(), p, 4.0));
}
void BM_scatter_serial(benchmark::State& st) {
  const auto p = patchwork::extract_all(layout(), phantom().channel1);
  for (auto _ : st) benchmark::DoNotOptimize(patchwork::reference::scatter_add(layout(), p, 4.0));
}

struct LatentFixture {
  neuralgen::MvaeModel model = neuralgen::init_model({}, {6.0, 0.04}, 3);
  regularizers::Generator g{model};
  regularizers::LatentState z0 = regularizers::encode_patches(g, layout(), phantom().channel1, phantom().channel2);
  regularizers::ChannelWeights w = regularizers::channel_weights({});
  solvers::LbfgsConfig cfg{7, 10, 1e-6, 1e-4, 0.5, 30, false};
};

const LatentFixture& latents() {
  static const LatentFixture f;
  return f;
}

void BM_fit_latents_omp(benchmark::State& st) {
  const auto& f = latents();
  for (auto _ : st)
    benchmark::DoNotOptimize(regularizers::fit_latents(f.g, layout(), phantom().channel1, phantom().channel2, f.w, f.z0, f.cfg));
}
void BM_fit_latents_serial(benchmark::State& st) {
  const auto& f = latents();
  for (auto _ : st)
    benchmark::DoNotOptimize(
        regularizers::reference::fit_latents(f.g, layout(), phantom().channel1, phantom().channel2, f.w, f.z0, f.cfg));
}

}  // namespace

BENCHMARK(BM_forward_omp)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_forward_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_backward_omp)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_backward_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_scatter_omp)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_scatter_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_fit_latents_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fit_latents_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
