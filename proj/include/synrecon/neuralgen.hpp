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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "synrecon/core.hpp"
#include "synrecon/datasets.hpp"

namespace synrecon::neuralgen {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class LayerKind : std::uint32_t { dense = 0, relu = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int in = 0;
  int out = 0;
  Eigen::MatrixXf weight;  // out x in, dense only
  Eigen::VectorXf bias;    // out, dense only
};

using Stack = std::vector<LayerSpec>;

struct ModelShape {
  int patch_width = 16;
  int branches = 2;
  int latent_dim = 32;
  int feature_dim = 64;
  std::vector<int> hidden{256, 128};
};

/// K encoder branches (d -> f), a fusion head (K*f -> [mu; logvar]) and K decoder
/// branches (s -> d). Weights are single precision; c holds the per-channel scales.
struct MvaeModel {
  int latent_dim = 0;
  int patch_width = 0;
  int branches = 0;
  std::vector<double> scale;
  std::vector<Stack> encoders;
  Stack fusion;
  std::vector<Stack> decoders;

  int dim() const { return patch_width * patch_width; }
  int feature_dim() const;
};

/// He-uniform weights from seed, zero biases.
MvaeModel init_model(const ModelShape& shape, const std::vector<double>& scale, std::uint64_t seed);
void validate(const MvaeModel& m);

/// Dense/ReLU stack lowered to a scalar type. relu[i] marks a ReLU after dense layer i.
template <typename T>
struct Net {
  std::vector<Mat<T>> W;
  std::vector<Vec<T>> b;
  std::vector<bool> relu;
  int in() const { return static_cast<int>(W.front().cols()); }
  int out() const { return static_cast<int>(W.back().rows()); }
};

template <typename T>
struct Tape {
  std::vector<Mat<T>> inputs;  // input to each dense layer
  std::vector<Mat<T>> outputs;  // post-activation output of each dense layer
};

template <typename T>
Net<T> lower(const Stack& stack);
void store(const Net<float>& net, Stack& stack);

/// Columns are samples.
template <typename T>
Mat<T> forward(const Net<T>& net, const Mat<T>& x, Tape<T>* tape = nullptr);
/// Returns dL/dx; accumulates weight gradients into grad if non-null (same layout as net).
template <typename T>
Mat<T> backward(const Net<T>& net, const Tape<T>& tape, const Mat<T>& dy, Net<T>* grad = nullptr);

/// The whole model lowered to T, for repeated evaluation.
template <typename T>
struct Compiled {
  int latent_dim = 0;
  int dim = 0;
  std::vector<double> scale;
  std::vector<Net<T>> encoders;
  Net<T> fusion;
  std::vector<Net<T>> decoders;

  explicit Compiled(const MvaeModel& m);
  int branches() const { return static_cast<int>(decoders.size()); }
};

struct Encoding {
  std::vector<double> z;
  std::vector<double> mu;
  std::vector<double> logvar;
};

/// Decoder outputs in model units.
std::vector<std::vector<double>> decode(const MvaeModel& m, std::span<const double> z);
template <typename T>
std::vector<Vec<T>> decode(const Compiled<T>& m, const Vec<T>& z);

/// Patches must already be divided by c_k.
Encoding encode(const MvaeModel& m, const std::vector<std::vector<double>>& patches, bool sample,
                std::uint64_t seed);
/// Batch encoder means; inputs are d x N per branch, result s x N.
template <typename T>
Mat<T> encode_mean(const Compiled<T>& m, const std::vector<Mat<T>>& patches);
/// Fusion head output [mu; logvar] with the logvar rows replaced as given, for tests.
Encoding reparameterize(std::span<const double> mu, std::span<const double> logvar, std::uint64_t seed);

/// sum_k eta_k/2 ||c_k G_k(z) - u_k||^2 and its gradient in z. u_k in channel units.
template <typename T>
T fit_value_grad(const Compiled<T>& m, const Vec<T>& z, const std::vector<Vec<T>>& targets,
                 std::span<const double> eta, Vec<T>* grad);
std::vector<double> grad_z(const MvaeModel& m, std::span<const double> z,
                           const std::vector<std::vector<double>>& targets, std::span<const double> eta);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  double kl_weight = 1.0;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int first_epoch = 0;  // epoch index offset when resuming; keys shuffling and noise
};

template <typename T>
struct ModelGrad {
  std::vector<Net<T>> encoders;
  Net<T> fusion;
  std::vector<Net<T>> decoders;
};

/// Mean ELBO loss over the batch (columns). eps is s x B standard normal noise.
template <typename T>
T elbo_loss(const Compiled<T>& m, const std::vector<Mat<T>>& batch, const Mat<T>& eps, double kl_weight,
            ModelGrad<T>* grad);
/// Standard normal s x B noise drawn from seed.
template <typename T>
Mat<T> draw_noise(int s, int batch, std::uint64_t seed);
/// Batch columns from a PatchSet.
std::vector<Eigen::MatrixXf> gather(const datasets::PatchSet& set, std::span<const std::size_t> indices);

struct TrainResult {
  std::vector<double> loss_history;
  bool diverged = false;
};

/// Adam moments and step count; kept so a resumed run follows the uninterrupted one.
struct AdamState {
  long step = 0;
  std::vector<std::vector<float>> m1, m2;
};

/// If state holds a previous run's moments training continues from them; on return it
/// holds the final moments.
TrainResult train(MvaeModel& m, const datasets::PatchSet& data, const TrainConfig& cfg, AdamState* state = nullptr);
/// "MVAD", u64 step, u32 block count, then per block u64 length, f32 m1, f32 m2.
std::string serialize(const AdamState& s);
AdamState deserialize_adam(const std::string& bytes);

enum class PriorMode { uniform, normal };
std::vector<double> sample_prior(int s, std::uint64_t seed, PriorMode mode);

void save_model(const std::string& path, const MvaeModel& m);
MvaeModel load_model(const std::string& path);
std::string serialize(const MvaeModel& m);
MvaeModel deserialize(const std::string& bytes);

}  // namespace synrecon::neuralgen
