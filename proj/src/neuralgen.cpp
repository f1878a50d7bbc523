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

#include "synrecon/neuralgen.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "synrecon/image_io.hpp"
#include "synrecon/rng.hpp"

namespace synrecon::neuralgen {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'A', 'E'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

LayerSpec dense_layer(int in, int out, Rng& rng) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.in = in;
  l.out = out;
  l.weight.resize(out, in);
  const double limit = std::sqrt(6.0 / in);
  // Row-major fill so the draw order matches the file layout.
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) l.weight(r, c) = static_cast<float>(rng.uniform(-limit, limit));
  l.bias = Eigen::VectorXf::Zero(out);
  return l;
}

LayerSpec relu_layer(int n) { return LayerSpec{LayerKind::relu, n, n, {}, {}}; }

Stack make_stack(const std::vector<int>& sizes, bool relu_last, Rng& rng) {
  Stack s;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    s.push_back(dense_layer(sizes[i], sizes[i + 1], rng));
    if (i + 2 < sizes.size() || relu_last) s.push_back(relu_layer(sizes[i + 1]));
  }
  return s;
}

int stack_in(const Stack& s) { return s.front().in; }
int stack_out(const Stack& s) { return s.back().out; }

void check_stack(const Stack& s, const char* what) {
  if (s.empty() || s.front().kind != LayerKind::dense) throw ShapeError(std::string(what) + ": stack must start with a dense layer");
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& l = s[i];
    if (i > 0 && l.in != s[i - 1].out) throw ShapeError(std::string(what) + ": chained sizes disagree");
    if (l.kind == LayerKind::dense) {
      if (l.weight.rows() != l.out || l.weight.cols() != l.in || l.bias.size() != l.out)
        throw ShapeError(std::string(what) + ": weight shape disagrees with layer header");
      if (!l.weight.allFinite() || !l.bias.allFinite()) throw NumericError(std::string(what) + ": non-finite weights");
    } else {
      if (l.in != l.out) throw ShapeError(std::string(what) + ": relu must preserve size");
      if (s[i - 1].kind != LayerKind::dense) throw ShapeError(std::string(what) + ": relu must follow a dense layer");
    }
  }
}

template <typename T>
Net<T> zero_like(const Net<T>& n) {
  Net<T> g;
  g.relu = n.relu;
  for (std::size_t i = 0; i < n.W.size(); ++i) {
    g.W.push_back(Mat<T>::Zero(n.W[i].rows(), n.W[i].cols()));
    g.b.push_back(Vec<T>::Zero(n.b[i].size()));
  }
  return g;
}

template <typename T>
void collect(Net<T>& n, std::vector<std::span<T>>& out) {
  for (std::size_t i = 0; i < n.W.size(); ++i) {
    out.emplace_back(n.W[i].data(), n.W[i].size());
    out.emplace_back(n.b[i].data(), n.b[i].size());
  }
}

template <typename T>
std::vector<std::span<T>> parameters(std::vector<Net<T>>& enc, Net<T>& fusion, std::vector<Net<T>>& dec) {
  std::vector<std::span<T>> out;
  for (auto& n : enc) collect(n, out);
  collect(fusion, out);
  for (auto& n : dec) collect(n, out);
  return out;
}

constexpr char kAdamMagic[4] = {'M', 'V', 'A', 'D'};

class Writer {
 public:
  template <typename V>
  void put(V v) {
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    bytes_.append(buf, sizeof(V));
  }
  void raw(const void* p, std::size_t n) { bytes_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}
  template <typename V>
  V get() {
    V v;
    raw(&v, sizeof(V));
    return v;
  }
  void raw(void* p, std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw FormatError("model file truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                        " more)");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void write_stack(Writer& w, const Stack& s) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
  for (const auto& l : s) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.kind));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.in));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out));
    if (l.kind == LayerKind::dense) {
      const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = l.weight;
      w.raw(rm.data(), sizeof(float) * rm.size());
      w.raw(l.bias.data(), sizeof(float) * l.bias.size());
    }
  }
}

Stack read_stack(Reader& r) {
  const auto n = r.get<std::uint32_t>();
  if (n == 0 || n > 64) throw FormatError("model file: implausible layer count " + std::to_string(n));
  Stack s(n);
  for (auto& l : s) {
    const auto kind = r.get<std::uint32_t>();
    if (kind > 1) throw FormatError("model file: unknown layer kind " + std::to_string(kind) + " at byte " + std::to_string(r.pos()));
    l.kind = static_cast<LayerKind>(kind);
    l.in = static_cast<int>(r.get<std::uint32_t>());
    l.out = static_cast<int>(r.get<std::uint32_t>());
    if (l.in <= 0 || l.out <= 0 || l.in > (1 << 20) || l.out > (1 << 20))
      throw FormatError("model file: implausible layer shape at byte " + std::to_string(r.pos()));
    if (l.kind == LayerKind::dense) {
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(l.out, l.in);
      r.raw(rm.data(), sizeof(float) * rm.size());
      l.weight = rm;
      l.bias.resize(l.out);
      r.raw(l.bias.data(), sizeof(float) * l.out);
    }
  }
  return s;
}

}  // namespace

int MvaeModel::feature_dim() const { return encoders.empty() ? 0 : stack_out(encoders.front()); }

MvaeModel init_model(const ModelShape& shape, const std::vector<double>& scale, std::uint64_t seed) {
  if (shape.branches < 1 || shape.latent_dim < 1 || shape.feature_dim < 1 || shape.patch_width < 1)
    throw ParameterError("init_model: sizes must be positive");
  if (static_cast<int>(scale.size()) != shape.branches)
    throw ParameterError("init_model: need one normalization constant per branch");
  const int d = shape.patch_width * shape.patch_width;
  if (shape.latent_dim >= d) throw ParameterError("init_model: latent dimension must be below the patch dimension");

  MvaeModel m;
  m.latent_dim = shape.latent_dim;
  m.patch_width = shape.patch_width;
  m.branches = shape.branches;
  m.scale = scale;
  std::vector<int> enc{d};
  enc.insert(enc.end(), shape.hidden.begin(), shape.hidden.end());
  enc.push_back(shape.feature_dim);
  std::vector<int> dec{shape.latent_dim};
  dec.insert(dec.end(), shape.hidden.rbegin(), shape.hidden.rend());
  dec.push_back(d);

  for (int k = 0; k < shape.branches; ++k) {
    Rng rng(derive_seed(derive_seed(seed, "encoder"), static_cast<std::uint64_t>(k)));
    m.encoders.push_back(make_stack(enc, true, rng));
  }
  Rng frng(derive_seed(seed, "fusion"));
  m.fusion = make_stack({shape.branches * shape.feature_dim, 2 * shape.latent_dim}, false, frng);
  for (int k = 0; k < shape.branches; ++k) {
    Rng rng(derive_seed(derive_seed(seed, "decoder"), static_cast<std::uint64_t>(k)));
    m.decoders.push_back(make_stack(dec, false, rng));
  }
  return m;
}

void validate(const MvaeModel& m) {
  if (m.branches < 1 || static_cast<int>(m.encoders.size()) != m.branches ||
      static_cast<int>(m.decoders.size()) != m.branches || static_cast<int>(m.scale.size()) != m.branches)
    throw ShapeError("model: branch count disagrees with stacks");
  if (m.latent_dim < 1 || m.latent_dim >= m.dim()) throw ShapeError("model: latent dimension must satisfy 0 < s < d");
  for (double c : m.scale)
    if (!(c > 0.0) || !std::isfinite(c)) throw ShapeError("model: normalization constants must be positive");
  for (const auto& s : m.encoders) {
    check_stack(s, "encoder");
    if (stack_in(s) != m.dim() || stack_out(s) != m.feature_dim()) throw ShapeError("encoder: wrong input/feature size");
  }
  check_stack(m.fusion, "fusion");
  if (stack_in(m.fusion) != m.branches * m.feature_dim() || stack_out(m.fusion) != 2 * m.latent_dim)
    throw ShapeError("fusion: wrong size");
  for (const auto& s : m.decoders) {
    check_stack(s, "decoder");
    if (stack_in(s) != m.latent_dim || stack_out(s) != m.dim()) throw ShapeError("decoder: wrong size");
  }
}

template <typename T>
Net<T> lower(const Stack& stack) {
  Net<T> n;
  for (const auto& l : stack) {
    if (l.kind == LayerKind::dense) {
      n.W.push_back(l.weight.cast<T>());
      n.b.push_back(l.bias.cast<T>());
      n.relu.push_back(false);
    } else {
      n.relu.back() = true;
    }
  }
  return n;
}

void store(const Net<float>& net, Stack& stack) {
  std::size_t i = 0;
  for (auto& l : stack) {
    if (l.kind != LayerKind::dense) continue;
    l.weight = net.W[i];
    l.bias = net.b[i];
    ++i;
  }
}

template <typename T>
Mat<T> forward(const Net<T>& net, const Mat<T>& x, Tape<T>* tape) {
  if (x.rows() != net.in()) throw ShapeError("forward: input size mismatch");
  if (tape) {
    tape->inputs.resize(net.W.size());
    tape->outputs.resize(net.W.size());
  }
  Mat<T> h = x;
  for (std::size_t i = 0; i < net.W.size(); ++i) {
    Mat<T> y = net.W[i] * h;
    y.colwise() += net.b[i];
    if (net.relu[i]) y = y.cwiseMax(T(0));
    if (tape) {
      tape->inputs[i] = std::move(h);
      tape->outputs[i] = y;
    }
    h = std::move(y);
  }
  return h;
}

template <typename T>
Mat<T> backward(const Net<T>& net, const Tape<T>& tape, const Mat<T>& dy, Net<T>* grad) {
  Mat<T> g = dy;
  for (std::size_t i = net.W.size(); i-- > 0;) {
    if (net.relu[i]) g = (tape.outputs[i].array() > T(0)).select(g, T(0));
    if (grad) {
      grad->W[i].noalias() += g * tape.inputs[i].transpose();
      grad->b[i] += g.rowwise().sum();
    }
    g = net.W[i].transpose() * g;
  }
  return g;
}

template <typename T>
Compiled<T>::Compiled(const MvaeModel& m) : latent_dim(m.latent_dim), dim(m.dim()), scale(m.scale) {
  validate(m);
  for (const auto& s : m.encoders) encoders.push_back(lower<T>(s));
  fusion = lower<T>(m.fusion);
  for (const auto& s : m.decoders) decoders.push_back(lower<T>(s));
}

template <typename T>
std::vector<Vec<T>> decode(const Compiled<T>& m, const Vec<T>& z) {
  if (z.size() != m.latent_dim) throw ShapeError("decode: latent size mismatch");
  std::vector<Vec<T>> out;
  for (const auto& dec : m.decoders) out.push_back(forward<T>(dec, z));
  return out;
}

std::vector<std::vector<double>> decode(const MvaeModel& m, std::span<const double> z) {
  const Compiled<double> c(m);
  if (static_cast<int>(z.size()) != m.latent_dim) throw ShapeError("decode: latent size mismatch");
  const Vec<double> zv = Eigen::Map<const Vec<double>>(z.data(), z.size());
  std::vector<std::vector<double>> out;
  for (const auto& v : decode(c, zv)) out.emplace_back(v.data(), v.data() + v.size());
  return out;
}

template <typename T>
Mat<T> encode_mean(const Compiled<T>& m, const std::vector<Mat<T>>& patches) {
  if (static_cast<int>(patches.size()) != m.branches()) throw ShapeError("encode: need one patch per branch");
  const int f = m.encoders.front().out();
  Mat<T> h(f * m.branches(), patches.front().cols());
  for (int k = 0; k < m.branches(); ++k) {
    if (patches[k].rows() != m.dim || patches[k].cols() != h.cols()) throw ShapeError("encode: patch size mismatch");
    h.middleRows(k * f, f) = forward<T>(m.encoders[k], patches[k]);
  }
  return forward<T>(m.fusion, h).topRows(m.latent_dim);
}

Encoding reparameterize(std::span<const double> mu, std::span<const double> logvar, std::uint64_t seed) {
  if (mu.size() != logvar.size()) throw ShapeError("reparameterize: size mismatch");
  Encoding e;
  e.mu.assign(mu.begin(), mu.end());
  e.logvar.assign(logvar.begin(), logvar.end());
  e.z.resize(mu.size());
  Rng rng(seed);
  for (std::size_t j = 0; j < mu.size(); ++j) e.z[j] = mu[j] + std::exp(0.5 * logvar[j]) * rng.normal();
  return e;
}

Encoding encode(const MvaeModel& m, const std::vector<std::vector<double>>& patches, bool sample, std::uint64_t seed) {
  const Compiled<double> c(m);
  if (static_cast<int>(patches.size()) != m.branches) throw ShapeError("encode: need one patch per branch");
  const int f = m.feature_dim();
  Mat<double> h(f * m.branches, 1);
  for (int k = 0; k < m.branches; ++k) {
    if (static_cast<int>(patches[k].size()) != m.dim()) throw ShapeError("encode: patch size mismatch");
    const Mat<double> u = Eigen::Map<const Mat<double>>(patches[k].data(), m.dim(), 1);
    h.middleRows(k * f, f) = forward<double>(c.encoders[k], u);
  }
  const Mat<double> out = forward<double>(c.fusion, h);
  std::vector<double> mu(out.data(), out.data() + m.latent_dim);
  std::vector<double> lv(out.data() + m.latent_dim, out.data() + 2 * m.latent_dim);
  if (sample) return reparameterize(mu, lv, seed);
  return Encoding{mu, mu, lv};
}

template <typename T>
T fit_value_grad(const Compiled<T>& m, const Vec<T>& z, const std::vector<Vec<T>>& targets, std::span<const double> eta,
                 Vec<T>* grad) {
  if (static_cast<int>(targets.size()) != m.branches() || static_cast<int>(eta.size()) != m.branches())
    throw ShapeError("fit_value_grad: need one target and weight per branch");
  if (z.size() != m.latent_dim) throw ShapeError("fit_value_grad: latent size mismatch");
  if (grad) grad->setZero(m.latent_dim);
  T value = 0;
  Tape<T> tape;
  for (int k = 0; k < m.branches(); ++k) {
    if (eta[k] == 0.0) continue;
    const T c = static_cast<T>(m.scale[k]);
    const T e = static_cast<T>(eta[k]);
    const Mat<T> out = forward<T>(m.decoders[k], z, grad ? &tape : nullptr);
    const Vec<T> r = c * out.col(0) - targets[k];
    value += e / 2 * r.squaredNorm();
    if (grad) *grad += backward<T>(m.decoders[k], tape, (e * c) * r).col(0);
  }
  return value;
}

std::vector<double> grad_z(const MvaeModel& m, std::span<const double> z, const std::vector<std::vector<double>>& targets,
                           std::span<const double> eta) {
  const Compiled<double> c(m);
  if (static_cast<int>(z.size()) != m.latent_dim) throw ShapeError("grad_z: latent size mismatch");
  for (double e : eta)
    if (e < 0.0) throw ParameterError("grad_z: weights must be non-negative");
  std::vector<Vec<double>> t;
  for (const auto& u : targets) {
    if (static_cast<int>(u.size()) != m.dim()) throw ShapeError("grad_z: target size mismatch");
    t.push_back(Eigen::Map<const Vec<double>>(u.data(), u.size()));
  }
  Vec<double> g;
  fit_value_grad<double>(c, Eigen::Map<const Vec<double>>(z.data(), z.size()), t, eta, &g);
  return {g.data(), g.data() + g.size()};
}

template <typename T>
Mat<T> draw_noise(int s, int batch, std::uint64_t seed) {
  Mat<T> eps(s, batch);
  Rng rng(seed);
  for (int j = 0; j < batch; ++j)
    for (int i = 0; i < s; ++i) eps(i, j) = static_cast<T>(rng.normal());
  return eps;
}

template <typename T>
T elbo_loss(const Compiled<T>& m, const std::vector<Mat<T>>& batch, const Mat<T>& eps, double kl_weight,
            ModelGrad<T>* grad) {
  const int K = m.branches();
  if (static_cast<int>(batch.size()) != K) throw ShapeError("elbo_loss: need one batch matrix per branch");
  const Eigen::Index B = batch.front().cols();
  if (B == 0) throw ParameterError("elbo_loss: empty batch");
  if (eps.rows() != m.latent_dim || eps.cols() != B) throw ShapeError("elbo_loss: noise shape mismatch");
  const int f = m.encoders.front().out();
  const int s = m.latent_dim;
  const T lambda = static_cast<T>(kl_weight);
  const T inv_b = T(1) / static_cast<T>(B);

  std::vector<Tape<T>> enc_tape(K), dec_tape(K);
  Tape<T> fus_tape;
  Mat<T> h(f * K, B);
  for (int k = 0; k < K; ++k) {
    if (batch[k].rows() != m.dim || batch[k].cols() != B) throw ShapeError("elbo_loss: batch shape mismatch");
    h.middleRows(k * f, f) = forward<T>(m.encoders[k], batch[k], &enc_tape[k]);
  }
  const Mat<T> head = forward<T>(m.fusion, h, &fus_tape);
  const auto mu = head.topRows(s);
  const auto lv = head.bottomRows(s);
  const Mat<T> sd = (lv.array() * T(0.5)).exp().matrix();
  const Mat<T> z = mu + sd.cwiseProduct(eps);

  T recon = 0;
  std::vector<Mat<T>> resid(K);
  for (int k = 0; k < K; ++k) {
    resid[k] = forward<T>(m.decoders[k], z, &dec_tape[k]) - batch[k];
    recon += resid[k].squaredNorm() / 2;
  }
  const T kl = (lv.array().exp() + mu.array().square() - T(1) - lv.array()).sum() / 2;
  const T loss = (recon + lambda * kl) * inv_b;
  if (!grad) return loss;

  Mat<T> dz = Mat<T>::Zero(s, B);
  for (int k = 0; k < K; ++k) dz += backward<T>(m.decoders[k], dec_tape[k], resid[k] * inv_b, &grad->decoders[k]);
  Mat<T> dhead(2 * s, B);
  dhead.topRows(s) = dz + (lambda * inv_b) * mu;
  dhead.bottomRows(s) = (dz.array() * eps.array() * sd.array() * T(0.5) +
                         (lambda * inv_b * T(0.5)) * (lv.array().exp() - T(1)))
                            .matrix();
  const Mat<T> dh = backward<T>(m.fusion, fus_tape, dhead, &grad->fusion);
  for (int k = 0; k < K; ++k) backward<T>(m.encoders[k], enc_tape[k], dh.middleRows(k * f, f), &grad->encoders[k]);
  return loss;
}

std::vector<Eigen::MatrixXf> gather(const datasets::PatchSet& set, std::span<const std::size_t> indices) {
  std::vector<Eigen::MatrixXf> out(set.channels, Eigen::MatrixXf(set.dim, static_cast<Eigen::Index>(indices.size())));
  for (int k = 0; k < set.channels; ++k)
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (indices[j] >= set.count) throw ParameterError("gather: sample index out of range");
      std::memcpy(out[k].col(static_cast<Eigen::Index>(j)).data(), set.patch(indices[j], k), sizeof(float) * set.dim);
    }
  return out;
}

TrainResult train(MvaeModel& m, const datasets::PatchSet& data, const TrainConfig& cfg, AdamState* state) {
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("train: learning rate must be positive");
  if (cfg.kl_weight < 0.0) throw ParameterError("train: KL weight must be non-negative");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw ParameterError("train: bad batch size or epoch count");
  validate(m);
  TrainResult result;
  if (cfg.epochs == 0) return result;
  if (data.channels != m.branches || data.dim != m.dim()) throw ShapeError("train: dataset does not match model");
  if (data.count == 0) throw ParameterError("train: empty dataset");

  Compiled<float> net(m);
  ModelGrad<float> grad{{}, zero_like(net.fusion), {}};
  for (const auto& e : net.encoders) grad.encoders.push_back(zero_like(e));
  for (const auto& d : net.decoders) grad.decoders.push_back(zero_like(d));
  auto params = parameters(net.encoders, net.fusion, net.decoders);
  auto grads = parameters(grad.encoders, grad.fusion, grad.decoders);
  std::vector<std::vector<float>> m1, m2;
  long step = 0;
  if (state && state->step > 0) {
    if (state->m1.size() != params.size() || state->m2.size() != params.size())
      throw ShapeError("train: optimizer state does not match the model");
    for (std::size_t t = 0; t < params.size(); ++t)
      if (state->m1[t].size() != params[t].size() || state->m2[t].size() != params[t].size())
        throw ShapeError("train: optimizer state does not match the model");
    m1 = state->m1;
    m2 = state->m2;
    step = state->step;
  } else {
    for (const auto& p : params) {
      m1.emplace_back(p.size(), 0.0f);
      m2.emplace_back(p.size(), 0.0f);
    }
  }

  const std::size_t n = data.count;
  const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");
  const std::uint64_t noise_seed = derive_seed(cfg.seed, "noise");
  const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  const float lr = static_cast<float>(cfg.learning_rate), eps_adam = static_cast<float>(cfg.epsilon);
  std::vector<std::size_t> order(n);

  for (int e = 0; e < cfg.epochs; ++e) {
    const int epoch = cfg.first_epoch + e;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      const auto batch = gather(data, std::span(order).subspan(lo, hi - lo));
      const auto global = static_cast<std::uint64_t>(epoch) * n_batches + b;
      const auto eps = draw_noise<float>(m.latent_dim, static_cast<int>(hi - lo), derive_seed(noise_seed, global));
      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0f);
      const float loss = elbo_loss<float>(net, batch, eps, cfg.kl_weight, &grad);
      if (!std::isfinite(loss))
        throw NumericError("train: non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      epoch_loss += static_cast<double>(loss) * static_cast<double>(hi - lo);

      ++step;
      const float c1 = 1.0f - std::pow(b1, static_cast<float>(step));
      const float c2 = 1.0f - std::pow(b2, static_cast<float>(step));
      for (std::size_t t = 0; t < params.size(); ++t) {
        float* p = params[t].data();
        const float* g = grads[t].data();
        float* mm = m1[t].data();
        float* vv = m2[t].data();
        for (std::size_t j = 0; j < params[t].size(); ++j) {
          mm[j] = b1 * mm[j] + (1.0f - b1) * g[j];
          vv[j] = b2 * vv[j] + (1.0f - b2) * g[j] * g[j];
          p[j] -= lr * (mm[j] / c1) / (std::sqrt(vv[j] / c2) + eps_adam);
        }
      }
    }
    epoch_loss /= static_cast<double>(n);
    result.loss_history.push_back(epoch_loss);
    if (epoch_loss > 1e6) {
      result.diverged = true;
      break;
    }
  }

  for (int k = 0; k < m.branches; ++k) {
    store(net.encoders[k], m.encoders[k]);
    store(net.decoders[k], m.decoders[k]);
  }
  store(net.fusion, m.fusion);
  if (state) *state = {step, std::move(m1), std::move(m2)};
  return result;
}

std::string serialize(const AdamState& s) {
  Writer w;
  w.raw(kAdamMagic, 4);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(s.step));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.m1.size()));
  for (std::size_t t = 0; t < s.m1.size(); ++t) {
    if (s.m2[t].size() != s.m1[t].size()) throw ShapeError("optimizer state: moment sizes differ");
    w.put<std::uint64_t>(s.m1[t].size());
    w.raw(s.m1[t].data(), sizeof(float) * s.m1[t].size());
    w.raw(s.m2[t].data(), sizeof(float) * s.m2[t].size());
  }
  return w.take();
}

AdamState deserialize_adam(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kAdamMagic, 4) != 0) throw FormatError("optimizer state: bad magic at byte 0");
  AdamState s;
  s.step = static_cast<long>(r.get<std::uint64_t>());
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < n; ++t) {
    const auto len = r.get<std::uint64_t>();
    if (len > bytes.size()) throw FormatError("optimizer state: bad block size at byte " + std::to_string(r.pos() - 8));
    s.m1.emplace_back(len);
    s.m2.emplace_back(len);
    r.raw(s.m1.back().data(), sizeof(float) * len);
    r.raw(s.m2.back().data(), sizeof(float) * len);
  }
  if (!r.done()) throw FormatError("optimizer state: trailing bytes at " + std::to_string(r.pos()));
  return s;
}

std::vector<double> sample_prior(int s, std::uint64_t seed, PriorMode mode) {
  if (s < 1) throw ParameterError("sample_prior: latent dimension must be positive");
  Rng rng(seed);
  std::vector<double> z(s);
  for (auto& v : z) v = mode == PriorMode::uniform ? rng.uniform(-3.0, 3.0) : rng.normal();
  return z;
}

std::string serialize(const MvaeModel& m) {
  validate(m);
  Writer w;
  w.raw(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<double>(m.latent_dim);
  w.put<double>(m.patch_width);
  w.put<double>(m.branches);
  for (double c : m.scale) w.put<double>(c);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(2 * m.branches + 1));
  for (const auto& s : m.encoders) write_stack(w, s);
  write_stack(w, m.fusion);
  for (const auto& s : m.decoders) write_stack(w, s);
  return w.take();
}

MvaeModel deserialize(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("model file: bad magic at byte 0");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("model file: unsupported version " + std::to_string(version));
  auto as_int = [&](const char* what) {
    const double v = r.get<double>();
    if (!(v >= 1.0 && v <= 1e6) || v != std::floor(v)) throw FormatError(std::string("model file: bad ") + what);
    return static_cast<int>(v);
  };
  MvaeModel m;
  m.latent_dim = as_int("latent dimension");
  m.patch_width = as_int("patch width");
  m.branches = as_int("branch count");
  if (m.branches > 16) throw FormatError("model file: implausible branch count");
  for (int k = 0; k < m.branches; ++k) m.scale.push_back(r.get<double>());
  const auto stacks = r.get<std::uint32_t>();
  if (stacks != static_cast<std::uint32_t>(2 * m.branches + 1)) throw FormatError("model file: stack count disagrees with K");
  for (int k = 0; k < m.branches; ++k) m.encoders.push_back(read_stack(r));
  m.fusion = read_stack(r);
  for (int k = 0; k < m.branches; ++k) m.decoders.push_back(read_stack(r));
  if (!r.done()) throw FormatError("model file: trailing bytes after byte " + std::to_string(r.pos()));
  try {
    validate(m);
  } catch (const Error& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  return m;
}

void save_model(const std::string& path, const MvaeModel& m) { io::write_text(path, serialize(m)); }

MvaeModel load_model(const std::string& path) { return deserialize(io::read_file(path)); }

#define SYNRECON_INSTANTIATE(T)                                                                             \
  template Net<T> lower<T>(const Stack&);                                                                   \
  template Mat<T> forward<T>(const Net<T>&, const Mat<T>&, Tape<T>*);                                       \
  template Mat<T> backward<T>(const Net<T>&, const Tape<T>&, const Mat<T>&, Net<T>*);                       \
  template struct Compiled<T>;                                                                              \
  template std::vector<Vec<T>> decode<T>(const Compiled<T>&, const Vec<T>&);                                \
  template Mat<T> encode_mean<T>(const Compiled<T>&, const std::vector<Mat<T>>&);                           \
  template T fit_value_grad<T>(const Compiled<T>&, const Vec<T>&, const std::vector<Vec<T>>&,               \
                               std::span<const double>, Vec<T>*);                                           \
  template Mat<T> draw_noise<T>(int, int, std::uint64_t);                                                   \
  template T elbo_loss<T>(const Compiled<T>&, const std::vector<Mat<T>>&, const Mat<T>&, double, ModelGrad<T>*);
SYNRECON_INSTANTIATE(float)
SYNRECON_INSTANTIATE(double)
#undef SYNRECON_INSTANTIATE

}  // namespace synrecon::neuralgen
