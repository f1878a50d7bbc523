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
#include <functional>

#include "doctest.h"
#include "synrecon/neuralgen.hpp"
#include "test_util.hpp"

using namespace synrecon;
using namespace synrecon::neuralgen;

namespace {

ModelShape tiny_shape() {
  ModelShape s;
  s.patch_width = 4;
  s.latent_dim = 3;
  s.feature_dim = 5;
  s.hidden = {8, 6};
  return s;
}

// Biases are zero after init; give them values so their gradients are exercised.
MvaeModel tiny_model(std::uint64_t seed) {
  auto m = init_model(tiny_shape(), {2.0, 0.5}, seed);
  Rng rng(seed + 1);
  auto fill = [&](Stack& st) {
    for (auto& l : st)
      if (l.kind == LayerKind::dense)
        for (int i = 0; i < l.bias.size(); ++i) l.bias[i] = static_cast<float>(rng.uniform(-0.2, 0.2));
  };
  for (auto& s : m.encoders) fill(s);
  fill(m.fusion);
  for (auto& s : m.decoders) fill(s);
  return m;
}

template <typename T>
std::vector<Net<T>*> nets(Compiled<T>& c) {
  std::vector<Net<T>*> n;
  for (auto& e : c.encoders) n.push_back(&e);
  n.push_back(&c.fusion);
  for (auto& d : c.decoders) n.push_back(&d);
  return n;
}

template <typename T>
std::vector<Net<T>*> nets(ModelGrad<T>& g) {
  std::vector<Net<T>*> n;
  for (auto& e : g.encoders) n.push_back(&e);
  n.push_back(&g.fusion);
  for (auto& d : g.decoders) n.push_back(&d);
  return n;
}

template <typename T>
Net<T> zero_like(const Net<T>& n) {
  Net<T> z = n;
  for (auto& w : z.W) w.setZero();
  for (auto& b : z.b) b.setZero();
  return z;
}

template <typename T>
ModelGrad<T> zero_grad(const Compiled<T>& c) {
  ModelGrad<T> g{{}, zero_like(c.fusion), {}};
  for (const auto& e : c.encoders) g.encoders.push_back(zero_like(e));
  for (const auto& d : c.decoders) g.decoders.push_back(zero_like(d));
  return g;
}

// Sum over all parameters of a * b.
template <typename A, typename B>
double inner(const std::vector<Net<A>*>& a, const std::vector<Net<B>*>& b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n)
    for (std::size_t l = 0; l < a[n]->W.size(); ++l) {
      s += (a[n]->W[l].template cast<double>().array() * b[n]->W[l].template cast<double>().array()).sum();
      s += (a[n]->b[l].template cast<double>().array() * b[n]->b[l].template cast<double>().array()).sum();
    }
  return s;
}

// Adds t * dir to every parameter.
void axpy(const std::vector<Net<double>*>& p, const std::vector<Net<double>*>& dir, double t) {
  for (std::size_t n = 0; n < p.size(); ++n)
    for (std::size_t l = 0; l < p[n]->W.size(); ++l) {
      p[n]->W[l] += t * dir[n]->W[l];
      p[n]->b[l] += t * dir[n]->b[l];
    }
}

void randomize(const std::vector<Net<double>*>& p, Rng& rng) {
  for (auto* n : p)
    for (std::size_t l = 0; l < n->W.size(); ++l) {
      for (Eigen::Index i = 0; i < n->W[l].size(); ++i) n->W[l].data()[i] = rng.normal();
      for (Eigen::Index i = 0; i < n->b[l].size(); ++i) n->b[l].data()[i] = rng.normal();
    }
}

template <typename T>
std::vector<Mat<T>> random_batch(int d, int B, std::uint64_t seed) {
  std::vector<Mat<T>> b(2, Mat<T>(d, B));
  Rng rng(seed);
  for (auto& m : b)
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform());
  return b;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

}  // namespace

TEST_CASE("init is He-uniform with zero biases and seeded") {
  const auto m = init_model(tiny_shape(), {1.0, 1.0}, 4);
  validate(m);
  CHECK(m.feature_dim() == 5);
  for (const auto& l : m.encoders[0])
    if (l.kind == LayerKind::dense) {
      const float bound = std::sqrt(6.0f / static_cast<float>(l.in));
      CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
      CHECK(l.weight.cwiseAbs().maxCoeff() > 0.5f * bound);
      CHECK(l.bias.cwiseAbs().maxCoeff() == 0.0f);
    }
  // Encoder ends with a ReLU, fusion and decoders end linear.
  CHECK(m.encoders[0].back().kind == LayerKind::relu);
  CHECK(m.fusion.back().kind == LayerKind::dense);
  CHECK(m.decoders[1].back().kind == LayerKind::dense);
  CHECK(serialize(init_model(tiny_shape(), {1.0, 1.0}, 4)) == serialize(m));
  CHECK(serialize(init_model(tiny_shape(), {1.0, 1.0}, 5)) != serialize(m));
  CHECK_THROWS_AS(init_model(tiny_shape(), {1.0}, 4), ParameterError);
}

TEST_CASE("forward matches a hand-evaluated two-layer net") {
  Stack st(3);
  st[0] = {LayerKind::dense, 2, 2, Eigen::MatrixXf(2, 2), Eigen::VectorXf(2)};
  st[0].weight << 1, -2, 0.5, 3;
  st[0].bias << 0.25, -1;
  st[1] = {LayerKind::relu, 2, 2, {}, {}};
  st[2] = {LayerKind::dense, 2, 1, Eigen::MatrixXf(1, 2), Eigen::VectorXf(1)};
  st[2].weight << 2, -1;
  st[2].bias << 0.5;
  const auto net = lower<double>(st);
  Mat<double> x(2, 2);
  x << 1, -1, 2, 0.5;
  const auto y = forward<double>(net, x);
  // Column 0: h = relu([1-4+.25, .5+6-1]) = [0, 5.5]; y = -5.5 + .5.
  CHECK(y(0, 0) == doctest::Approx(-5.0));
  // Column 1: h = relu([-1-1+.25, -.5+1.5-1]) = [0, 0]; y = .5.
  CHECK(y(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("backward matches finite differences in input and weights") {
  const auto m = tiny_model(7);
  Compiled<double> c(m);
  Rng rng(3);
  Mat<double> x(16, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  Mat<double> w(c.encoders[0].out(), 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  auto loss = [&](const Net<double>& n, const Mat<double>& in) { return (forward<double>(n, in).array() * w.array()).sum(); };

  Tape<double> tape;
  forward<double>(c.encoders[0], x, &tape);
  Net<double> g = zero_like(c.encoders[0]);
  const Mat<double> dx = backward<double>(c.encoders[0], tape, w, &g);
  const double h = 1e-6;
  for (int probe = 0; probe < 20; ++probe) {
    Mat<double> d(16, 3);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = rng.normal();
    const double fd = (loss(c.encoders[0], x + h * d) - loss(c.encoders[0], x - h * d)) / (2 * h);
    CHECK(rel_err((dx.array() * d.array()).sum(), fd) < 1e-6);

    Net<double> dir = zero_like(c.encoders[0]);
    std::vector<Net<double>*> dv{&dir};
    randomize(dv, rng);
    Net<double> plus = c.encoders[0], minus = c.encoders[0];
    axpy({&plus}, dv, h);
    axpy({&minus}, dv, -h);
    const double fdw = (loss(plus, x) - loss(minus, x)) / (2 * h);
    CHECK(rel_err(inner<double, double>({&g}, dv), fdw) < 1e-6);
  }
}

TEST_CASE("elbo loss matches a direct evaluation") {
  const auto m = tiny_model(8);
  const Compiled<double> c(m);
  const auto batch = random_batch<double>(16, 4, 1);
  const auto eps = draw_noise<double>(3, 4, 2);
  double total = 0.0;
  for (int j = 0; j < 4; ++j) {
    std::vector<std::vector<double>> u(2);
    for (int k = 0; k < 2; ++k) u[k].assign(batch[k].col(j).data(), batch[k].col(j).data() + 16);
    const auto enc = encode(m, u, false, 0);
    std::vector<double> z(3);
    double kl = 0.0;
    for (int i = 0; i < 3; ++i) {
      z[i] = enc.mu[i] + std::exp(0.5 * enc.logvar[i]) * eps(i, j);
      kl += 0.5 * (std::exp(enc.logvar[i]) + enc.mu[i] * enc.mu[i] - 1.0 - enc.logvar[i]);
    }
    const auto g = decode(m, z);
    double rec = 0.0;
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 16; ++i) rec += 0.5 * (g[k][i] - u[k][i]) * (g[k][i] - u[k][i]);
    total += rec + 0.3 * kl;
  }
  CHECK(elbo_loss<double>(c, batch, eps, 0.3, nullptr) == doctest::Approx(total / 4).epsilon(1e-12));
}

TEST_CASE("elbo weight gradients match central differences") {
  const auto m = tiny_model(9);
  const auto batch = random_batch<double>(16, 5, 11);
  const auto eps = draw_noise<double>(3, 5, 12);
  Rng rng(13);

  SUBCASE("double precision") {
    Compiled<double> c(m);
    auto g = zero_grad(c);
    elbo_loss<double>(c, batch, eps, 1.0, &g);
    for (int probe = 0; probe < 20; ++probe) {
      Compiled<double> dir(m);
      randomize(nets(dir), rng);
      Compiled<double> plus(m), minus(m);
      const double h = 1e-5;
      axpy(nets(plus), nets(dir), h);
      axpy(nets(minus), nets(dir), -h);
      const double fd = (elbo_loss<double>(plus, batch, eps, 1.0, nullptr) -
                         elbo_loss<double>(minus, batch, eps, 1.0, nullptr)) / (2 * h);
      CHECK(rel_err(inner(nets(g), nets(dir)), fd) < 1e-6);
    }
  }

  SUBCASE("single precision") {
    // Float gradients against differences of the same function evaluated in double.
    Compiled<float> cf(m);
    auto g = zero_grad(cf);
    std::vector<Mat<float>> bf{batch[0].cast<float>(), batch[1].cast<float>()};
    elbo_loss<float>(cf, bf, eps.cast<float>(), 1.0, &g);
    for (int probe = 0; probe < 20; ++probe) {
      Compiled<double> dir(m);
      randomize(nets(dir), rng);
      Compiled<double> plus(m), minus(m);
      const double h = 1e-5;
      axpy(nets(plus), nets(dir), h);
      axpy(nets(minus), nets(dir), -h);
      const double fd = (elbo_loss<double>(plus, batch, eps, 1.0, nullptr) -
                         elbo_loss<double>(minus, batch, eps, 1.0, nullptr)) / (2 * h);
      CHECK(rel_err(inner(nets(g), nets(dir)), fd) < 1e-3);
    }
  }
}

TEST_CASE("grad_z matches central differences and skips zero-weight channels") {
  const auto m = tiny_model(10);
  const Compiled<double> c(m);
  Rng rng(14);
  std::vector<std::vector<double>> t(2, std::vector<double>(16));
  for (auto& u : t)
    for (auto& v : u) v = rng.uniform(0.0, 2.0);
  std::vector<Vec<double>> tv{Eigen::Map<Vec<double>>(t[0].data(), 16), Eigen::Map<Vec<double>>(t[1].data(), 16)};
  const std::vector<double> eta{0.3, 0.7};
  for (int probe = 0; probe < 20; ++probe) {
    std::vector<double> z(3);
    for (auto& v : z) v = rng.normal();
    const auto g = grad_z(m, z, t, eta);
    Vec<double> d(3);
    for (int i = 0; i < 3; ++i) d[i] = rng.normal();
    const Vec<double> zv = Eigen::Map<Vec<double>>(z.data(), 3);
    const double h = 1e-6;
    const double fd = (fit_value_grad<double>(c, zv + h * d, tv, eta, nullptr) -
                       fit_value_grad<double>(c, zv - h * d, tv, eta, nullptr)) / (2 * h);
    CHECK(rel_err(g[0] * d[0] + g[1] * d[1] + g[2] * d[2], fd) < 1e-6);
  }
  // Channel 2 only: value equals eta_2 / 2 |c_2 G_2(z) - u_2|^2.
  const std::vector<double> z{0.1, -0.4, 0.9};
  const auto dec = decode(m, z);
  double expect = 0.0;
  for (int i = 0; i < 16; ++i) expect += 0.5 * 0.7 * std::pow(0.5 * dec[1][i] - t[1][i], 2);
  const std::vector<double> only2{0.0, 0.7};
  CHECK(fit_value_grad<double>(c, Eigen::Map<const Vec<double>>(z.data(), 3), tv, only2, nullptr) ==
        doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(grad_z(m, z, t, std::vector<double>{-1.0, 1.0}), ParameterError);
}

TEST_CASE("encoding and reparameterization") {
  const auto m = tiny_model(15);
  std::vector<std::vector<double>> u(2, std::vector<double>(16, 0.3));
  const auto mean = encode(m, u, false, 0);
  CHECK(mean.z == mean.mu);
  const auto a = encode(m, u, true, 5), b = encode(m, u, true, 5);
  CHECK(a.z == b.z);
  CHECK(a.z != mean.z);
  const std::vector<double> mu{1.0, 2.0}, lv{0.0, std::log(4.0)};
  const auto r = reparameterize(mu, lv, 3);
  Rng rng(3);
  const double e0 = rng.normal(), e1 = rng.normal();
  CHECK(r.z[0] == doctest::Approx(1.0 + e0));
  CHECK(r.z[1] == doctest::Approx(2.0 + 2.0 * e1));
  // Batch means agree with the single-sample path.
  const Compiled<double> c(m);
  std::vector<Mat<double>> cols{Mat<double>::Constant(16, 2, 0.3), Mat<double>::Constant(16, 2, 0.3)};
  const auto mb = encode_mean<double>(c, cols);
  for (int i = 0; i < 3; ++i) CHECK(mb(i, 1) == doctest::Approx(mean.mu[i]).epsilon(1e-12));
}

TEST_CASE("prior sampling") {
  const auto u = sample_prior(20000, 1, PriorMode::uniform);
  double lo = 0.0, hi = 0.0, s = 0.0, s2 = 0.0;
  for (double v : u) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= -3.0);
  CHECK(hi < 3.0);
  for (double v : sample_prior(20000, 2, PriorMode::normal)) {
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / 20000) < 0.03);
  CHECK(s2 / 20000 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(sample_prior(4, 9, PriorMode::uniform) == sample_prior(4, 9, PriorMode::uniform));
}

TEST_CASE("training lowers the loss and is deterministic") {
  std::vector<ImagePair> pairs;
  for (int i = 0; i < 6; ++i) pairs.push_back({testutil::random_image(8, 8, i), testutil::random_image(8, 8, 50 + i)});
  const auto set = datasets::extract_training_patches(pairs, 4, 256, 3);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 30;
  cfg.seed = 4;
  cfg.kl_weight = 0.1;
  auto a = init_model(tiny_shape(), {1.0, 1.0}, 1);
  auto b = a;
  const auto ra = train(a, set, cfg);
  const auto rb = train(b, set, cfg);
  CHECK(ra.loss_history == rb.loss_history);
  CHECK(serialize(a) == serialize(b));
  CHECK(ra.loss_history.back() < 0.5 * ra.loss_history.front());
  CHECK_FALSE(ra.diverged);

  // Zero epochs leaves the model untouched.
  auto c = init_model(tiny_shape(), {1.0, 1.0}, 1);
  cfg.epochs = 0;
  CHECK(train(c, set, cfg).loss_history.empty());
  CHECK(serialize(c) == serialize(init_model(tiny_shape(), {1.0, 1.0}, 1)));
}

TEST_CASE("resuming with the saved optimizer state reproduces the single run") {
  std::vector<ImagePair> pairs;
  for (int i = 0; i < 6; ++i) pairs.push_back({testutil::random_image(8, 8, i), testutil::random_image(8, 8, 50 + i)});
  const auto set = datasets::extract_training_patches(pairs, 4, 256, 3);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 20;
  cfg.seed = 4;
  cfg.kl_weight = 0.1;
  auto one = init_model(tiny_shape(), {1.0, 1.0}, 1);
  const auto full = train(one, set, cfg);
  auto two = init_model(tiny_shape(), {1.0, 1.0}, 1);
  cfg.epochs = 10;
  AdamState state;
  const auto first = train(two, set, cfg, &state);
  CHECK(state.step == 10 * 8);
  two = deserialize(serialize(two));
  state = deserialize_adam(serialize(state));
  cfg.first_epoch = 10;
  const auto second = train(two, set, cfg, &state);
  for (int e = 0; e < 10; ++e) CHECK(first.loss_history[e] == full.loss_history[e]);
  for (int e = 0; e < 10; ++e) CHECK(second.loss_history[e] == full.loss_history[10 + e]);
  CHECK(serialize(two) == serialize(one));

  // Without the moments the run still continues, only less exactly.
  auto three = init_model(tiny_shape(), {1.0, 1.0}, 1);
  cfg.first_epoch = 0;
  train(three, set, cfg);
  cfg.first_epoch = 10;
  const auto cold = train(three, set, cfg);
  CHECK(cold.loss_history.back() < first.loss_history.back());
  CHECK_THROWS_AS(deserialize_adam("MVAE"), FormatError);
}

TEST_CASE("non-finite data aborts training with the epoch and batch") {
  datasets::PatchSet set;
  set.channels = 2;
  set.dim = 16;
  set.count = 4;
  set.values.assign(4 * 2 * 16, 0.5f);
  set.values[3] = std::nanf("");
  auto m = init_model(tiny_shape(), {1.0, 1.0}, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(m, set, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("model files round-trip and reject corruption") {
  testutil::TempDir dir;
  const auto m = tiny_model(21);
  save_model(dir.file("m.mvae"), m);
  const auto back = load_model(dir.file("m.mvae"));
  CHECK(serialize(back) == serialize(m));
  CHECK(back.scale == m.scale);
  auto bytes = serialize(m);
  CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() - 3)), FormatError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
  CHECK_THROWS_AS(load_model(dir.file("none.mvae")), IoError);
}
