#include <doctest.h>

#include <cmath>
#include <sstream>

#include "drl/error.hpp"
#include "drl/nn.hpp"
#include "helpers.hpp"

using namespace drl;
using drltest::random_matrix;
using drltest::random_mlp;

namespace {

double apply(Activation a, double z) {
  switch (a) {
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kRelu:
      return z > 0 ? z : 0.0;
    default:
      return z;
  }
}

// Scalar-loop forward pass, softmax excluded.
Matrix naive_forward(const Mlp& net, const Matrix& x) {
  Matrix cur = x;
  for (const auto& l : net.layers()) {
    Matrix next(cur.rows(), l.out_dim());
    for (Eigen::Index r = 0; r < cur.rows(); ++r)
      for (int o = 0; o < l.out_dim(); ++o) {
        double z = l.biases[o];
        for (int i = 0; i < l.in_dim(); ++i) z += l.weights(o, i) * cur(r, i);
        next(r, o) = apply(l.activation, z);
      }
    cur = next;
  }
  return cur;
}

// L = sum(W .* net(x)); central differences on every parameter.
Vector numeric_param_grad(const Mlp& net, const Matrix& x, const Matrix& w) {
  const double h = 1e-6;
  Mlp probe = net;
  const Vector p0 = net.parameters();
  Vector g(p0.size());
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    Vector p = p0;
    p[i] += h;
    probe.set_parameters(p);
    const double up = naive_forward(probe, x).cwiseProduct(w).sum();
    p[i] -= 2 * h;
    probe.set_parameters(p);
    const double down = naive_forward(probe, x).cwiseProduct(w).sum();
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("forward matches a scalar-loop oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const Mlp net = random_mlp(rng, 3, 12);
    const Matrix x = random_matrix(rng, 5, net.input_dim());
    CHECK((net.forward(x) - naive_forward(net, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("backward matches independent central differences") {
  Rng rng(12);
  for (int trial = 0; trial < 15; ++trial) {
    const Mlp net = random_mlp(rng, 3, 8, /*allow_relu=*/false);
    const Matrix x = random_matrix(rng, 4, net.input_dim());
    const Matrix w = random_matrix(rng, 4, net.output_dim());
    ForwardCache cache;
    net.forward(x, cache);
    Matrix dx;
    const Vector analytic = Mlp::flatten(net.backward(cache, w, &dx));
    const Vector numeric = numeric_param_grad(net, x, w);
    CHECK((analytic - numeric).cwiseAbs().maxCoeff() < 1e-6);

    // input gradient
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Matrix xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      const double fd =
          (naive_forward(net, xp).cwiseProduct(w).sum() - naive_forward(net, xm).cwiseProduct(w).sum()) / (2 * h);
      CHECK(std::abs(dx.data()[i] - fd) < 1e-6);
    }
  }
}

TEST_CASE("softmax output layer gradient") {
  Rng rng(13);
  std::vector<int> sizes{3, 5, 4};
  std::vector<Activation> acts{Activation::kTanh, Activation::kSoftmax};
  const Mlp net = Mlp::create(sizes, acts, InitScheme::kXavierUniform, rng);
  const Matrix x = random_matrix(rng, 6, 3);
  const Matrix y = net.forward(x);
  for (Eigen::Index r = 0; r < y.rows(); ++r) CHECK(std::abs(y.row(r).sum() - 1.0) < 1e-12);
  CHECK(grad_check(net, x, CheckLoss::kMse) < 1e-6);
  CHECK(grad_check(net, x, CheckLoss::kSum) < 1e-6);
}

TEST_CASE("softmax is rejected on hidden layers") {
  Rng rng(1);
  std::vector<int> sizes{2, 3, 1};
  std::vector<Activation> acts{Activation::kSoftmax, Activation::kLinear};
  CHECK_THROWS_AS(Mlp::create(sizes, acts, InitScheme::kXavierUniform, rng), ShapeError);
}

TEST_CASE("grad_check is small on random architectures") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const Mlp net = random_mlp(rng, 3, 16);
    const Matrix x = random_matrix(rng, 3, net.input_dim());
    CHECK(grad_check(net, x, CheckLoss::kMse) <= 1e-5);
  }
}

TEST_CASE("stale caches are rejected") {
  Rng rng(15);
  Mlp net = random_mlp(rng, 2, 4);
  const Matrix x = random_matrix(rng, 2, net.input_dim());
  ForwardCache cache;
  const Matrix y = net.forward(x, cache);
  CHECK_NOTHROW(net.backward(cache, y));
  net.mutable_layer(0).biases[0] += 1.0;
  CHECK_THROWS_AS(net.backward(cache, y), ShapeError);
  const Mlp other = random_mlp(rng, 2, 4);
  ForwardCache foreign;
  CHECK_THROWS_AS(net.backward(foreign, y), ShapeError);
}

TEST_CASE("forward rejects a wrong input width") {
  Rng rng(16);
  const Mlp net = random_mlp(rng, 2, 4);
  CHECK_THROWS_AS(net.forward(Matrix::Zero(1, net.input_dim() + 1)), ShapeError);
}

TEST_CASE("initialisation schemes") {
  Rng rng(17);
  std::vector<int> sizes{20, 30, 30};
  std::vector<Activation> acts{Activation::kTanh, Activation::kTanh};
  const Mlp x = Mlp::create(sizes, acts, InitScheme::kXavierUniform, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  CHECK(x.layer(0).weights.cwiseAbs().maxCoeff() <= bound);
  CHECK(x.layer(0).biases.isZero());

  const Mlp o = Mlp::create(sizes, acts, InitScheme::kOrthogonal, rng);
  const Matrix& w = o.layer(1).weights;  // square
  CHECK((w * w.transpose() - Matrix::Identity(30, 30)).cwiseAbs().maxCoeff() < 1e-10);
  const Matrix& wide = o.layer(0).weights;  // 30 x 20: orthonormal columns
  CHECK((wide.transpose() * wide - Matrix::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("parameter flattening round-trips") {
  Rng rng(18);
  Mlp net = random_mlp(rng, 3, 6);
  const Vector p = net.parameters();
  CHECK(p.size() == static_cast<Eigen::Index>(net.num_parameters()));
  Vector q = p.array() + 0.5;
  net.set_parameters(q);
  CHECK(net.parameters() == q);
  CHECK(net.layer(0).weights(0, 1 % net.layer(0).in_dim()) == q[1 % net.layer(0).in_dim()]);
  CHECK_THROWS_AS(net.set_parameters(Vector::Zero(p.size() + 1)), ShapeError);
}

TEST_CASE("adam first step moves each parameter by about lr against the gradient sign") {
  Rng rng(19);
  Mlp net = random_mlp(rng, 2, 5);
  const Vector before = net.parameters();
  Grads g = net.zero_grads();
  for (auto& w : g.weights) w.setConstant(0.3);
  for (auto& b : g.biases) b.setConstant(-2.0);
  AdamState st = AdamState::for_network(net);
  adam_step(st, net, g, 0.01);
  const Vector delta = net.parameters() - before;
  const Vector flat = Mlp::flatten(g);
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    // m_hat = g, v_hat = g^2 after bias correction.
    const double expected = -0.01 * flat[i] / (std::abs(flat[i]) + 1e-8);
    CHECK(std::abs(delta[i] - expected) < 1e-12);
  }
  CHECK(st.t == 1);
}

TEST_CASE("adam second step matches the closed form") {
  Vector p = Vector::Constant(1, 1.0);
  VectorAdam opt(1);
  const double g1 = 0.5, g2 = -1.5, lr = 0.1;
  opt.step(p, Vector::Constant(1, g1), lr);
  opt.step(p, Vector::Constant(1, g2), lr);
  const double m = 0.9 * (0.1 * g1) + 0.1 * g2;
  const double v = 0.999 * (0.001 * g1 * g1) + 0.001 * g2 * g2;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  const double first = 1.0 - lr * g1 / (std::abs(g1) + 1e-8);
  CHECK(std::abs(p[0] - (first - lr * mh / (std::sqrt(vh) + 1e-8))) < 1e-12);
}

TEST_CASE("adam rejects non-finite gradients and leaves the network untouched") {
  Rng rng(20);
  Mlp net = random_mlp(rng, 2, 3);
  const Vector before = net.parameters();
  Grads g = net.zero_grads();
  g.biases[0][0] = std::nan("");
  AdamState st = AdamState::for_network(net);
  CHECK_THROWS_AS(adam_step(st, net, g, 0.1), NumericError);
  CHECK(net.parameters() == before);
  CHECK(st.t == 0);
}

TEST_CASE("global norm clipping") {
  Rng rng(21);
  const Mlp net = random_mlp(rng, 2, 4);
  Grads a = net.zero_grads(), b = net.zero_grads();
  for (auto& w : a.weights) w.setConstant(3.0);
  for (auto& w : b.weights) w.setConstant(-4.0);
  Vector extra = Vector::Constant(2, 1.0);
  const double total = std::sqrt(a.squared_norm() + b.squared_norm() + 2.0);
  Grads* gs[] = {&a, &b};
  const double factor = clip_global_norm(gs, 1.0, &extra);
  CHECK(std::abs(factor - 1.0 / total) < 1e-12);
  CHECK(std::abs(std::sqrt(a.squared_norm() + b.squared_norm() + extra.squaredNorm()) - 1.0) < 1e-12);
  CHECK(clip_global_norm(gs, 10.0, &extra) == 1.0);
}

TEST_CASE("polyak update interpolates parameters") {
  Rng rng(22);
  const Mlp src = random_mlp(rng, 2, 4);
  Mlp tgt = src;
  tgt.set_parameters(Vector::Zero(static_cast<Eigen::Index>(src.num_parameters())));
  polyak_update(tgt, src, 0.25);
  CHECK((tgt.parameters() - 0.25 * src.parameters()).cwiseAbs().maxCoeff() < 1e-15);
  polyak_update(tgt, src, 1.0);
  CHECK(tgt.parameters() == src.parameters());
  CHECK_THROWS_AS(polyak_update(tgt, src, 1.5), ShapeError);
}

TEST_CASE("network files round-trip bit-exactly") {
  Rng rng(23);
  const Mlp net = random_mlp(rng, 3, 7);
  std::stringstream ss;
  write_mlp(ss, net);
  const Mlp back = read_mlp(ss);
  CHECK(back.same_architecture(net));
  CHECK(back.parameters() == net.parameters());

  const auto dir = drltest::temp_dir("nn");
  save_mlp(dir / "n.dknn", net);
  CHECK(load_mlp(dir / "n.dknn").parameters() == net.parameters());

  std::stringstream bad("XXXX0000");
  CHECK_THROWS_AS(read_mlp(bad), IoError);
  std::string blob = ss.str();
  std::stringstream truncated(blob.substr(0, blob.size() / 2));
  CHECK_THROWS_AS(read_mlp(truncated), IoError);
}
