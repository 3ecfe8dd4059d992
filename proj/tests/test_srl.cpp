#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include "drl/error.hpp"
#include "drl/srl.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace drl;

namespace {

Matrix line_data(Rng& rng, int n) {
  Vector dir(3);
  dir << 1.0, -2.0, 0.5;
  Vector offset(3);
  offset << 3.0, 0.0, -1.0;
  Matrix m(n, 3);
  for (int i = 0; i < n; ++i) m.row(i) = (offset + standard_normal(rng) * dir).transpose();
  return m;
}

Matrix covariance(const Matrix& data) {
  const Vector mean = data.colwise().mean();
  const Matrix c = data.rowwise() - mean.transpose();
  return c.transpose() * c / static_cast<double>(data.rows() - 1);
}

}  // namespace

TEST_CASE("srl_observe phase transitions") {
  SrlState s(10, 2);
  CHECK(s.observe(Matrix::Zero(0, 2)) == SrlState::Phase::kWarmup);
  CHECK(s.collected() == 0);
  CHECK(s.observe(Matrix::Ones(4, 2)) == SrlState::Phase::kWarmup);
  CHECK(s.observe(Matrix::Ones(6, 2)) == SrlState::Phase::kActive);
  CHECK_THROWS_AS(s.observe(Matrix::Ones(1, 2)), Error);

  SrlState over(10, 2);
  over.observe(Matrix::Ones(15, 2));
  CHECK(over.phase() == SrlState::Phase::kActive);
  CHECK(over.collected() == 15);
  CHECK(over.data().rows() == 15);
  SrlState bad(3, 2);
  CHECK_THROWS_AS(bad.observe(Matrix::Ones(1, 3)), ShapeError);
}

TEST_CASE("jacobi eigensolver agrees with Eigen's symmetric solver") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 1, 12);
    const Matrix a = drltest::random_matrix(rng, n, n);
    const Matrix s = a + a.transpose();
    const SymmetricEigen mine = jacobi_eigen(s);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(s);
    const Vector ref_values = ref.eigenvalues().reverse();
    CHECK((mine.values - ref_values).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((s * mine.vectors - mine.vectors * mine.values.asDiagonal()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((mine.vectors.transpose() * mine.vectors - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pca_fit agrees with the max-pivot Jacobi oracle on random 50x8 data") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix data = drltest::random_matrix(rng, 50, 8);
    data = data * drltest::random_matrix(rng, 8, 8);  // correlated columns
    const oracle::EigenPairs ref = oracle::max_pivot_jacobi(covariance(data));
    for (int k : {1, 3, 8}) {
      const PcaModel m = pca_fit(data, k);
      for (int i = 0; i < 8; ++i) CHECK(std::abs(m.eigvals[i] - ref.values[i]) < 1e-8);
      const Matrix ref_rows = ref.vectors.leftCols(k).transpose();
      CHECK(oracle::max_principal_angle(m.components, ref_rows) < 1e-6);
      CHECK((m.components * m.components.transpose() - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);
      for (int i = 0; i < k; ++i) {
        Eigen::Index idx;
        m.components.row(i).cwiseAbs().maxCoeff(&idx);
        CHECK(m.components(i, idx) > 0);
      }
    }
  }
}

TEST_CASE("rank-1 data is captured by one component") {
  Rng rng(3);
  const Matrix data = line_data(rng, 200);
  const PcaModel m = pca_fit(data, 1);
  CHECK(explained_variance(m, 1) == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 200; ++i) {
    const Vector x = data.row(i).transpose();
    CHECK((m.reconstruct(m.transform(x)) - x).cwiseAbs().maxCoeff() < 1e-9);
  }
  for (int i = 0; i < 3; ++i) CHECK(m.eigvals[i] >= 0.0);
}

TEST_CASE("isotropic cloud explains about k/d of the variance") {
  Rng rng(4);
  const Matrix data = drltest::random_matrix(rng, 10000, 10);
  const PcaModel m = pca_fit(data, 3);
  CHECK(std::abs(explained_variance(m, 3) - 0.3) <= 0.02);
}

TEST_CASE("full-rank projection and reconstruction is the identity") {
  Rng rng(5);
  const Matrix data = drltest::random_matrix(rng, 40, 6);
  const PcaModel m = pca_fit(data, 6);
  CHECK(explained_variance(m, 6) == doctest::Approx(1.0));
  for (int i = 0; i < 40; ++i) {
    const Vector x = data.row(i).transpose();
    CHECK((m.reconstruct(m.transform(x)) - x).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("pca transform examples") {
  Rng rng(6);
  const Matrix data = drltest::random_matrix(rng, 30, 5);
  const PcaModel m = pca_fit(data, 3);
  CHECK(m.transform(m.mean).cwiseAbs().maxCoeff() < 1e-14);
  const Vector e1 = m.transform(Vector(m.mean + m.components.row(0).transpose()));
  CHECK(std::abs(e1[0] - 1.0) < 1e-12);
  CHECK(std::abs(e1[1]) < 1e-12);
  CHECK(std::abs(e1[2]) < 1e-12);
  const Matrix batch = m.transform(data);
  for (int i = 0; i < 30; ++i) CHECK((batch.row(i).transpose() - m.transform(Vector(data.row(i).transpose()))).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(m.transform(Vector(Vector::Zero(4))), ShapeError);
}

TEST_CASE("pca_fit errors") {
  Rng rng(7);
  const Matrix data = drltest::random_matrix(rng, 5, 4);
  CHECK_THROWS_AS(pca_fit(data, 0), ShapeError);
  CHECK_THROWS_AS(pca_fit(data, 5), ShapeError);
  CHECK_THROWS_AS(pca_fit(data.topRows(1), 1), ShapeError);
  CHECK_THROWS_AS(pca_fit(Matrix::Ones(10, 3), 1), NumericError);
}

TEST_CASE("explained variance is monotone and latent selection picks the smallest dim") {
  Rng rng(8);
  Matrix data = drltest::random_matrix(rng, 300, 7);
  for (int c = 0; c < 7; ++c) data.col(c) *= std::pow(0.5, c);
  const PcaModel m = pca_fit(data, 7);
  double prev = 0.0;
  for (int k = 0; k <= 7; ++k) {
    const double ev = explained_variance(m, k);
    CHECK(ev >= prev - 1e-15);
    CHECK(ev <= 1.0 + 1e-12);
    prev = ev;
  }
  CHECK(prev == doctest::Approx(1.0));
  for (double thr : {0.5, 0.9, 0.99, 0.999}) {
    const int k = select_latent_dim(m, thr);
    CHECK(explained_variance(m, k) >= thr);
    if (k > 1) CHECK(explained_variance(m, k - 1) < thr);
  }
}

TEST_CASE("the first component maximises projected variance") {
  Rng rng(9);
  Matrix data = drltest::random_matrix(rng, 500, 6) * drltest::random_matrix(rng, 6, 6);
  const PcaModel m = pca_fit(data, 1);
  const Matrix c = covariance(data);
  const Vector w = m.components.row(0).transpose();
  const double best = w.dot(c * w);
  for (int t = 0; t < 10000; ++t) {
    Vector u(6);
    for (int i = 0; i < 6; ++i) u[i] = standard_normal(rng);
    u.normalize();
    CHECK(u.dot(c * u) <= best + 1e-9);
  }
}

TEST_CASE("pca model file round trip") {
  Rng rng(10);
  const PcaModel m = pca_fit(drltest::random_matrix(rng, 20, 4), 2);
  const auto dir = drltest::temp_dir("srl");
  save_pca(dir / "m.dkpc", m);
  const PcaModel l = load_pca(dir / "m.dkpc");
  CHECK(l.mean == m.mean);
  CHECK(l.eigvals == m.eigvals);
  CHECK(l.components == m.components);
  std::ofstream(dir / "bad.dkpc") << "XXXX";
  CHECK_THROWS_AS(load_pca(dir / "bad.dkpc"), IoError);
  CHECK_THROWS_AS(load_pca(dir / "missing.dkpc"), IoError);
}

TEST_CASE("linear auto-encoder with k = d learns the identity") {
  Rng rng(11);
  const Matrix data = drltest::random_matrix(rng, 512, 4);
  AeOptions o;
  o.activation = Activation::kLinear;
  o.epochs = 300;
  o.batch_size = 32;
  o.lr = 3e-3;
  const AeModel m = ae_fit(data, 4, o, rng);
  CHECK(m.k() == 4);
  CHECK(m.encode(data).cols() == 4);
  CHECK(m.final_loss < 1e-3);
}

TEST_CASE("auto-encoder compresses rank-1 data") {
  Rng rng(12);
  const Matrix data = line_data(rng, 512);
  AeOptions o;
  o.hidden = {16};
  o.epochs = 200;
  o.batch_size = 32;
  o.lr = 3e-3;
  const AeModel m = ae_fit(data, 1, o, rng);
  const Vector mean = data.colwise().mean();
  const double var = (data.rowwise() - mean.transpose()).squaredNorm() / data.size();
  CHECK(m.k() == 1);
  CHECK(m.final_loss < 0.05 * var);
  CHECK(m.final_loss == doctest::Approx(reconstruction_mse(m, data)));
  CHECK_THROWS_AS(ae_fit(data.topRows(10), 1, o, rng), ShapeError);
}

TEST_CASE("srl modules from the factory") {
  Rng rng(13);
  Matrix data = drltest::random_matrix(rng, 400, 5);
  data.col(4) = data.col(0) + data.col(1);  // rank 4
  Json p = {{"latent_dim", 0}, {"variance_threshold", 0.999}, {"warmup_samples", 10}, {"save_path", ""},
            {"ae", {{"hidden", Json::array()}, {"activation", "tanh"}, {"epochs", 2}, {"batch_size", 64}, {"lr", 1e-3}}}};
  auto pca = srl_factory().create("pca", ParamTree(p), SrlContext{1});
  pca->fit(data);
  CHECK(pca->latent_dim() == 4);
  CHECK(pca->transform(data).cols() == 4);
  p["latent_dim"] = 2;
  auto ae = srl_factory().create("ae", ParamTree(p), SrlContext{1});
  ae->fit(data);
  CHECK(ae->latent_dim() == 2);
  CHECK(ae->transform(data.topRows(3)).rows() == 3);
  const auto dir = drltest::temp_dir("srl_mod");
  CHECK_NOTHROW(ae->save(dir / "ae.bin"));
  CHECK(std::filesystem::file_size(dir / "ae.bin") > 0);
}
