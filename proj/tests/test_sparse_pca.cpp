#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "shapca/sparse_pca.hpp"

using namespace shapca;
using namespace shapca::spca;

namespace {

Matrix gaussian(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) x(i, j) = g(rng);
  return x;
}

// Two orthogonal latent directions with distinct scales plus tiny noise.
Matrix two_direction_data(Index n, Index p, std::uint64_t seed, Matrix* dirs) {
  Matrix d = gaussian(p, 2, seed + 1);
  Eigen::HouseholderQR<Matrix> qr(d);
  const Matrix q = qr.householderQ() * Matrix::Identity(p, 2);
  *dirs = q.transpose();
  const Matrix z = gaussian(n, 2, seed + 2);
  Matrix x = (z.col(0) * 3.0) * q.col(0).transpose() + (z.col(1) * 1.5) * q.col(1).transpose();
  return x + 1e-4 * gaussian(n, p, seed + 3);
}

}  // namespace

TEST_CASE("alpha 0 full rank reconstructs the centred data") {
  const Matrix x = gaussian(8, 5, 1);
  SparsePcaConfig cfg;
  cfg.n_components = 5;
  cfg.alpha = 0;
  const auto m = fit(x, cfg);
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Matrix w = m.loadings;
  const Matrix recon = transform(m, x) * (w * w.transpose()).inverse() * w;
  CHECK((recon - xc).norm() / xc.norm() < 1e-6);
}

TEST_CASE("alpha 0, two components recover the dominant subspace") {
  Matrix dirs;
  const Matrix x = two_direction_data(120, 15, 4, &dirs);
  SparsePcaConfig cfg;
  cfg.n_components = 2;
  cfg.alpha = 0;
  const auto m = fit(x, cfg);
  // Dense oracle: top eigenvectors of the sample covariance.
  const Matrix xc = x.rowwise() - x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> es(xc.transpose() * xc / static_cast<double>(x.rows() - 1));
  const Matrix top = es.eigenvectors().rightCols(2).transpose();
  CHECK(oracle::principal_angle(m.loadings, top) < 1e-2);
  CHECK(oracle::principal_angle(m.loadings, dirs) < 1e-2);
}

TEST_CASE("objective never increases") {
  const Matrix x = gaussian(40, 12, 7);
  for (double alpha : {0.0, 0.3, 2.0}) {
    SparsePcaConfig cfg;
    cfg.n_components = 4;
    cfg.alpha = alpha;
    const auto m = fit(x, cfg);
    REQUIRE(m.objective_trace.size() >= 2);
    for (std::size_t t = 1; t < m.objective_trace.size(); ++t)
      CHECK(m.objective_trace[t] <= m.objective_trace[t - 1] * (1 + 1e-12) + 1e-12);
  }
}

TEST_CASE("sparsity grows with alpha") {
  const Matrix x = gaussian(50, 20, 9);
  double prev = -1;
  double at_zero = 0;
  for (double alpha : {0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    SparsePcaConfig cfg;
    cfg.n_components = 3;
    cfg.alpha = alpha;
    const auto m = fit(x, cfg);
    if (alpha == 0.0) at_zero = m.sparsity_fraction;
    CHECK(m.sparsity_fraction >= prev);
    prev = m.sparsity_fraction;
  }
  CHECK(prev > at_zero);
}

TEST_CASE("fit is deterministic and ordered by explained variance") {
  const Matrix x = gaussian(30, 10, 3);
  SparsePcaConfig cfg;
  cfg.n_components = 3;
  cfg.alpha = 0.5;
  const auto a = fit(x, cfg), b = fit(x, cfg);
  CHECK(a.loadings == b.loadings);
  CHECK(to_json(a).dump() == to_json(b).dump());
  for (Index k = 1; k < 3; ++k) CHECK(a.explained_variance(k) <= a.explained_variance(k - 1));
  for (Index k = 0; k < 3; ++k) {
    Index arg;
    a.loadings.row(k).cwiseAbs().maxCoeff(&arg);
    CHECK(a.loadings(k, arg) >= 0);
  }
}

TEST_CASE("fit argument checks") {
  SparsePcaConfig cfg;
  cfg.n_components = 6;
  CHECK_THROWS_AS(fit(gaussian(5, 10, 0), cfg), InvalidArgument);
  cfg.n_components = 2;
  cfg.alpha = -1;
  CHECK_THROWS_AS(fit(gaussian(5, 10, 0), cfg), InvalidArgument);
}

TEST_CASE("transform examples") {
  SparsePcaModel m;
  m.loadings = Matrix::Identity(3, 3);
  m.feature_means = Vector::Zero(3);
  Matrix row(1, 3);
  row << 1, 2, 3;
  CHECK(transform(m, row) == row);

  m.feature_means = Vector::LinSpaced(3, 1, 3);
  CHECK(transform(m, row).isZero(0.0));

  m.loadings = Matrix::Zero(1, 3);
  m.loadings(0, 1) = 1;
  Matrix x = gaussian(4, 3, 5);
  CHECK(transform(m, x).col(0) == (x.col(1).array() - 2.0).matrix());
  CHECK_THROWS_AS(transform(m, Matrix::Zero(2, 4)), DimensionMismatch);
}

TEST_CASE("transform is linear with zero means") {
  SparsePcaModel m;
  m.loadings = gaussian(3, 6, 11);
  m.feature_means = Vector::Zero(6);
  const Matrix a = gaussian(5, 6, 12), b = gaussian(5, 6, 13);
  const Matrix lhs = transform(m, 2.5 * a - 0.7 * b);
  const Matrix rhs = 2.5 * transform(m, a) - 0.7 * transform(m, b);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalize_components examples") {
  Matrix cv(3, 3);
  cv << 0, 3, -1,
        5, 3, 0.5,
        10, 3, 1;
  const Matrix n = normalize_components(cv);
  CHECK(n(0, 0) == -1);
  CHECK(n(1, 0) == 0);
  CHECK(n(2, 0) == 1);
  CHECK(n.col(1).isZero(0.0));
  CHECK(n.col(2) == cv.col(2));
  CHECK_THROWS_AS(normalize_components(Matrix::Zero(1, 2)), InvalidArgument);
}

TEST_CASE("scaler reuses training range and clips") {
  Matrix train(2, 1);
  train << 0, 10;
  const auto s = ComponentScaler::fit(train);
  Matrix test(3, 1);
  test << 5, 20, -100;
  const Matrix out = s.apply(test);
  CHECK(out(0, 0) == 0);
  CHECK(out(1, 0) == 1.5);
  CHECK(out(2, 0) == -1.5);
  const auto back = component_scaler_from_json(to_json(s));
  CHECK(back.apply(test) == out);
}
