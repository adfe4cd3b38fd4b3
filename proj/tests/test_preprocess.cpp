#include <doctest.h>

#include <cmath>
#include <random>

#include "shapca/preprocess.hpp"

using namespace shapca;
using namespace shapca::preprocess;

namespace {

// Centre-point weights of a least-squares polynomial fit over offsets
// -half..half, from the normal equations (A^T A) c = A^T e_j column by column.
Vector normal_equation_weights(int half, int order) {
  const int n = 2 * half + 1;
  Matrix a(n, order + 1);
  for (int r = 0; r < n; ++r)
    for (int d = 0; d <= order; ++d) a(r, d) = std::pow(static_cast<double>(r - half), d);
  const Matrix ata = a.transpose() * a;
  const Matrix coeffs = ata.fullPivLu().solve(a.transpose());  // (order+1) x n
  return coeffs.row(0).transpose();  // polynomial value at offset 0
}

io::SpectraDataset line_peak_dataset(int n_rows, int p) {
  std::vector<double> axis;
  for (int j = 0; j < p; ++j) axis.push_back(400.0 + j);
  Matrix x(n_rows, p);
  for (int i = 0; i < n_rows; ++i)
    for (int j = 0; j < p; ++j)
      x(i, j) = 0.2 + 0.001 * (i + 1) * j + (1.0 + i) * std::exp(-0.5 * std::pow((j - p / 2.0) / 3.0, 2));
  std::vector<int> labels;
  for (int i = 0; i < n_rows; ++i) labels.push_back(i % 2);
  return io::SpectraDataset(io::SpectralAxis(axis), x, labels, {"a", "b"});
}

}  // namespace

TEST_CASE("crop keeps the columns inside the range") {
  const io::SpectraDataset ds(io::SpectralAxis({400, 500, 600, 700}), Matrix::Random(2, 4), {0, 1}, {"a", "b"});
  const auto c = crop(ds, 450, 650);
  CHECK(c.axis().values() == std::vector<double>{500, 600});
  CHECK(c.intensities() == ds.intensities().middleCols(1, 2));
  CHECK(crop(ds, 0, 1e4).intensities() == ds.intensities());
  CHECK_THROWS_AS(crop(ds, 0, 100), InvalidArgument);
}

TEST_CASE("savgol window 5 order 2 weights match the normal equations") {
  const Vector w = savgol_coefficients(5, 2);
  const Vector oracle = normal_equation_weights(2, 2);
  REQUIRE(w.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(w(i) == doctest::Approx(oracle(i)).epsilon(1e-13));
  // Classic table values.
  const double expect[] = {-3, 12, 17, 12, -3};
  for (int i = 0; i < 5; ++i) CHECK(w(i) == doctest::Approx(expect[i] / 35.0).epsilon(1e-13));

  // The interior of a smoothed impulse traces the (symmetric) weights.
  Vector impulse = Vector::Zero(21);
  impulse(10) = 1.0;
  const Vector s = savgol_smooth(impulse, 5, 2);
  for (int i = -2; i <= 2; ++i) CHECK(std::abs(s(10 + i) - oracle(2 - i)) < 1e-13);
  CHECK(s(6) == 0.0);
}

TEST_CASE("savgol weights for other windows match the normal equations") {
  for (int half : {3, 5})
    for (int order : {0, 1, 3}) {
      const Vector w = savgol_coefficients(2 * half + 1, order);
      const Vector o = normal_equation_weights(half, order);
      CHECK((w - o).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("savgol reproduces constants and quadratics") {
  Vector c = Vector::Constant(5, 5.0);
  CHECK((savgol_smooth(c, 5, 2) - c).cwiseAbs().maxCoeff() < 1e-12);
  Vector q(40);
  for (int i = 0; i < 40; ++i) q(i) = 0.3 * i * i - 2.0 * i + 1.0;
  CHECK((savgol_smooth(q, 5, 2) - q).cwiseAbs().maxCoeff() < 1e-10 * q.cwiseAbs().maxCoeff());
}

TEST_CASE("savgol argument checks") {
  CHECK_THROWS_AS(savgol_smooth(Vector::Zero(10), 4, 2), InvalidArgument);
  CHECK_THROWS_AS(savgol_smooth(Vector::Zero(10), 5, 5), InvalidArgument);
  CHECK_THROWS_AS(savgol_smooth(Vector::Zero(3), 5, 2), InvalidArgument);
}

TEST_CASE("baseline of a line is the line") {
  Vector y(200);
  for (int i = 0; i < 200; ++i) y(i) = 3.0 + 0.02 * i;
  const auto r = baseline_correct(y, 1e7, 0.01);
  CHECK(r.corrected.cwiseAbs().maxCoeff() < 1e-3 * y.cwiseAbs().maxCoeff());
  CHECK((r.corrected + r.baseline - y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("baseline of zero is zero") {
  const auto r = baseline_correct(Vector::Zero(50), 5e5, 0.003);
  CHECK(r.baseline.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.corrected.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("baseline recovers an injected peak") {
  const int n = 600;
  const double height = 2.5;
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = 1.0 + 0.003 * i + height * std::exp(-0.5 * std::pow((i - 300) / 4.0, 2));
  const auto r = baseline_correct(y, 5e5, 0.003);
  CHECK(std::abs(r.corrected(300) - height) < 0.05 * height);
  CHECK((r.corrected + r.baseline - y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("baseline argument checks") {
  CHECK_THROWS_AS(baseline_correct(Vector::Zero(2), 1, 0.1), InvalidArgument);
  CHECK_THROWS_AS(baseline_correct(Vector::Zero(5), -1, 0.1), InvalidArgument);
  CHECK_THROWS_AS(baseline_correct(Vector::Zero(5), 1, 1.0), InvalidArgument);
}

TEST_CASE("normalize_max") {
  Vector y(3);
  y << 1, 2, 4;
  const Vector n = normalize_max(y);
  CHECK(n(0) == 0.25);
  CHECK(n(1) == 0.5);
  CHECK(n(2) == 1.0);
  CHECK(normalize_max(n) == n);
  CHECK(normalize_max(7.3 * y) == n);
  CHECK_THROWS_AS(normalize_max(Vector::Zero(3)), InvalidArgument);
  CHECK_THROWS_AS(normalize_max(-y), InvalidArgument);
}

TEST_CASE("run_chain output has unit max and is row independent") {
  const auto ds = line_peak_dataset(4, 120);
  PreprocessConfig cfg;
  const auto out = run_chain(ds, cfg);
  for (Index i = 0; i < out.n_samples(); ++i) CHECK(out.intensities().row(i).maxCoeff() == 1.0);
  const auto again = run_chain(ds, cfg);
  CHECK(again.intensities() == out.intensities());

  // Row 2 alone gives the same row.
  const auto single = run_chain(ds.subset({2, 0}), cfg);
  CHECK(single.intensities().row(0) == out.intensities().row(2));
}

TEST_CASE("run_chain applies crop then smoothing only when configured") {
  const auto ds = line_peak_dataset(2, 60);
  PreprocessConfig cfg;
  cfg.baseline = false;
  cfg.normalize = Normalization::kNone;
  cfg.crop_min = 410;
  cfg.crop_max = 449;
  const auto out = run_chain(ds, cfg);
  CHECK(out.n_features() == 40);
  for (Index i = 0; i < 2; ++i) {
    const Vector row = ds.intensities().row(i).segment(10, 40).transpose();
    CHECK((out.intensities().row(i).transpose() - savgol_smooth(row, 5, 2)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("preprocess config validation and json") {
  PreprocessConfig cfg;
  cfg.savgol_window = 4;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = PreprocessConfig{};
  cfg.baseline_lambda = 123.0;
  cfg.normalize = Normalization::kNone;
  const auto back = preprocess_config_from_json(to_json(cfg));
  CHECK(back.baseline_lambda == 123.0);
  CHECK(back.normalize == Normalization::kNone);
}
