#include "shapca/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace shapca::preprocess {

void PreprocessConfig::validate() const {
  if (!(crop_min < crop_max)) throw InvalidArgument("crop_min must be < crop_max");
  if (smooth) {
    if (savgol_window < 3 || savgol_window % 2 == 0)
      throw InvalidArgument("savgol_window must be an odd integer >= 3");
    if (savgol_polyorder < 0 || savgol_polyorder >= savgol_window)
      throw InvalidArgument("savgol_polyorder must be in [0, window)");
  }
  if (baseline) {
    if (!(baseline_lambda > 0)) throw InvalidArgument("baseline_lambda must be positive");
    if (!(baseline_p > 0 && baseline_p < 1)) throw InvalidArgument("baseline_p must be in (0, 1)");
    if (baseline_max_iter < 1) throw InvalidArgument("baseline_max_iter must be >= 1");
  }
}

nlohmann::json to_json(const PreprocessConfig& cfg) {
  return {
      {"crop_min", cfg.crop_min},
      {"crop_max", cfg.crop_max},
      {"smooth", cfg.smooth},
      {"savgol_window", cfg.savgol_window},
      {"savgol_polyorder", cfg.savgol_polyorder},
      {"baseline", cfg.baseline},
      {"baseline_lambda", cfg.baseline_lambda},
      {"baseline_p", cfg.baseline_p},
      {"baseline_max_iter", cfg.baseline_max_iter},
      {"normalize", cfg.normalize == Normalization::kMaxIntensity ? "max_intensity" : "none"},
  };
}

PreprocessConfig preprocess_config_from_json(const nlohmann::json& j) {
  PreprocessConfig cfg;
  cfg.crop_min = j.value("crop_min", cfg.crop_min);
  cfg.crop_max = j.value("crop_max", cfg.crop_max);
  cfg.smooth = j.value("smooth", cfg.smooth);
  cfg.savgol_window = j.value("savgol_window", cfg.savgol_window);
  cfg.savgol_polyorder = j.value("savgol_polyorder", cfg.savgol_polyorder);
  cfg.baseline = j.value("baseline", cfg.baseline);
  cfg.baseline_lambda = j.value("baseline_lambda", cfg.baseline_lambda);
  cfg.baseline_p = j.value("baseline_p", cfg.baseline_p);
  cfg.baseline_max_iter = j.value("baseline_max_iter", cfg.baseline_max_iter);
  const auto norm = j.value("normalize", std::string("max_intensity"));
  if (norm == "max_intensity") {
    cfg.normalize = Normalization::kMaxIntensity;
  } else if (norm == "none") {
    cfg.normalize = Normalization::kNone;
  } else {
    throw InvalidArgument("normalize must be 'max_intensity' or 'none', got '" + norm + "'");
  }
  cfg.validate();
  return cfg;
}

io::SpectraDataset crop(const io::SpectraDataset& ds, double lo, double hi) {
  const auto& axis = ds.axis().values();
  std::vector<double> kept_axis;
  std::vector<Index> kept;
  for (std::size_t j = 0; j < axis.size(); ++j) {
    if (axis[j] >= lo && axis[j] <= hi) {
      kept.push_back(static_cast<Index>(j));
      kept_axis.push_back(axis[j]);
    }
  }
  if (kept.empty())
    throw InvalidArgument("crop range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] does not intersect the spectral axis");
  if (kept.size() < 2) throw InvalidArgument("crop range keeps fewer than 2 axis points");
  Matrix x(ds.n_samples(), static_cast<Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) x.col(static_cast<Index>(c)) = ds.intensities().col(kept[c]);
  return ds.with_intensities(io::SpectralAxis(std::move(kept_axis), ds.axis().unit_label()),
                             std::move(x));
}

namespace {

// Weights that evaluate, at offset 0, the degree-`order` least-squares
// polynomial through samples at offsets [-left, right].
Vector window_weights(int left, int right, int order) {
  const int n = left + right + 1;
  const int degree = std::min(order, n - 1);
  Matrix vander(n, degree + 1);
  for (int r = 0; r < n; ++r) {
    const double t = static_cast<double>(r - left);
    double v = 1.0;
    for (int c = 0; c <= degree; ++c) {
      vander(r, c) = v;
      v *= t;
    }
  }
  const Matrix pinv = vander.colPivHouseholderQr().solve(Matrix::Identity(n, n));
  return pinv.row(0).transpose();
}

void check_savgol_args(Index length, int window, int polyorder) {
  if (window < 1 || window % 2 == 0) throw InvalidArgument("Savitzky-Golay window must be odd");
  if (polyorder < 0 || polyorder >= window)
    throw InvalidArgument("Savitzky-Golay polyorder must be in [0, window)");
  if (length < window)
    throw InvalidArgument("signal length " + std::to_string(length) + " shorter than window " +
                          std::to_string(window));
}

}  // namespace

Vector savgol_coefficients(int window, int polyorder) {
  check_savgol_args(window, window, polyorder);
  const int half = window / 2;
  return window_weights(half, half, polyorder);
}

Vector savgol_smooth(const Vector& y, int window, int polyorder) {
  const Index n = y.size();
  check_savgol_args(n, window, polyorder);
  const int half = window / 2;
  const Vector centre = window_weights(half, half, polyorder);
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    const int left = static_cast<int>(std::min<Index>(half, i));
    const int right = static_cast<int>(std::min<Index>(half, n - 1 - i));
    if (left == half && right == half) {
      out(i) = centre.dot(y.segment(i - half, window));
    } else {
      const Vector w = window_weights(left, right, polyorder);
      out(i) = w.dot(y.segment(i - left, left + right + 1));
    }
  }
  return out;
}

BaselineResult baseline_correct(const Vector& y, double lambda, double p, int max_iter) {
  if (!(lambda > 0)) throw InvalidArgument("baseline lambda must be positive");
  if (!(p > 0 && p < 1)) throw InvalidArgument("baseline p must be in (0, 1)");
  if (max_iter < 1) throw InvalidArgument("baseline max_iter must be >= 1");
  const Index n = y.size();
  if (n < 3) throw InvalidArgument("baseline correction needs at least 3 points");

  using Sparse = Eigen::SparseMatrix<double>;
  Sparse d2(n - 2, n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(3 * (n - 2)));
  for (Index r = 0; r < n - 2; ++r) {
    trips.emplace_back(r, r, 1.0);
    trips.emplace_back(r, r + 1, -2.0);
    trips.emplace_back(r, r + 2, 1.0);
  }
  d2.setFromTriplets(trips.begin(), trips.end());
  const Sparse penalty = lambda * Sparse(d2.transpose() * d2);

  Vector w = Vector::Ones(n);
  Vector z = Vector::Zero(n);
  std::vector<char> above(static_cast<std::size_t>(n), 2);  // 2 = no previous pass
  Eigen::SimplicialLDLT<Sparse> solver;
  BaselineResult res;
  for (int it = 0; it < max_iter; ++it) {
    Sparse system = penalty;
    for (Index i = 0; i < n; ++i) system.coeffRef(i, i) += w(i);
    if (it == 0) solver.analyzePattern(system);
    solver.factorize(system);
    if (solver.info() != Eigen::Success) throw Error("baseline system factorization failed");
    z = solver.solve(w.cwiseProduct(y));
    res.iterations = it + 1;

    Index flips = 0;
    for (Index i = 0; i < n; ++i) {
      const char now = y(i) > z(i) ? 1 : 0;
      auto& prev = above[static_cast<std::size_t>(i)];
      if (prev != now) ++flips;
      prev = now;
      w(i) = now ? p : 1.0 - p;
    }
    if (it > 0 && static_cast<double>(flips) < 1e-3 * static_cast<double>(n)) break;
  }
  res.baseline = z;
  res.corrected = y - z;
  return res;
}

Vector normalize_max(const Vector& y) {
  if (y.size() == 0) throw InvalidArgument("cannot normalize an empty spectrum");
  if (y.cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("cannot normalize an all-zero spectrum");
  const double m = y.maxCoeff();
  if (!(m > 0)) throw InvalidArgument("cannot normalize a spectrum with non-positive maximum");
  return y / m;
}

io::SpectraDataset run_chain(const io::SpectraDataset& ds, const PreprocessConfig& cfg) {
  cfg.validate();
  io::SpectraDataset cropped = crop(ds, cfg.crop_min, cfg.crop_max);
  Matrix x = cropped.intensities();
  parallel::parallel_for(static_cast<std::size_t>(x.rows()), [&](std::size_t r) {
    const auto i = static_cast<Index>(r);
    Vector y = x.row(i).transpose();
    if (cfg.smooth) y = savgol_smooth(y, cfg.savgol_window, cfg.savgol_polyorder);
    if (cfg.baseline)
      y = baseline_correct(y, cfg.baseline_lambda, cfg.baseline_p, cfg.baseline_max_iter).corrected;
    if (cfg.normalize == Normalization::kMaxIntensity) {
      try {
        y = normalize_max(y);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument("spectrum '" + cropped.sample_ids()[r] + "': " + e.what());
      }
    }
    x.row(i) = y.transpose();
  });
  return cropped.with_intensities(cropped.axis(), std::move(x));
}

}  // namespace shapca::preprocess
