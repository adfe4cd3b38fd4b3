#pragma once

#include <json.hpp>

#include "shapca/common.hpp"
#include "shapca/spectra_io.hpp"

namespace shapca::preprocess {

enum class Normalization { kMaxIntensity, kNone };

struct PreprocessConfig {
  double crop_min = -1e300;
  double crop_max = 1e300;
  int savgol_window = 5;
  int savgol_polyorder = 2;
  double baseline_lambda = 5e5;
  double baseline_p = 0.003;
  int baseline_max_iter = 50;
  Normalization normalize = Normalization::kMaxIntensity;

  // Stage switches; a disabled stage passes spectra through.
  bool smooth = true;
  bool baseline = true;

  void validate() const;
};

nlohmann::json to_json(const PreprocessConfig& cfg);
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);

/// Keeps exactly the columns whose axis value lies in [lo, hi].
io::SpectraDataset crop(const io::SpectraDataset& ds, double lo, double hi);

/// Convolution weights of the centred Savitzky-Golay filter (length `window`).
Vector savgol_coefficients(int window, int polyorder);

/// Savitzky-Golay smoothing. Points closer than window/2 to an edge are
/// evaluated from a least-squares fit on the window truncated to the signal.
Vector savgol_smooth(const Vector& y, int window, int polyorder);

struct BaselineResult {
  Vector corrected;
  Vector baseline;
  int iterations = 0;
};

/// Asymmetric penalized least-squares baseline (iteratively reweighted
/// Whittaker smoother with a second-difference penalty).
///
/// Minimises sum_i w_i (y_i - z_i)^2 + lambda * |D2 z|^2 where w_i = p if
/// y_i > z_i and 1 - p otherwise. Iteration stops once fewer than 0.1% of
/// the residual signs flip between passes, or after max_iter passes.
BaselineResult baseline_correct(const Vector& y, double lambda, double p, int max_iter = 50);

/// y / max(y). Throws on an all-zero spectrum or a non-positive maximum.
Vector normalize_max(const Vector& y);

/// crop -> smooth -> baseline -> normalize, applied per spectrum.
io::SpectraDataset run_chain(const io::SpectraDataset& ds, const PreprocessConfig& cfg);

}  // namespace shapca::preprocess
