#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "shapca/common.hpp"

namespace shapca::spca {

/// N x K matrix of component values; entry (i, k) is component k of sample i.
using ComponentValues = Matrix;

struct SparsePcaConfig {
  int n_components = 10;
  double alpha = 1.0;  // L1 strength on the loadings
  int max_iter = 1000;
  double tol = 1e-8;   // relative objective decrease that counts as converged
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const SparsePcaConfig& cfg);
SparsePcaConfig sparse_pca_config_from_json(const nlohmann::json& j);

/// Fitted sparse loadings.
///
/// Row k of `loadings` is the direction of component k over the P input
/// features. Rows are ordered by descending explained variance and each row
/// is signed so its largest-magnitude entry is positive.
struct SparsePcaModel {
  Matrix loadings;              // K x P
  Vector feature_means;         // P
  Vector explained_variance;    // K
  double sparsity_fraction = 0; // exactly-zero loadings / (K * P)
  SparsePcaConfig config;

  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_trace;       // one entry per sweep, starting at the initial point
  std::vector<int> degenerate_components;    // rows still all-zero after one re-seed

  Index n_components() const { return loadings.rows(); }
  Index n_features() const { return loadings.cols(); }
};

nlohmann::json to_json(const SparsePcaModel& m);
SparsePcaModel sparse_pca_model_from_json(const nlohmann::json& j);

/// 0.5 * |Xc - U W|_F^2 + alpha * sum |W|.
double objective(const Matrix& centered, const Matrix& codes, const Matrix& loadings, double alpha);

/// Alternating minimisation of the objective above with unit-norm code
/// columns: exact block updates of each loading row (soft-thresholding) and
/// each code column (normalised least squares). Initialised from the SVD.
SparsePcaModel fit(const Matrix& x, const SparsePcaConfig& cfg);

/// (X - means) * W^T.
ComponentValues transform(const SparsePcaModel& model, const Matrix& x);

/// Per-component min-max mapping to [-1, 1], fitted on one set of component
/// values and reusable for others. Constant columns map to 0; values outside
/// the fitted range are clipped to [-clip, clip].
struct ComponentScaler {
  Vector min;
  Vector max;
  double clip = 1.5;

  static ComponentScaler fit(const ComponentValues& cv);
  ComponentValues apply(const ComponentValues& cv) const;
};

nlohmann::json to_json(const ComponentScaler& s);
ComponentScaler component_scaler_from_json(const nlohmann::json& j);

/// Min-max normalisation of each column over the rows of `cv` itself.
ComponentValues normalize_components(const ComponentValues& cv);

}  // namespace shapca::spca
