#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapca/common.hpp"
#include "shapca/models.hpp"

namespace shapca::shap {

/// Shapley values phi[i, k, c] of feature k for sample i toward class c,
/// plus the per-class baseline phi0[c]. For every (i, c),
/// phi0[c] + sum_k phi[i, k, c] equals the explained model's probability.
class AttributionTensor {
 public:
  AttributionTensor() = default;
  AttributionTensor(Index n_samples, Index n_features, Index n_classes);

  Index n_samples() const { return n_; }
  Index n_features() const { return k_; }
  Index n_classes() const { return c_; }

  double& operator()(Index i, Index k, Index c) { return phi_[offset(i, k, c)]; }
  double operator()(Index i, Index k, Index c) const { return phi_[offset(i, k, c)]; }

  Vector& phi0() { return phi0_; }
  const Vector& phi0() const { return phi0_; }

  /// N x K slice for one class.
  Matrix class_slice(Index c) const;
  /// K x C block of one sample.
  Matrix sample_block(Index i) const;
  void set_sample_block(Index i, const Matrix& block);

  /// N x C matrix of phi0 + sum_k phi.
  Matrix reconstructed_output() const;

 private:
  std::size_t offset(Index i, Index k, Index c) const {
    return static_cast<std::size_t>((i * k_ + k) * c_ + c);
  }
  Index n_ = 0, k_ = 0, c_ = 0;
  std::vector<double> phi_;
  Vector phi0_;
};

/// Long-format JSON: {"shape": [N, K, C], "phi0": [...], "phi": [[i, k, c, v], ...]}.
nlohmann::json to_json(const AttributionTensor& t);
AttributionTensor attribution_from_json(const nlohmann::json& j);
/// CSV with header `sample,component,class,value`; baselines use sample -1.
std::string to_csv(const AttributionTensor& t);

/// Reference distribution for interventional explainers. Weights sum to 1.
struct BackgroundSet {
  enum class Selection { kTrainingSet, kKMeansSummary };

  Matrix rows;
  Vector weights;
  Selection selection = Selection::kTrainingSet;

  static BackgroundSet from_rows(Matrix rows);
  /// Lloyd's k-means (k-means++ seeding) with centroids weighted by cluster size.
  static BackgroundSet kmeans_summary(const Matrix& rows, Index m, std::uint64_t seed);
  /// The full set when it has at most 200 rows, else a 100-centroid summary.
  static BackgroundSet default_for(const Matrix& rows, std::uint64_t seed);
};

/// Exact path-dependent TreeSHAP on class probabilities. Conditional
/// expectations come from the node covers (n_train). The forest's
/// attribution is the sum of each tree's attribution of its 1/T-scaled
/// output.
AttributionTensor tree_shap(const models::ForestModel& model, const Matrix& x);

/// Cover-weighted expected output of the forest (the tree explainer's phi0).
Vector tree_expected_value(const models::ForestModel& model);

struct KernelOptions {
  bool exhaustive = false;
  // Coalition budget when sampling; defaults to 2K + 2048.
  std::optional<Index> n_coalitions;
  std::uint64_t seed = 0;
};

/// KernelSHAP: Shapley-kernel weighted least squares over feature
/// coalitions with the efficiency constraint sum(phi) = f(x) - phi0 imposed
/// exactly. Features outside a coalition are imputed by averaging the model
/// over the background rows.
AttributionTensor kernel_shap(const models::ProbaFunction& model, const Matrix& x,
                              const BackgroundSet& background, const KernelOptions& options);

/// Exhaustive Shapley enumeration for one sample under the same
/// interventional value function as kernel_shap. Result is K x C.
struct BruteForceResult {
  Matrix phi;   // K x C
  Vector phi0;  // C
  Vector fx;    // C
};
BruteForceResult brute_force_shap(const models::ProbaFunction& model, const Vector& x,
                                  const BackgroundSet& background);

/// Background-averaged model output with the features flagged in each mask
/// row taken from x. masks is M x K with 0/1 entries; result is M x C.
Matrix coalition_values(const models::ProbaFunction& model, const Vector& x,
                        const BackgroundSet& background, const Matrix& masks);

enum class ExplainerKind { kAuto, kTree, kKernel };
enum class BackgroundChoice { kAuto, kTrainingSet, kKMeans };

struct ExplainerOptions {
  // kAuto: TreeSHAP for forests, KernelSHAP otherwise.
  ExplainerKind kind = ExplainerKind::kAuto;
  KernelOptions kernel;
  BackgroundChoice background = BackgroundChoice::kAuto;
  Index kmeans_centroids = 100;
  std::uint64_t background_seed = 0;
};

nlohmann::json to_json(const ExplainerOptions& o);
ExplainerOptions explainer_options_from_json(const nlohmann::json& j);

BackgroundSet make_background(const Matrix& train_rows, const ExplainerOptions& options);

/// Attributions of `model` on the rows of x. `train_rows` feeds the kernel
/// explainer's background and is ignored by TreeSHAP.
AttributionTensor explain(const models::AnyClassifier& model, const Matrix& x,
                          const Matrix& train_rows, const ExplainerOptions& options);

}  // namespace shapca::shap
