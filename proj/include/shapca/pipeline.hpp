#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "shapca/models.hpp"
#include "shapca/sparse_pca.hpp"

namespace shapca {

/// Sparse PCA (optional) followed by a classifier. With `use_sparse_pca`
/// off the classifier sees the raw features.
struct PipelineConfig {
  bool use_sparse_pca = true;
  spca::SparsePcaConfig spca;
  models::ClassifierConfig classifier;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct FittedPipeline {
  std::optional<spca::SparsePcaModel> spca;
  spca::ComponentScaler scaler;  // fitted on the training component values
  models::AnyClassifier classifier;

  /// Classifier inputs: component values, or the raw rows without Sparse PCA.
  Matrix features(const Matrix& x) const;
  /// Features min-max mapped with the training statistics.
  Matrix normalized_features(const Matrix& features) const;
  Matrix predict_proba(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
};

FittedPipeline fit_pipeline(const Matrix& x, const std::vector<int>& labels, int n_classes,
                            const PipelineConfig& cfg);

nlohmann::json to_json(const FittedPipeline& p);
FittedPipeline fitted_pipeline_from_json(const nlohmann::json& j);

}  // namespace shapca
