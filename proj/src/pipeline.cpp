#include "shapca/pipeline.hpp"

namespace shapca {

nlohmann::json to_json(const PipelineConfig& cfg) {
  return {{"use_sparse_pca", cfg.use_sparse_pca},
          {"sparse_pca", spca::to_json(cfg.spca)},
          {"classifier", models::to_json(cfg.classifier)}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  cfg.use_sparse_pca = j.value("use_sparse_pca", true);
  if (j.contains("sparse_pca")) cfg.spca = spca::sparse_pca_config_from_json(j["sparse_pca"]);
  if (j.contains("classifier")) cfg.classifier = models::classifier_config_from_json(j["classifier"]);
  return cfg;
}

Matrix FittedPipeline::features(const Matrix& x) const {
  if (spca) return spca::transform(*spca, x);
  if (x.cols() != models::n_features(classifier))
    throw DimensionMismatch("pipeline input has wrong feature count");
  return x;
}

Matrix FittedPipeline::normalized_features(const Matrix& f) const { return scaler.apply(f); }

Matrix FittedPipeline::predict_proba(const Matrix& x) const {
  return models::predict_proba(classifier, features(x));
}

std::vector<int> FittedPipeline::predict(const Matrix& x) const {
  return models::argmax_rows(predict_proba(x));
}

FittedPipeline fit_pipeline(const Matrix& x, const std::vector<int>& labels, int n_classes,
                            const PipelineConfig& cfg) {
  std::optional<spca::SparsePcaModel> model;
  Matrix f;
  if (cfg.use_sparse_pca) {
    model = spca::fit(x, cfg.spca);
    f = spca::transform(*model, x);
  } else {
    f = x;
  }
  auto scaler = spca::ComponentScaler::fit(f);
  auto clf = models::fit_classifier(f, labels, n_classes, cfg.classifier);
  return FittedPipeline{std::move(model), std::move(scaler), std::move(clf)};
}

nlohmann::json to_json(const FittedPipeline& p) {
  nlohmann::json j = {{"scaler", spca::to_json(p.scaler)},
                      {"classifier", models::to_json(p.classifier)}};
  j["sparse_pca"] = p.spca ? spca::to_json(*p.spca) : nlohmann::json(nullptr);
  return j;
}

FittedPipeline fitted_pipeline_from_json(const nlohmann::json& j) {
  std::optional<spca::SparsePcaModel> model;
  if (j.contains("sparse_pca") && !j["sparse_pca"].is_null())
    model = spca::sparse_pca_model_from_json(j["sparse_pca"]);
  return FittedPipeline{std::move(model), spca::component_scaler_from_json(j.at("scaler")),
                        models::classifier_from_json(j.at("classifier"))};
}

}  // namespace shapca
