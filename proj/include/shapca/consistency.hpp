#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapca/common.hpp"
#include "shapca/pipeline.hpp"
#include "shapca/shap.hpp"
#include "shapca/spectra_io.hpp"

namespace shapca::consistency {

/// Cosine similarity; nullopt when either vector has zero norm or a
/// non-finite entry. The result is clamped to [-1, 1].
std::optional<double> cosine_sim(const Vector& a, const Vector& b);

/// Pearson correlation; nullopt when either vector is (numerically)
/// constant or non-finite.
std::optional<double> pearson_corr(const Vector& a, const Vector& b);

enum class Method { kShapca, kRawShap };
std::string method_name(Method m);

/// Explanations of one fold model on the shared holdout set, already on the
/// original axis.
struct ModelExplanations {
  std::vector<int> predictions;             // per holdout sample
  std::vector<std::optional<Vector>> global; // per class; nullopt when no sample was predicted as it
  std::vector<Vector> local;                // per holdout sample, toward its predicted class
  double holdout_accuracy = 0.0;
};

/// Pairwise scores among f models. Off-diagonal entries of the f x f
/// matrices hold the score; the diagonal and undefined pairs hold NaN.
struct PairScores {
  Matrix cosine;
  Matrix pearson;
  std::optional<double> cosine_mean;
  std::optional<double> pearson_mean;
  int n_cosine_undefined = 0;
  int n_pearson_undefined = 0;
};

struct LocalScores {
  // Pair matrices hold each model pair's mean over the samples it scored.
  PairScores pairs;
  // Means over every scored (sample, model pair).
  std::optional<double> cosine_mean;
  std::optional<double> pearson_mean;
  long n_sample_pairs = 0;      // holdout samples x model pairs
  long n_class_mismatch = 0;    // excluded: the two models predicted different classes
  long n_cosine_undefined = 0;  // excluded: zero vector
  long n_pearson_undefined = 0; // excluded: constant vector
  double exclusion_rate() const {
    return n_sample_pairs ? static_cast<double>(n_class_mismatch) / static_cast<double>(n_sample_pairs) : 0.0;
  }
};

struct ConsistencyReport {
  std::string method;      // shapca or raw_shap
  std::string classifier;  // forest or linear
  int n_models = 0;
  int n_pairs = 0;
  std::vector<std::string> class_names;
  std::vector<PairScores> global;  // per class
  LocalScores local;
  std::vector<double> holdout_accuracy;  // per model

  std::string label() const { return method + "+" + classifier; }
  /// Mean of the defined per-class global means.
  std::optional<double> global_cosine_mean() const;
  std::optional<double> global_pearson_mean() const;
};

/// Scores every pair of models. All models must explain the same holdout.
ConsistencyReport score_explanations(const std::vector<ModelExplanations>& models,
                                     std::vector<std::string> class_names);

/// Explanations of a fitted pipeline on `holdout`: back-projected global and
/// local tracks when the pipeline has Sparse PCA, raw feature attributions
/// otherwise.
ModelExplanations explain_pipeline(const FittedPipeline& pipeline, const Matrix& train_x,
                                   const io::SpectraDataset& holdout,
                                   const shap::ExplainerOptions& options);

/// Classifier fitted on raw features and explained feature by feature
/// (the no-projection counterpart of the class-wise aggregation).
ModelExplanations raw_shap_baseline(const io::SpectraDataset& train, const io::SpectraDataset& holdout,
                                    const models::ClassifierConfig& cfg,
                                    const shap::ExplainerOptions& options);

struct ProtocolOptions {
  shap::ExplainerOptions explainer;
  // Give each fold its own classifier / Sparse PCA seed. Off reuses the
  // configured seeds in every fold.
  bool vary_seeds = true;
};

/// k pipelines on the k fold-train portions of `ds`, each explained on
/// `holdout`, scored pairwise.
ConsistencyReport run_protocol(const io::SpectraDataset& ds, const io::SpectraDataset& holdout,
                               const PipelineConfig& cfg, Method method, int k, std::uint64_t seed,
                               const ProtocolOptions& options = {});

nlohmann::json to_json(const ConsistencyReport& r);

/// Rows are classes then `Local`; columns are `<label>_cosine` and
/// `<label>_pearson` for each report. Undefined means are left empty.
std::string consistency_table_csv(const std::vector<ConsistencyReport>& reports);

}  // namespace shapca::consistency
