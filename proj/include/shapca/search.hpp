#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapca/pipeline.hpp"
#include "shapca/spectra_io.hpp"

namespace shapca::search {

// Tunable hyperparameters, addressed by name:
//   spca.n_components  spca.alpha
//   forest.n_trees  forest.max_depth  forest.min_leaf  forest.max_features
//   linear.l2
void set_param(PipelineConfig& cfg, const std::string& name, double value);
double get_param(const PipelineConfig& cfg, const std::string& name);

struct Distribution {
  enum class Kind { kIntUniform, kUniform, kLogUniform, kChoice };
  Kind kind = Kind::kUniform;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> choices;

  double sample(std::mt19937_64& rng) const;
};

enum class Scoring { kAccuracy, kMacroF1 };

struct SearchSpec {
  int n_samples = 10;
  std::map<std::string, Distribution> distributions;
  // Stage 2 evaluates the Cartesian product of these grids with every other
  // parameter held at the stage-1 winner.
  std::map<std::string, std::vector<double>> grids;
  io::FoldMode cv_mode = io::FoldMode::kStratifiedKFold;
  int k = 5;
  Scoring scoring = Scoring::kAccuracy;
  std::uint64_t seed = 0;
  // Scores closer than this count as tied and fall back to sparsity.
  double tie_tolerance = 1e-12;
};

SearchSpec search_spec_from_json(const nlohmann::json& j);

struct CandidateScore {
  int stage = 1;
  std::map<std::string, double> params;
  PipelineConfig config;
  bool feasible = true;
  std::string note;
  double mean_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
  double mean_sparsity = 0.0;
  double score = 0.0;
};

struct SearchResult {
  PipelineConfig best;
  std::size_t best_index = 0;
  std::vector<CandidateScore> table;
};

/// Highest score wins; scores within `tie_tolerance` prefer the higher
/// sparsity, then the earlier candidate. Infeasible rows never win.
std::size_t select_best(const std::vector<CandidateScore>& table, double tie_tolerance);

/// Mean CV scores of one configuration on fixed folds.
CandidateScore evaluate(const io::SpectraDataset& train, const std::vector<io::Fold>& folds,
                        const PipelineConfig& cfg, Scoring scoring);

/// Randomised stage followed by a grid stage around its winner.
SearchResult hyperparam_search(const io::SpectraDataset& train, const PipelineConfig& base,
                               const SearchSpec& spec);

/// One row per candidate: stage, parameters, accuracy, macro F1, sparsity,
/// score, and a `selected` marker.
std::string score_table_csv(const SearchResult& result);

}  // namespace shapca::search
