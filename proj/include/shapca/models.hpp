#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include <json.hpp>

#include "shapca/common.hpp"

namespace shapca::models {

/// Maps an M x K input to M x C class probabilities.
using ProbaFunction = std::function<Matrix(const Matrix&)>;

/// Row-wise argmax; ties go to the lower class index.
std::vector<int> argmax_rows(const Matrix& proba);

// ---------------------------------------------------------------------------
// Random forest

/// One node of a flattened decision tree. `feature < 0` marks a leaf.
/// Samples with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double n_train = 0.0;            // training cover (bootstrap multiplicity)
  std::vector<double> class_probs; // leaves only; sums to 1

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  /// Index of the leaf reached by `x`.
  int leaf_for(const double* x) const;
  int depth() const;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = -1;     // -1: unlimited; 0: a single leaf
  int min_leaf = 1;
  int max_features = 0;   // 0: ceil(sqrt(K))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const ForestConfig& cfg);
ForestConfig forest_config_from_json(const nlohmann::json& j);

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<Tree> trees, Index n_features, int n_classes);

  const std::vector<Tree>& trees() const { return trees_; }
  Index n_features() const { return n_features_; }
  int n_classes() const { return n_classes_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::vector<Index>>& bootstrap_indices() const { return bootstrap_; }

  /// Unweighted mean of leaf class_probs over trees.
  Matrix predict_proba(const Matrix& x) const;

  /// Replaces every node's cover with the number of rows of `x` routed
  /// through it. Throws if any node would receive zero rows.
  ForestModel with_covers_from(const Matrix& x) const;

  /// Checks the structural invariants (feature range, leaf simplex, cover
  /// additivity) and throws on the first violation.
  void validate() const;

  friend ForestModel fit_forest(const Matrix&, const std::vector<int>&, int, const ForestConfig&);
  friend ForestModel forest_from_json(const nlohmann::json&);

 private:
  std::vector<Tree> trees_;
  Index n_features_ = 0;
  int n_classes_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<Index>> bootstrap_;
};

/// Bootstrap-aggregated Gini trees. Candidate thresholds are midpoints
/// between consecutive distinct values; equal gains prefer the lower feature
/// index, then the lower threshold. Each node draws its feature subset from
/// an RNG keyed on its path from the root, so a tree grown to depth d is a
/// prefix of the same tree grown deeper.
ForestModel fit_forest(const Matrix& x, const std::vector<int>& labels, int n_classes,
                       const ForestConfig& cfg);

nlohmann::json to_json(const ForestModel& m);
ForestModel forest_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Multinomial logistic regression with L2 penalty

struct LinearConfig {
  double l2 = 1e-2;
  int max_epochs = 2000;
  double tol = 1e-10;
};

nlohmann::json to_json(const LinearConfig& cfg);
LinearConfig linear_config_from_json(const nlohmann::json& j);

struct LinearProbModel {
  Matrix weights;  // C x K
  Vector bias;     // C
  double l2_strength = 1e-2;
  std::vector<double> loss_trace;

  Index n_features() const { return weights.cols(); }
  int n_classes() const { return static_cast<int>(weights.rows()); }
  Matrix predict_proba(const Matrix& x) const;
};

/// Mean cross-entropy + (l2/2)|W|^2 over (x, labels).
double linear_loss(const LinearProbModel& m, const Matrix& x, const std::vector<int>& labels);

/// Full-batch gradient descent with step 1/L, L the Lipschitz bound of the
/// loss gradient, so the loss never increases between epochs.
LinearProbModel fit_linear(const Matrix& x, const std::vector<int>& labels, int n_classes,
                           const LinearConfig& cfg);

nlohmann::json to_json(const LinearProbModel& m);
LinearProbModel linear_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Either classifier

enum class ClassifierKind { kForest, kLinear };

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::kForest;
  ForestConfig forest;
  LinearConfig linear;
};

nlohmann::json to_json(const ClassifierConfig& cfg);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);

using AnyClassifier = std::variant<ForestModel, LinearProbModel>;

AnyClassifier fit_classifier(const Matrix& x, const std::vector<int>& labels, int n_classes,
                             const ClassifierConfig& cfg);
Matrix predict_proba(const AnyClassifier& m, const Matrix& x);
std::vector<int> predict(const AnyClassifier& m, const Matrix& x);
Index n_features(const AnyClassifier& m);
int n_classes(const AnyClassifier& m);
ProbaFunction as_function(const AnyClassifier& m);

nlohmann::json to_json(const AnyClassifier& m);
AnyClassifier classifier_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Metrics

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred);

/// Unweighted mean of per-class F1 over classes present in truth or pred.
double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred);

}  // namespace shapca::models
