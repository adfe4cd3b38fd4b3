#include <memory>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "shapca/models.hpp"

namespace shapca::models {

nlohmann::json to_json(const LinearConfig& cfg) {
  return {{"l2", cfg.l2}, {"max_epochs", cfg.max_epochs}, {"tol", cfg.tol}};
}

LinearConfig linear_config_from_json(const nlohmann::json& j) {
  LinearConfig cfg;
  cfg.l2 = j.value("l2", cfg.l2);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.tol = j.value("tol", cfg.tol);
  return cfg;
}

namespace {

// Row-wise softmax of logits, max-shifted.
Matrix softmax_rows(Matrix logits) {
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

}  // namespace

Matrix LinearProbModel::predict_proba(const Matrix& x) const {
  if (x.cols() != weights.cols())
    throw DimensionMismatch("linear model expects " + std::to_string(weights.cols()) +
                            " features, got " + std::to_string(x.cols()));
  return softmax_rows((x * weights.transpose()).rowwise() + bias.transpose());
}

double linear_loss(const LinearProbModel& m, const Matrix& x, const std::vector<int>& labels) {
  const Matrix logits = (x * m.weights.transpose()).rowwise() + m.bias.transpose();
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    loss += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return loss / static_cast<double>(x.rows()) + 0.5 * m.l2_strength * m.weights.squaredNorm();
}

LinearProbModel fit_linear(const Matrix& x, const std::vector<int>& labels, int n_classes,
                           const LinearConfig& cfg) {
  const Index n = x.rows();
  if (n < 2) throw InvalidArgument("linear model needs at least 2 samples");
  if (static_cast<Index>(labels.size()) != n) throw DimensionMismatch("labels length != rows");
  if (!(cfg.l2 > 0)) throw InvalidArgument("l2 strength must be positive");
  if (n_classes < 2) throw InvalidArgument("linear model needs at least 2 classes");
  std::set<int> seen(labels.begin(), labels.end());
  if (seen.size() < 2) throw InvalidArgument("training data contains a single class");

  Matrix y = Matrix::Zero(n, n_classes);
  for (Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= n_classes) throw InvalidArgument("label out of range");
    y(i, l) = 1.0;
  }

  // Softmax cross-entropy has Hessian <= 0.5 * X~^T X~ / N in the logits, so
  // L = 0.5 * sigma_max(X~)^2 / N + l2 bounds the gradient's Lipschitz constant.
  Matrix xt(n, x.cols() + 1);
  xt << x, Vector::Ones(n);
  Eigen::BDCSVD<Matrix> svd(xt);
  const double smax = svd.singularValues()(0);
  const double lip = 0.5 * smax * smax / static_cast<double>(n) + cfg.l2;
  const double step = 1.0 / lip;

  LinearProbModel m;
  m.weights = Matrix::Zero(n_classes, x.cols());
  m.bias = Vector::Zero(n_classes);
  m.l2_strength = cfg.l2;
  double prev = linear_loss(m, x, labels);
  m.loss_trace.push_back(prev);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const Matrix p = m.predict_proba(x);
    const Matrix g = (p - y) / static_cast<double>(n);  // N x C
    m.weights -= step * (g.transpose() * x + cfg.l2 * m.weights);
    m.bias -= step * g.colwise().sum().transpose();
    const double cur = linear_loss(m, x, labels);
    m.loss_trace.push_back(cur);
    if (prev - cur <= cfg.tol * std::max(1.0, prev)) break;
    prev = cur;
  }
  return m;
}

nlohmann::json to_json(const LinearProbModel& m) {
  std::vector<std::vector<double>> w;
  for (Index c = 0; c < m.weights.rows(); ++c) {
    w.emplace_back(static_cast<std::size_t>(m.weights.cols()));
    for (Index k = 0; k < m.weights.cols(); ++k) w.back()[static_cast<std::size_t>(k)] = m.weights(c, k);
  }
  return {{"type", "linear"},
          {"weights", w},
          {"bias", std::vector<double>(m.bias.data(), m.bias.data() + m.bias.size())},
          {"l2_strength", m.l2_strength}};
}

LinearProbModel linear_from_json(const nlohmann::json& j) {
  LinearProbModel m;
  const auto w = j.at("weights").get<std::vector<std::vector<double>>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (w.size() != b.size() || w.empty()) throw InvalidArgument("linear model: weights/bias mismatch");
  m.weights.resize(static_cast<Index>(w.size()), static_cast<Index>(w[0].size()));
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (w[c].size() != w[0].size()) throw InvalidArgument("linear model: ragged weights");
    for (std::size_t k = 0; k < w[c].size(); ++k) m.weights(static_cast<Index>(c), static_cast<Index>(k)) = w[c][k];
  }
  m.bias = Eigen::Map<const Vector>(b.data(), static_cast<Index>(b.size()));
  m.l2_strength = j.value("l2_strength", 1e-2);
  return m;
}

nlohmann::json to_json(const ClassifierConfig& cfg) {
  return {{"kind", cfg.kind == ClassifierKind::kForest ? "forest" : "linear"},
          {"forest", to_json(cfg.forest)},
          {"linear", to_json(cfg.linear)}};
}

ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  ClassifierConfig cfg;
  const auto kind = j.value("kind", std::string("forest"));
  if (kind == "forest") {
    cfg.kind = ClassifierKind::kForest;
  } else if (kind == "linear") {
    cfg.kind = ClassifierKind::kLinear;
  } else {
    throw InvalidArgument("classifier kind must be 'forest' or 'linear', got '" + kind + "'");
  }
  if (j.contains("forest")) cfg.forest = forest_config_from_json(j["forest"]);
  if (j.contains("linear")) cfg.linear = linear_config_from_json(j["linear"]);
  return cfg;
}

AnyClassifier fit_classifier(const Matrix& x, const std::vector<int>& labels, int n_classes,
                             const ClassifierConfig& cfg) {
  if (cfg.kind == ClassifierKind::kForest) return fit_forest(x, labels, n_classes, cfg.forest);
  return fit_linear(x, labels, n_classes, cfg.linear);
}

Matrix predict_proba(const AnyClassifier& m, const Matrix& x) {
  return std::visit([&](const auto& model) { return model.predict_proba(x); }, m);
}

std::vector<int> predict(const AnyClassifier& m, const Matrix& x) {
  return argmax_rows(predict_proba(m, x));
}

Index n_features(const AnyClassifier& m) {
  return std::visit([](const auto& model) { return model.n_features(); }, m);
}

int n_classes(const AnyClassifier& m) {
  return std::visit([](const auto& model) { return model.n_classes(); }, m);
}

ProbaFunction as_function(const AnyClassifier& m) {
  // Owns a copy so the callable may outlive its argument.
  auto held = std::make_shared<const AnyClassifier>(m);
  return [held](const Matrix& x) { return predict_proba(*held, x); };
}

nlohmann::json to_json(const AnyClassifier& m) {
  return std::visit([](const auto& model) { return to_json(model); }, m);
}

AnyClassifier classifier_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "forest") return forest_from_json(j);
  if (type == "linear") return linear_from_json(j);
  throw InvalidArgument("unknown classifier type '" + type + "'");
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size()) throw DimensionMismatch("accuracy: length mismatch");
  if (truth.empty()) throw InvalidArgument("accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size()) throw DimensionMismatch("macro_f1: length mismatch");
  if (truth.empty()) throw InvalidArgument("macro_f1 of an empty set");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  double total = 0.0;
  for (int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      else if (pred[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    const double denom = 2 * tp + fp + fn;
    total += denom > 0 ? 2 * tp / denom : 0.0;
  }
  return total / static_cast<double>(classes.size());
}

}  // namespace shapca::models
