#include "shapca/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace shapca::models {

std::vector<int> argmax_rows(const Matrix& proba) {
  std::vector<int> out(static_cast<std::size_t>(proba.rows()));
  for (Index i = 0; i < proba.rows(); ++i) {
    int best = 0;
    for (Index c = 1; c < proba.cols(); ++c)
      if (proba(i, c) > proba(i, best)) best = static_cast<int>(c);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

int Tree::leaf_for(const double* x) const {
  int n = 0;
  while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return n;
}

int Tree::depth() const {
  std::function<int(int)> rec = [&](int n) -> int {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    if (node.is_leaf()) return 0;
    return 1 + std::max(rec(node.left), rec(node.right));
  };
  return nodes.empty() ? 0 : rec(0);
}

nlohmann::json to_json(const ForestConfig& cfg) {
  return {{"n_trees", cfg.n_trees},     {"max_depth", cfg.max_depth},
          {"min_leaf", cfg.min_leaf},   {"max_features", cfg.max_features},
          {"bootstrap", cfg.bootstrap}, {"seed", cfg.seed}};
}

ForestConfig forest_config_from_json(const nlohmann::json& j) {
  ForestConfig cfg;
  cfg.n_trees = j.value("n_trees", cfg.n_trees);
  cfg.max_depth = j.value("max_depth", cfg.max_depth);
  cfg.min_leaf = j.value("min_leaf", cfg.min_leaf);
  cfg.max_features = j.value("max_features", cfg.max_features);
  cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

ForestModel::ForestModel(std::vector<Tree> trees, Index n_features, int n_classes)
    : trees_(std::move(trees)), n_features_(n_features), n_classes_(n_classes) {
  validate();
}

void ForestModel::validate() const {
  if (trees_.empty()) throw InvalidArgument("forest has no trees");
  if (n_classes_ < 1) throw InvalidArgument("forest needs at least one class");
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& nodes = trees_[t].nodes;
    if (nodes.empty()) throw InvalidArgument("tree " + std::to_string(t) + " is empty");
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const auto& node = nodes[n];
      const std::string where = "tree " + std::to_string(t) + " node " + std::to_string(n);
      if (node.is_leaf()) {
        if (static_cast<int>(node.class_probs.size()) != n_classes_)
          throw InvalidArgument(where + ": leaf has wrong number of class probabilities");
        const double s = std::accumulate(node.class_probs.begin(), node.class_probs.end(), 0.0);
        if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument(where + ": leaf probabilities do not sum to 1");
        continue;
      }
      if (node.feature >= n_features_) throw InvalidArgument(where + ": feature index out of range");
      const auto sz = static_cast<int>(nodes.size());
      if (node.left <= static_cast<int>(n) || node.right <= static_cast<int>(n) || node.left >= sz ||
          node.right >= sz)
        throw InvalidArgument(where + ": child index out of range");
      const double kids = nodes[static_cast<std::size_t>(node.left)].n_train +
                          nodes[static_cast<std::size_t>(node.right)].n_train;
      if (std::abs(node.n_train - kids) > 1e-9 * std::max(1.0, node.n_train))
        throw InvalidArgument(where + ": cover is not the sum of its children");
    }
  }
}

Matrix ForestModel::predict_proba(const Matrix& x) const {
  if (x.cols() != n_features_)
    throw DimensionMismatch("forest expects " + std::to_string(n_features_) + " features, got " +
                            std::to_string(x.cols()));
  Matrix out = Matrix::Zero(x.rows(), n_classes_);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = x;
  for (Index i = 0; i < x.rows(); ++i) {
    for (const auto& tree : trees_) {
      const auto& leaf = tree.nodes[static_cast<std::size_t>(tree.leaf_for(rows.row(i).data()))];
      for (int c = 0; c < n_classes_; ++c) out(i, c) += leaf.class_probs[static_cast<std::size_t>(c)];
    }
  }
  out /= static_cast<double>(trees_.size());
  return out;
}

ForestModel ForestModel::with_covers_from(const Matrix& x) const {
  if (x.cols() != n_features_) throw DimensionMismatch("cover data has wrong feature count");
  ForestModel out = *this;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = x;
  for (auto& tree : out.trees_) {
    for (auto& node : tree.nodes) node.n_train = 0.0;
    for (Index i = 0; i < rows.rows(); ++i) {
      int n = 0;
      for (;;) {
        auto& node = tree.nodes[static_cast<std::size_t>(n)];
        node.n_train += 1.0;
        if (node.is_leaf()) break;
        n = rows(i, node.feature) <= node.threshold ? node.left : node.right;
      }
    }
    for (std::size_t n = 0; n < tree.nodes.size(); ++n)
      if (tree.nodes[n].n_train == 0.0)
        throw InvalidArgument("node " + std::to_string(n) + " receives no rows from the cover data");
  }
  return out;
}

namespace {

double weighted_gini(double n, const std::vector<double>& counts) {
  if (n <= 0) return 0.0;
  double sq = 0.0;
  for (double c : counts) sq += c * c;
  return n - sq / n;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<int>& y, int n_classes, const ForestConfig& cfg,
              int mtry)
      : x_(x), y_(y), n_classes_(n_classes), cfg_(cfg), mtry_(mtry) {}

  Tree build(std::vector<Index> rows, std::uint64_t root_seed) {
    nodes_.clear();
    grow(rows, 0, root_seed);
    return Tree{std::move(nodes_)};
  }

 private:
  int grow(std::vector<Index>& rows, int depth, std::uint64_t seed) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const double n = static_cast<double>(rows.size());
    std::vector<double> counts(static_cast<std::size_t>(n_classes_), 0.0);
    for (Index r : rows) counts[static_cast<std::size_t>(y_[static_cast<std::size_t>(r)])] += 1.0;
    nodes_[static_cast<std::size_t>(id)].n_train = n;

    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    const bool depth_cap = cfg_.max_depth >= 0 && depth >= cfg_.max_depth;
    Split best;
    if (!pure && !depth_cap && rows.size() >= 2 * static_cast<std::size_t>(cfg_.min_leaf))
      best = find_split(rows, counts, seed);

    if (best.feature < 0) {
      auto& leaf = nodes_[static_cast<std::size_t>(id)];
      leaf.class_probs.resize(counts.size());
      for (std::size_t c = 0; c < counts.size(); ++c) leaf.class_probs[c] = counts[c] / n;
      return id;
    }

    std::vector<Index> left, right;
    for (Index r : rows) (x_(r, best.feature) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(left, depth + 1, splitmix64(seed * 3 + 1));
    const int rgt = grow(right, depth + 1, splitmix64(seed * 3 + 2));
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  Split find_split(const std::vector<Index>& rows, const std::vector<double>& counts,
                   std::uint64_t seed) const {
    const auto k = static_cast<int>(x_.cols());
    std::vector<int> feats(static_cast<std::size_t>(k));
    std::iota(feats.begin(), feats.end(), 0);
    std::mt19937_64 rng(seed);
    const int m = std::min(mtry_, k);
    for (int i = 0; i < m; ++i) {
      std::uniform_int_distribution<int> pick(i, k - 1);
      std::swap(feats[static_cast<std::size_t>(i)], feats[static_cast<std::size_t>(pick(rng))]);
    }
    feats.resize(static_cast<std::size_t>(m));
    std::sort(feats.begin(), feats.end());

    const double n = static_cast<double>(rows.size());
    const double parent = weighted_gini(n, counts);
    const double eps = 1e-12 * std::max(1.0, n);
    Split best;
    best.gain = eps;

    std::vector<std::pair<double, int>> vals(rows.size());
    std::vector<double> lc(counts.size());
    std::vector<double> rc(counts.size());
    for (int f : feats) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        vals[i] = {x_(rows[i], f), y_[static_cast<std::size_t>(rows[i])]};
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::fill(lc.begin(), lc.end(), 0.0);
      rc = counts;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        lc[static_cast<std::size_t>(vals[i].second)] += 1.0;
        rc[static_cast<std::size_t>(vals[i].second)] -= 1.0;
        if (!(vals[i].first < vals[i + 1].first)) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;
        const double gain = parent - weighted_gini(nl, lc) - weighted_gini(nr, rc);
        if (gain > best.gain + eps) {
          double thr = 0.5 * (vals[i].first + vals[i + 1].first);
          if (!(thr < vals[i + 1].first)) thr = vals[i].first;
          best = {f, thr, gain};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<int>& y_;
  int n_classes_;
  const ForestConfig& cfg_;
  int mtry_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

ForestModel fit_forest(const Matrix& x, const std::vector<int>& labels, int n_classes,
                       const ForestConfig& cfg) {
  const Index n = x.rows();
  if (n < 2) throw InvalidArgument("forest needs at least 2 training samples");
  if (static_cast<Index>(labels.size()) != n) throw DimensionMismatch("labels length != rows");
  if (cfg.n_trees < 1) throw InvalidArgument("n_trees must be >= 1");
  if (cfg.min_leaf < 1) throw InvalidArgument("min_leaf must be >= 1");
  if (!x.allFinite()) throw InvalidArgument("training data contains non-finite values");
  std::vector<int> seen(static_cast<std::size_t>(std::max(n_classes, 1)), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_classes) throw InvalidArgument("label out of range");
    seen[static_cast<std::size_t>(l)] = 1;
  }
  if (std::accumulate(seen.begin(), seen.end(), 0) < 2)
    throw InvalidArgument("training data contains a single class");

  const int k = static_cast<int>(x.cols());
  const int mtry = cfg.max_features > 0
                       ? std::min(cfg.max_features, k)
                       : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));

  ForestModel model;
  model.n_features_ = x.cols();
  model.n_classes_ = n_classes;
  model.seed_ = cfg.seed;
  model.trees_.resize(static_cast<std::size_t>(cfg.n_trees));
  model.bootstrap_.resize(static_cast<std::size_t>(cfg.n_trees));

  parallel::parallel_for(static_cast<std::size_t>(cfg.n_trees), [&](std::size_t t) {
    const std::uint64_t tree_seed = splitmix64(cfg.seed ^ splitmix64(t + 1));
    std::vector<Index> rows(static_cast<std::size_t>(n));
    if (cfg.bootstrap) {
      std::mt19937_64 rng(tree_seed);
      std::uniform_int_distribution<Index> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), Index{0});
    }
    model.bootstrap_[t] = rows;
    TreeBuilder builder(x, labels, n_classes, cfg, mtry);
    model.trees_[t] = builder.build(std::move(rows), splitmix64(tree_seed ^ 0x5EED5EEDULL));
  });
  return model;
}

nlohmann::json to_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : m.trees()) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
      nlohmann::json jn = {{"n_train", node.n_train}};
      if (node.is_leaf()) {
        jn["value"] = node.class_probs;
      } else {
        jn["feature"] = node.feature;
        jn["threshold"] = node.threshold;
        jn["left"] = node.left;
        jn["right"] = node.right;
      }
      nodes.push_back(std::move(jn));
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"type", "forest"},
          {"n_features", m.n_features()},
          {"n_classes", m.n_classes()},
          {"seed", m.seed()},
          {"trees", std::move(trees)},
          {"bootstrap", m.bootstrap_indices()}};
}

ForestModel forest_from_json(const nlohmann::json& j) {
  ForestModel m;
  m.n_features_ = j.at("n_features").get<Index>();
  m.n_classes_ = j.at("n_classes").get<int>();
  m.seed_ = j.value("seed", std::uint64_t{0});
  for (const auto& jt : j.at("trees")) {
    Tree tree;
    for (const auto& jn : jt.at("nodes")) {
      TreeNode node;
      node.n_train = jn.at("n_train").get<double>();
      if (jn.contains("value")) {
        node.class_probs = jn["value"].get<std::vector<double>>();
      } else {
        node.feature = jn.at("feature").get<int>();
        node.threshold = jn.at("threshold").get<double>();
        node.left = jn.at("left").get<int>();
        node.right = jn.at("right").get<int>();
      }
      tree.nodes.push_back(std::move(node));
    }
    m.trees_.push_back(std::move(tree));
  }
  if (j.contains("bootstrap")) m.bootstrap_ = j["bootstrap"].get<std::vector<std::vector<Index>>>();
  m.validate();
  return m;
}

}  // namespace shapca::models
