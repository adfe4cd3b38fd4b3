// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the library routine it is meant to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shapca/models.hpp"

namespace oracle {

using shapca::Index;
using shapca::Matrix;
using shapca::Vector;

/// Full factorial grid: every combination of the per-feature values.
inline Matrix product_grid(const std::vector<std::vector<double>>& values) {
  Index rows = 1;
  for (const auto& v : values) rows *= static_cast<Index>(v.size());
  Matrix g(rows, static_cast<Index>(values.size()));
  for (Index r = 0; r < rows; ++r) {
    Index rem = r;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const auto n = static_cast<Index>(values[j].size());
      g(r, static_cast<Index>(j)) = values[j][static_cast<std::size_t>(rem % n)];
      rem /= n;
    }
  }
  return g;
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, int c) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(static_cast<std::size_t>(c));
  for (auto& v : p) v = e(rng);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  // Force an exact unit sum so the forest's simplex check holds.
  p.back() = 1.0 - std::accumulate(p.begin(), p.end() - 1, 0.0);
  return p;
}

/// Random tree whose every split separates the grid values still reachable
/// at that node, so each node receives grid rows.
inline void grow_grid_tree(std::mt19937_64& rng, const std::vector<std::vector<double>>& values,
                           std::vector<std::pair<double, double>> box, int depth, int max_depth,
                           int n_classes, std::vector<shapca::models::TreeNode>& nodes) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  std::vector<int> splittable;
  for (std::size_t j = 0; j < values.size(); ++j) {
    int live = 0;
    for (double v : values[j]) live += v > box[j].first && v <= box[j].second;
    if (live >= 2) splittable.push_back(static_cast<int>(j));
  }
  std::bernoulli_distribution stop(0.15);
  if (depth >= max_depth || splittable.empty() || (depth > 0 && stop(rng))) {
    nodes[static_cast<std::size_t>(id)].class_probs = random_simplex(rng, n_classes);
    return;
  }
  const int f = splittable[std::uniform_int_distribution<std::size_t>(0, splittable.size() - 1)(rng)];
  std::vector<double> live;
  for (double v : values[static_cast<std::size_t>(f)])
    if (v > box[static_cast<std::size_t>(f)].first && v <= box[static_cast<std::size_t>(f)].second) live.push_back(v);
  std::sort(live.begin(), live.end());
  const std::size_t cut = std::uniform_int_distribution<std::size_t>(0, live.size() - 2)(rng);
  const double thr = 0.5 * (live[cut] + live[cut + 1]);
  nodes[static_cast<std::size_t>(id)].feature = f;
  nodes[static_cast<std::size_t>(id)].threshold = thr;
  auto left_box = box, right_box = box;
  left_box[static_cast<std::size_t>(f)].second = thr;
  right_box[static_cast<std::size_t>(f)].first = thr;
  nodes[static_cast<std::size_t>(id)].left = static_cast<int>(nodes.size());
  grow_grid_tree(rng, values, left_box, depth + 1, max_depth, n_classes, nodes);
  nodes[static_cast<std::size_t>(id)].right = static_cast<int>(nodes.size());
  grow_grid_tree(rng, values, right_box, depth + 1, max_depth, n_classes, nodes);
}

inline shapca::models::ForestModel random_grid_forest(std::mt19937_64& rng,
                                                      const std::vector<std::vector<double>>& values,
                                                      int n_trees, int max_depth, int n_classes) {
  std::vector<shapca::models::Tree> trees(static_cast<std::size_t>(n_trees));
  const std::vector<std::pair<double, double>> box(values.size(), {-1e300, 1e300});
  for (auto& t : trees) grow_grid_tree(rng, values, box, 0, max_depth, n_classes, t.nodes);
  shapca::models::ForestModel f(std::move(trees), static_cast<Index>(values.size()), n_classes);
  return f.with_covers_from(product_grid(values));
}

/// Cover-weighted conditional expectation of one tree given the features in
/// `known` (a bitmask), the classic recursive definition.
inline void tree_expectation(const shapca::models::Tree& t, int node, const Vector& x, unsigned known,
                             double weight, Vector& acc) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) {
    for (std::size_t c = 0; c < n.class_probs.size(); ++c) acc(static_cast<Index>(c)) += weight * n.class_probs[c];
    return;
  }
  if (known & (1u << n.feature)) {
    tree_expectation(t, x(n.feature) <= n.threshold ? n.left : n.right, x, known, weight, acc);
    return;
  }
  const double l = t.nodes[static_cast<std::size_t>(n.left)].n_train;
  const double r = t.nodes[static_cast<std::size_t>(n.right)].n_train;
  tree_expectation(t, n.left, x, known, weight * l / n.n_train, acc);
  tree_expectation(t, n.right, x, known, weight * r / n.n_train, acc);
}

inline Vector forest_expectation(const shapca::models::ForestModel& m, const Vector& x, unsigned known) {
  Vector acc = Vector::Zero(m.n_classes());
  for (const auto& t : m.trees()) tree_expectation(t, 0, x, known, 1.0, acc);
  return acc / static_cast<double>(m.trees().size());
}

/// Shapley values by averaging marginal contributions over every ordering
/// of the players. value(mask) returns a length-C vector. K <= 8.
inline Matrix permutation_shapley(int k, const std::function<Vector(unsigned)>& value) {
  std::vector<Vector> v(std::size_t{1} << k);
  for (unsigned s = 0; s < (1u << k); ++s) v[s] = value(s);
  const Index c = v[0].size();
  Matrix phi = Matrix::Zero(k, c);
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  double count = 0;
  do {
    unsigned s = 0;
    for (int p : order) {
      phi.row(p) += (v[s | (1u << p)] - v[s]).transpose();
      s |= 1u << p;
    }
    count += 1;
  } while (std::next_permutation(order.begin(), order.end()));
  return phi / count;
}

/// Path-dependent tree Shapley values by brute force over orderings.
inline Matrix path_dependent_shap(const shapca::models::ForestModel& m, const Vector& x) {
  return permutation_shapley(static_cast<int>(m.n_features()),
                             [&](unsigned s) { return forest_expectation(m, x, s); });
}

/// Largest principal angle between the row spaces of a and b (same row count).
inline double principal_angle(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a.transpose()).householderQ() * Matrix::Identity(a.cols(), a.rows());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b.transpose()).householderQ() * Matrix::Identity(b.cols(), b.rows());
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  const double smallest = std::min(1.0, svd.singularValues().minCoeff());
  return std::acos(smallest);
}

/// Minimal XML well-formedness check: balanced, properly nested elements,
/// quoted attributes, a single root, and no stray '<' or '&'.
inline bool well_formed_xml(const std::string& doc, std::string* why = nullptr) {
  auto fail = [&](const std::string& w) {
    if (why) *why = w;
    return false;
  };
  std::vector<std::string> stack;
  int roots = 0;
  std::size_t i = 0;
  while (i < doc.size()) {
    if (doc[i] == '&') {
      const auto semi = doc.find(';', i);
      if (semi == std::string::npos) return fail("unterminated entity");
      const auto ent = doc.substr(i + 1, semi - i - 1);
      if (ent != "amp" && ent != "lt" && ent != "gt" && ent != "quot" && ent != "apos") return fail("unknown entity " + ent);
      i = semi + 1;
      continue;
    }
    if (doc[i] != '<') {
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(doc[i]))) return fail("text outside root");
      ++i;
      continue;
    }
    if (doc.compare(i, 5, "<?xml") == 0) {
      const auto e = doc.find("?>", i);
      if (e == std::string::npos) return fail("unterminated declaration");
      i = e + 2;
      continue;
    }
    const auto e = doc.find('>', i);
    if (e == std::string::npos) return fail("unterminated tag");
    std::string tag = doc.substr(i + 1, e - i - 1);
    i = e + 1;
    if (!tag.empty() && tag[0] == '/') {
      const auto name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return fail("mismatched close " + name);
      stack.pop_back();
      continue;
    }
    const bool self_close = !tag.empty() && tag.back() == '/';
    if (self_close) tag.pop_back();
    const auto sp = tag.find_first_of(" \t\n");
    const std::string name = tag.substr(0, sp);
    if (name.empty()) return fail("empty tag name");
    // Attributes: name="value" pairs.
    std::size_t p = sp == std::string::npos ? tag.size() : sp;
    while (p < tag.size()) {
      while (p < tag.size() && std::isspace(static_cast<unsigned char>(tag[p]))) ++p;
      if (p >= tag.size()) break;
      const auto eq = tag.find('=', p);
      if (eq == std::string::npos || eq + 1 >= tag.size() || tag[eq + 1] != '"') return fail("bad attribute in " + name);
      const auto close = tag.find('"', eq + 2);
      if (close == std::string::npos) return fail("unterminated attribute in " + name);
      if (tag.substr(eq + 2, close - eq - 2).find('<') != std::string::npos) return fail("'<' in attribute");
      p = close + 1;
    }
    if (stack.empty()) ++roots;
    if (!self_close) stack.push_back(name);
  }
  if (!stack.empty()) return fail("unclosed " + stack.back());
  if (roots != 1) return fail("expected one root element");
  return true;
}

}  // namespace oracle
