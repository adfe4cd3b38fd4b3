#include "shapca/shap.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace shapca::shap {

AttributionTensor::AttributionTensor(Index n_samples, Index n_features, Index n_classes)
    : n_(n_samples),
      k_(n_features),
      c_(n_classes),
      phi_(static_cast<std::size_t>(n_samples * n_features * n_classes), 0.0),
      phi0_(Vector::Zero(n_classes)) {}

Matrix AttributionTensor::class_slice(Index c) const {
  Matrix out(n_, k_);
  for (Index i = 0; i < n_; ++i)
    for (Index k = 0; k < k_; ++k) out(i, k) = (*this)(i, k, c);
  return out;
}

Matrix AttributionTensor::sample_block(Index i) const {
  Matrix out(k_, c_);
  for (Index k = 0; k < k_; ++k)
    for (Index c = 0; c < c_; ++c) out(k, c) = (*this)(i, k, c);
  return out;
}

void AttributionTensor::set_sample_block(Index i, const Matrix& block) {
  for (Index k = 0; k < k_; ++k)
    for (Index c = 0; c < c_; ++c) (*this)(i, k, c) = block(k, c);
}

Matrix AttributionTensor::reconstructed_output() const {
  Matrix out(n_, c_);
  for (Index i = 0; i < n_; ++i)
    for (Index c = 0; c < c_; ++c) {
      double s = phi0_(c);
      for (Index k = 0; k < k_; ++k) s += (*this)(i, k, c);
      out(i, c) = s;
    }
  return out;
}

nlohmann::json to_json(const AttributionTensor& t) {
  nlohmann::json phi = nlohmann::json::array();
  for (Index i = 0; i < t.n_samples(); ++i)
    for (Index k = 0; k < t.n_features(); ++k)
      for (Index c = 0; c < t.n_classes(); ++c) phi.push_back({i, k, c, t(i, k, c)});
  return {{"shape", {t.n_samples(), t.n_features(), t.n_classes()}},
          {"phi0", std::vector<double>(t.phi0().data(), t.phi0().data() + t.phi0().size())},
          {"phi", std::move(phi)}};
}

AttributionTensor attribution_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<Index>>();
  if (shape.size() != 3) throw InvalidArgument("attribution shape must have 3 entries");
  AttributionTensor t(shape[0], shape[1], shape[2]);
  const auto phi0 = j.at("phi0").get<std::vector<double>>();
  if (static_cast<Index>(phi0.size()) != shape[2]) throw DimensionMismatch("phi0 length != classes");
  for (std::size_t c = 0; c < phi0.size(); ++c) t.phi0()(static_cast<Index>(c)) = phi0[c];
  for (const auto& e : j.at("phi")) {
    const auto i = e.at(0).get<Index>(), k = e.at(1).get<Index>(), c = e.at(2).get<Index>();
    if (i < 0 || i >= shape[0] || k < 0 || k >= shape[1] || c < 0 || c >= shape[2])
      throw InvalidArgument("attribution index out of range");
    t(i, k, c) = e.at(3).get<double>();
  }
  return t;
}

std::string to_csv(const AttributionTensor& t) {
  std::ostringstream out;
  out << std::setprecision(17) << "sample,component,class,value\n";
  for (Index c = 0; c < t.n_classes(); ++c) out << "-1,-1," << c << ',' << t.phi0()(c) << '\n';
  for (Index i = 0; i < t.n_samples(); ++i)
    for (Index k = 0; k < t.n_features(); ++k)
      for (Index c = 0; c < t.n_classes(); ++c) out << i << ',' << k << ',' << c << ',' << t(i, k, c) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Background

BackgroundSet BackgroundSet::from_rows(Matrix rows) {
  if (rows.rows() == 0) throw InvalidArgument("background set is empty");
  BackgroundSet b;
  b.weights = Vector::Constant(rows.rows(), 1.0 / static_cast<double>(rows.rows()));
  b.rows = std::move(rows);
  b.selection = Selection::kTrainingSet;
  return b;
}

BackgroundSet BackgroundSet::kmeans_summary(const Matrix& rows, Index m, std::uint64_t seed) {
  const Index n = rows.rows();
  if (n == 0) throw InvalidArgument("background set is empty");
  if (m < 1) throw InvalidArgument("k-means summary needs at least one centroid");
  if (m >= n) return from_rows(rows);

  std::mt19937_64 rng(seed);
  Matrix centres(m, rows.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  centres.row(0) = rows.row(first(rng));
  Vector d2 = (rows.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < m; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2(pick);
        if (r <= 0) break;
      }
    } else {
      pick = first(rng);
    }
    centres.row(c) = rows.row(pick);
    d2 = d2.cwiseMin((rows.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }

  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < 300; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      (centres.rowwise() - rows.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(m, rows.cols());
    Vector counts = Vector::Zero(m);
    for (Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += rows.row(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Index c = 0; c < m; ++c)
      if (counts(c) > 0) centres.row(c) = sums.row(c) / counts(c);
  }

  Vector counts = Vector::Zero(m);
  for (Index a : assign) counts(a) += 1.0;
  std::vector<Index> live;
  for (Index c = 0; c < m; ++c)
    if (counts(c) > 0) live.push_back(c);
  BackgroundSet b;
  b.rows.resize(static_cast<Index>(live.size()), rows.cols());
  b.weights.resize(static_cast<Index>(live.size()));
  for (std::size_t r = 0; r < live.size(); ++r) {
    b.rows.row(static_cast<Index>(r)) = centres.row(live[r]);
    b.weights(static_cast<Index>(r)) = counts(live[r]) / static_cast<double>(n);
  }
  b.selection = Selection::kKMeansSummary;
  return b;
}

BackgroundSet BackgroundSet::default_for(const Matrix& rows, std::uint64_t seed) {
  if (rows.rows() <= 200) return from_rows(rows);
  return kmeans_summary(rows, 100, seed);
}

// ---------------------------------------------------------------------------
// TreeSHAP

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 1.0;
  double one_fraction = 1.0;
  double weight = 0.0;
};

void extend_path(std::vector<PathElement>& path, int depth, double zero_fraction,
                 double one_fraction, int feature) {
  auto& e = path[static_cast<std::size_t>(depth)];
  e.feature = feature;
  e.zero_fraction = zero_fraction;
  e.one_fraction = one_fraction;
  e.weight = depth == 0 ? 1.0 : 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    path[ui + 1].weight += one_fraction * path[ui].weight * (i + 1) / static_cast<double>(depth + 1);
    path[ui].weight = zero_fraction * path[ui].weight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void unwind_path(std::vector<PathElement>& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next = path[static_cast<std::size_t>(depth)].weight;
  for (int i = depth - 1; i >= 0; --i) {
    auto& e = path[static_cast<std::size_t>(i)];
    if (one != 0.0) {
      const double tmp = e.weight;
      e.weight = next * (depth + 1) / ((i + 1) * one);
      next = tmp - e.weight * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      e.weight = e.weight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    auto& e = path[static_cast<std::size_t>(i)];
    const auto& nx = path[static_cast<std::size_t>(i + 1)];
    e.feature = nx.feature;
    e.zero_fraction = nx.zero_fraction;
    e.one_fraction = nx.one_fraction;
  }
}

// Sum of the path weights if feature `index` were removed from the path.
double unwound_path_sum(const std::vector<PathElement>& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next = path[static_cast<std::size_t>(depth)].weight;
  double total = 0.0;
  if (one != 0.0) {
    for (int i = depth - 1; i >= 0; --i) {
      const double tmp = next / ((i + 1) * one);
      total += tmp;
      next = path[static_cast<std::size_t>(i)].weight - tmp * zero * (depth - i);
    }
  } else {
    for (int i = depth - 1; i >= 0; --i)
      total += path[static_cast<std::size_t>(i)].weight / (zero * (depth - i));
  }
  return total * (depth + 1);
}

class TreeExplainer {
 public:
  TreeExplainer(const models::Tree& tree, const double* x, double scale, Matrix& phi)
      : tree_(tree), x_(x), scale_(scale), phi_(phi) {}

  void run() { recurse(0, 0, {}, 1.0, 1.0, -1); }

 private:
  void recurse(int node_id, int depth, std::vector<PathElement> path, double zero_fraction,
               double one_fraction, int feature) {
    path.resize(static_cast<std::size_t>(depth + 1));
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const auto& node = tree_.nodes[static_cast<std::size_t>(node_id)];

    if (node.is_leaf()) {
      for (int i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const auto& e = path[static_cast<std::size_t>(i)];
        const double s = w * (e.one_fraction - e.zero_fraction) * scale_;
        for (std::size_t c = 0; c < node.class_probs.size(); ++c)
          phi_(e.feature, static_cast<Index>(c)) += s * node.class_probs[c];
      }
      return;
    }

    const int hot = x_[node.feature] <= node.threshold ? node.left : node.right;
    const int cold = hot == node.left ? node.right : node.left;
    const double cover = node.n_train;
    const double hot_zero = tree_.nodes[static_cast<std::size_t>(hot)].n_train / cover;
    const double cold_zero = tree_.nodes[static_cast<std::size_t>(cold)].n_train / cover;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    int index = 0;
    for (; index <= depth; ++index)
      if (path[static_cast<std::size_t>(index)].feature == node.feature) break;
    if (index != depth + 1) {
      incoming_zero = path[static_cast<std::size_t>(index)].zero_fraction;
      incoming_one = path[static_cast<std::size_t>(index)].one_fraction;
      unwind_path(path, depth, index);
      --depth;
    }
    recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, node.feature);
    recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, node.feature);
  }

  const models::Tree& tree_;
  const double* x_;
  double scale_;
  Matrix& phi_;
};

void check_covers(const models::ForestModel& model) {
  for (std::size_t t = 0; t < model.trees().size(); ++t)
    for (std::size_t n = 0; n < model.trees()[t].nodes.size(); ++n)
      if (!(model.trees()[t].nodes[n].n_train > 0))
        throw InvalidArgument("tree " + std::to_string(t) + " node " + std::to_string(n) +
                              " has zero cover; model is corrupt");
}

}  // namespace

Vector tree_expected_value(const models::ForestModel& model) {
  check_covers(model);
  Vector out = Vector::Zero(model.n_classes());
  for (const auto& tree : model.trees()) {
    const double root = tree.nodes[0].n_train;
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) continue;
      for (Index c = 0; c < out.size(); ++c)
        out(c) += node.n_train / root * node.class_probs[static_cast<std::size_t>(c)];
    }
  }
  return out / static_cast<double>(model.trees().size());
}

AttributionTensor tree_shap(const models::ForestModel& model, const Matrix& x) {
  if (x.cols() != model.n_features())
    throw DimensionMismatch("tree_shap: input has " + std::to_string(x.cols()) +
                            " features, model expects " + std::to_string(model.n_features()));
  check_covers(model);
  AttributionTensor out(x.rows(), model.n_features(), model.n_classes());
  out.phi0() = tree_expected_value(model);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = x;
  const double scale = 1.0 / static_cast<double>(model.trees().size());
  parallel::parallel_for(static_cast<std::size_t>(x.rows()), [&](std::size_t r) {
    const auto i = static_cast<Index>(r);
    Matrix phi = Matrix::Zero(model.n_features(), model.n_classes());
    for (const auto& tree : model.trees()) TreeExplainer(tree, rows.row(i).data(), scale, phi).run();
    out.set_sample_block(i, phi);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Interventional value function

Matrix coalition_values(const models::ProbaFunction& model, const Vector& x,
                        const BackgroundSet& background, const Matrix& masks) {
  const Index k = x.size();
  const Index b = background.rows.rows();
  if (b == 0) throw InvalidArgument("background set is empty");
  if (background.rows.cols() != k || masks.cols() != k)
    throw DimensionMismatch("coalition_values: feature count mismatch");
  const Index per_chunk = std::max<Index>(1, 65536 / b);
  Matrix out;
  for (Index start = 0; start < masks.rows(); start += per_chunk) {
    const Index m = std::min(per_chunk, masks.rows() - start);
    Matrix batch(m * b, k);
    for (Index s = 0; s < m; ++s) {
      for (Index r = 0; r < b; ++r) {
        auto row = batch.row(s * b + r);
        row = background.rows.row(r);
        for (Index j = 0; j < k; ++j)
          if (masks(start + s, j) != 0.0) row(j) = x(j);
      }
    }
    const Matrix proba = model(batch);
    if (out.size() == 0) out = Matrix::Zero(masks.rows(), proba.cols());
    for (Index s = 0; s < m; ++s)
      out.row(start + s) = background.weights.transpose() * proba.middleRows(s * b, b);
  }
  return out;
}

BruteForceResult brute_force_shap(const models::ProbaFunction& model, const Vector& x,
                                  const BackgroundSet& background) {
  const Index k = x.size();
  if (k < 1) throw InvalidArgument("brute_force_shap needs at least one feature");
  if (k > 20) throw InvalidArgument("brute_force_shap is limited to 20 features, got " + std::to_string(k));
  const Index total = Index{1} << k;
  Matrix masks(total, k);
  for (Index s = 0; s < total; ++s)
    for (Index j = 0; j < k; ++j) masks(s, j) = (s >> j) & 1 ? 1.0 : 0.0;
  const Matrix v = coalition_values(model, x, background, masks);

  // weight(|S|) = |S|! (K - |S| - 1)! / K!
  std::vector<double> weight(static_cast<std::size_t>(k));
  for (Index s = 0; s < k; ++s) {
    double w = 1.0 / static_cast<double>(k);
    for (Index t = 1; t <= s; ++t) w *= static_cast<double>(t) / static_cast<double>(k - t);
    weight[static_cast<std::size_t>(s)] = w;
  }

  BruteForceResult res;
  res.phi = Matrix::Zero(k, v.cols());
  for (Index s = 0; s < total; ++s) {
    const auto size = static_cast<std::size_t>(__builtin_popcountll(static_cast<unsigned long long>(s)));
    for (Index j = 0; j < k; ++j) {
      if ((s >> j) & 1) continue;
      res.phi.row(j) += weight[size] * (v.row(s | (Index{1} << j)) - v.row(s));
    }
  }
  res.phi0 = v.row(0).transpose();
  res.fx = v.row(total - 1).transpose();
  return res;
}

// ---------------------------------------------------------------------------
// KernelSHAP

namespace {

double binomial(Index n, Index r) {
  double out = 1.0;
  for (Index t = 1; t <= r; ++t) out = out * static_cast<double>(n - r + t) / static_cast<double>(t);
  return out;
}

struct CoalitionSet {
  std::vector<std::vector<char>> masks;
  std::vector<double> weights;
  std::map<std::vector<char>, std::size_t> index;

  void add(std::vector<char> mask, double w) {
    auto it = index.find(mask);
    if (it != index.end()) {
      weights[it->second] += w;
      return;
    }
    index.emplace(mask, masks.size());
    masks.push_back(std::move(mask));
    weights.push_back(w);
  }
};

// Calls fn(mask) for every subset of {0..k-1} with exactly `size` members.
template <typename Fn>
void for_each_subset(Index k, Index size, Fn&& fn) {
  std::vector<Index> pick(static_cast<std::size_t>(size));
  std::iota(pick.begin(), pick.end(), Index{0});
  for (;;) {
    std::vector<char> mask(static_cast<std::size_t>(k), 0);
    for (Index p : pick) mask[static_cast<std::size_t>(p)] = 1;
    fn(std::move(mask));
    Index i = size - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == k - size + i) --i;
    if (i < 0) return;
    ++pick[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < size; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
}

CoalitionSet exhaustive_coalitions(Index k) {
  CoalitionSet set;
  for (Index s = 1; s < k; ++s) {
    const double w = static_cast<double>(k - 1) / (binomial(k, s) * static_cast<double>(s * (k - s)));
    for_each_subset(k, s, [&](std::vector<char> m) { set.add(std::move(m), w); });
  }
  return set;
}

// Fully enumerates the subset sizes the budget can afford (smallest and
// largest first, paired with complements), then samples the remaining sizes
// in complement pairs in proportion to their kernel mass.
CoalitionSet sampled_coalitions(Index k, Index budget, std::mt19937_64& rng) {
  CoalitionSet set;
  const Index n_sizes = (k - 1 + 1) / 2;       // ceil((k-1)/2)
  const Index n_paired = (k - 1) / 2;          // floor((k-1)/2)
  std::vector<double> size_weight(static_cast<std::size_t>(n_sizes));
  for (Index s = 1; s <= n_sizes; ++s) {
    double w = static_cast<double>(k - 1) / static_cast<double>(s * (k - s));
    if (s <= n_paired) w *= 2.0;
    size_weight[static_cast<std::size_t>(s - 1)] = w;
  }
  const double norm = std::accumulate(size_weight.begin(), size_weight.end(), 0.0);
  for (auto& w : size_weight) w /= norm;

  Index full = 0;
  double left = static_cast<double>(budget);
  std::vector<double> remaining = size_weight;
  for (Index s = 1; s <= n_sizes; ++s) {
    double n_subsets = binomial(k, s);
    if (s <= n_paired) n_subsets *= 2.0;
    if (!(left * remaining[static_cast<std::size_t>(s - 1)] / n_subsets >= 1.0 - 1e-8)) break;
    ++full;
    left -= n_subsets;
    if (remaining[static_cast<std::size_t>(s - 1)] < 1.0) {
      const double r = remaining[static_cast<std::size_t>(s - 1)];
      for (auto& w : remaining) w /= (1.0 - r);
    }
    double w = size_weight[static_cast<std::size_t>(s - 1)] / binomial(k, s);
    if (s <= n_paired) w /= 2.0;
    for_each_subset(k, s, [&](std::vector<char> m) {
      if (s <= n_paired) {
        std::vector<char> comp(m.size());
        for (std::size_t j = 0; j < m.size(); ++j) comp[j] = static_cast<char>(1 - m[j]);
        set.add(std::move(comp), w);
      }
      set.add(std::move(m), w);
    });
  }
  const std::size_t n_fixed = set.masks.size();

  if (full != n_sizes) {
    std::vector<double> rest(size_weight.begin() + full, size_weight.end());
    for (Index s = full + 1; s <= n_paired; ++s) rest[static_cast<std::size_t>(s - full - 1)] /= 2.0;
    std::discrete_distribution<Index> pick_size(rest.begin(), rest.end());
    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    auto samples_left = static_cast<long long>(std::max(0.0, std::floor(left)));
    long long attempts = 0;
    const long long max_attempts = 4 * samples_left + 100;
    while (samples_left > 0 && attempts++ < max_attempts) {
      const Index s = pick_size(rng) + full + 1;
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<char> mask(static_cast<std::size_t>(k), 0);
      for (Index j = 0; j < s; ++j) mask[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = 1;
      const bool fresh = !set.index.count(mask);
      std::vector<char> comp(mask.size());
      for (std::size_t j = 0; j < mask.size(); ++j) comp[j] = static_cast<char>(1 - mask[j]);
      set.add(std::move(mask), 1.0);
      if (fresh) --samples_left;
      if (samples_left > 0 && s <= n_paired) {
        const bool fresh_comp = !set.index.count(comp);
        set.add(std::move(comp), 1.0);
        if (fresh_comp) --samples_left;
      }
    }
    // Spread the kernel mass of the sampled sizes over the sampled draws.
    const double mass = std::accumulate(size_weight.begin() + full, size_weight.end(), 0.0);
    double drawn = 0.0;
    for (std::size_t i = n_fixed; i < set.weights.size(); ++i) drawn += set.weights[i];
    if (drawn > 0)
      for (std::size_t i = n_fixed; i < set.weights.size(); ++i) set.weights[i] *= mass / drawn;
  }
  return set;
}

}  // namespace

AttributionTensor kernel_shap(const models::ProbaFunction& model, const Matrix& x,
                              const BackgroundSet& background, const KernelOptions& options) {
  const Index k = x.cols();
  if (background.rows.rows() == 0) throw InvalidArgument("background set is empty");
  if (background.rows.cols() != k) throw DimensionMismatch("background feature count != input feature count");
  if (k < 1) throw InvalidArgument("kernel_shap needs at least one feature");
  if (options.exhaustive && k > 25)
    throw InvalidArgument("exhaustive kernel_shap is limited to 25 features, got " + std::to_string(k));

  const Matrix bg_proba = model(background.rows);
  const Vector phi0 = bg_proba.transpose() * background.weights;
  const Index n_classes = bg_proba.cols();
  const Matrix fx_all = model(x);

  AttributionTensor out(x.rows(), k, n_classes);
  out.phi0() = phi0;
  if (k == 1) {
    for (Index i = 0; i < x.rows(); ++i)
      for (Index c = 0; c < n_classes; ++c) out(i, 0, c) = fx_all(i, c) - phi0(c);
    return out;
  }

  const Index budget = options.n_coalitions.value_or(2 * k + 2048);
  const bool exhaustive =
      options.exhaustive || (k <= 30 && static_cast<double>(budget) >= std::ldexp(1.0, static_cast<int>(k)) - 2.0);
  if (!exhaustive && budget < 1) throw InvalidArgument("coalition budget must be positive");

  parallel::parallel_for(static_cast<std::size_t>(x.rows()), [&](std::size_t r) {
    const auto i = static_cast<Index>(r);
    std::mt19937_64 rng(derive_seed(options.seed, "kernel_shap/" + std::to_string(i)));
    const CoalitionSet set = exhaustive ? exhaustive_coalitions(k) : sampled_coalitions(k, budget, rng);
    const auto n_coal = static_cast<Index>(set.masks.size());
    if (n_coal < k)
      throw InvalidArgument("kernel_shap: degenerate regression, " + std::to_string(n_coal) +
                            " distinct coalitions for " + std::to_string(k) + " features");

    Matrix z(n_coal, k);
    Vector w(n_coal);
    for (Index s = 0; s < n_coal; ++s) {
      for (Index j = 0; j < k; ++j) z(s, j) = set.masks[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
      w(s) = set.weights[static_cast<std::size_t>(s)];
    }
    const Vector xi = x.row(i).transpose();
    const Matrix v = coalition_values(model, xi, background, z);
    const RowVector delta = fx_all.row(i) - phi0.transpose();

    // Eliminate the last feature through the efficiency constraint.
    const Matrix a = z.leftCols(k - 1).colwise() - z.col(k - 1);
    Matrix rhs = v.rowwise() - phi0.transpose();
    rhs -= z.col(k - 1) * delta;
    const Vector sw = w.cwiseSqrt();
    const Matrix wa = sw.asDiagonal() * a;
    const Matrix wb = sw.asDiagonal() * rhs;
    Eigen::ColPivHouseholderQR<Matrix> qr(wa);
    if (qr.rank() < k - 1)
      throw InvalidArgument("kernel_shap: degenerate regression (coalition design has rank " +
                            std::to_string(qr.rank()) + " < " + std::to_string(k - 1) + ")");
    const Matrix head = qr.solve(wb);  // (K-1) x C
    Matrix phi(k, n_classes);
    phi.topRows(k - 1) = head;
    phi.row(k - 1) = delta - head.colwise().sum();
    out.set_sample_block(i, phi);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch

nlohmann::json to_json(const ExplainerOptions& o) {
  static const char* kinds[] = {"auto", "tree", "kernel"};
  static const char* bgs[] = {"auto", "training_set", "kmeans"};
  nlohmann::json j = {{"kind", kinds[static_cast<int>(o.kind)]},
                      {"exhaustive", o.kernel.exhaustive},
                      {"background", bgs[static_cast<int>(o.background)]},
                      {"kmeans_centroids", o.kmeans_centroids}};
  j["n_coalitions"] = o.kernel.n_coalitions ? nlohmann::json(*o.kernel.n_coalitions) : nlohmann::json(nullptr);
  return j;
}

ExplainerOptions explainer_options_from_json(const nlohmann::json& j) {
  ExplainerOptions o;
  const auto kind = j.value("kind", std::string("auto"));
  if (kind == "auto") o.kind = ExplainerKind::kAuto;
  else if (kind == "tree") o.kind = ExplainerKind::kTree;
  else if (kind == "kernel") o.kind = ExplainerKind::kKernel;
  else throw InvalidArgument("explainer kind must be auto, tree or kernel");
  o.kernel.exhaustive = j.value("exhaustive", false);
  if (j.contains("n_coalitions") && !j["n_coalitions"].is_null()) {
    o.kernel.n_coalitions = j["n_coalitions"].get<Index>();
    if (*o.kernel.n_coalitions < 1) throw InvalidArgument("n_coalitions must be positive");
  }
  const auto bg = j.value("background", std::string("auto"));
  if (bg == "auto") o.background = BackgroundChoice::kAuto;
  else if (bg == "training_set") o.background = BackgroundChoice::kTrainingSet;
  else if (bg == "kmeans") o.background = BackgroundChoice::kKMeans;
  else throw InvalidArgument("background must be auto, training_set or kmeans");
  o.kmeans_centroids = j.value("kmeans_centroids", o.kmeans_centroids);
  if (o.kmeans_centroids < 1) throw InvalidArgument("kmeans_centroids must be positive");
  return o;
}

BackgroundSet make_background(const Matrix& train_rows, const ExplainerOptions& options) {
  switch (options.background) {
    case BackgroundChoice::kTrainingSet:
      return BackgroundSet::from_rows(train_rows);
    case BackgroundChoice::kKMeans:
      return BackgroundSet::kmeans_summary(train_rows, options.kmeans_centroids, options.background_seed);
    case BackgroundChoice::kAuto:
      break;
  }
  return BackgroundSet::default_for(train_rows, options.background_seed);
}

AttributionTensor explain(const models::AnyClassifier& model, const Matrix& x,
                          const Matrix& train_rows, const ExplainerOptions& options) {
  const auto* forest = std::get_if<models::ForestModel>(&model);
  if (options.kind == ExplainerKind::kTree) {
    if (!forest) throw InvalidArgument("the tree explainer needs a forest classifier");
    return tree_shap(*forest, x);
  }
  if (options.kind == ExplainerKind::kAuto && forest) return tree_shap(*forest, x);
  return kernel_shap(models::as_function(model), x, make_background(train_rows, options), options.kernel);
}

}  // namespace shapca::shap
