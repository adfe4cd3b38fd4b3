#include "shapca/sparse_pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace shapca::spca {

nlohmann::json to_json(const SparsePcaConfig& cfg) {
  return {{"n_components", cfg.n_components},
          {"alpha", cfg.alpha},
          {"max_iter", cfg.max_iter},
          {"tol", cfg.tol},
          {"seed", cfg.seed}};
}

SparsePcaConfig sparse_pca_config_from_json(const nlohmann::json& j) {
  SparsePcaConfig cfg;
  cfg.n_components = j.value("n_components", cfg.n_components);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.max_iter = j.value("max_iter", cfg.max_iter);
  cfg.tol = j.value("tol", cfg.tol);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

namespace {

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

double soft(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

nlohmann::json to_json(const SparsePcaModel& m) {
  std::vector<std::vector<double>> rows;
  for (Index k = 0; k < m.loadings.rows(); ++k) rows.push_back(to_vec(m.loadings.row(k).transpose()));
  return {{"loadings", rows},
          {"feature_means", to_vec(m.feature_means)},
          {"explained_variance", to_vec(m.explained_variance)},
          {"sparsity_fraction", m.sparsity_fraction},
          {"config", to_json(m.config)},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"degenerate_components", m.degenerate_components}};
}

SparsePcaModel sparse_pca_model_from_json(const nlohmann::json& j) {
  SparsePcaModel m;
  const auto rows = j.at("loadings").get<std::vector<std::vector<double>>>();
  m.feature_means = from_vec(j.at("feature_means").get<std::vector<double>>());
  m.loadings.resize(static_cast<Index>(rows.size()), m.feature_means.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (static_cast<Index>(rows[k].size()) != m.feature_means.size())
      throw DimensionMismatch("loading row length != feature count");
    m.loadings.row(static_cast<Index>(k)) = from_vec(rows[k]).transpose();
  }
  m.explained_variance = from_vec(j.at("explained_variance").get<std::vector<double>>());
  m.sparsity_fraction = j.at("sparsity_fraction").get<double>();
  m.config = sparse_pca_config_from_json(j.value("config", nlohmann::json::object()));
  m.converged = j.value("converged", false);
  m.iterations = j.value("iterations", 0);
  m.degenerate_components = j.value("degenerate_components", std::vector<int>{});
  return m;
}

double objective(const Matrix& centered, const Matrix& codes, const Matrix& loadings, double alpha) {
  return 0.5 * (centered - codes * loadings).squaredNorm() + alpha * loadings.cwiseAbs().sum();
}

namespace {

struct Factorization {
  const Matrix& xc;
  Matrix u;  // N x K, unit-norm columns
  Matrix w;  // K x P
  Matrix r;  // residual xc - u w
  double alpha;

  void update_loading_row(Index k) {
    const RowVector g = u.col(k).transpose() * r + w.row(k);
    RowVector fresh(g.size());
    for (Index j = 0; j < g.size(); ++j) fresh(j) = soft(g(j), alpha);
    r.noalias() -= u.col(k) * (fresh - w.row(k));
    w.row(k) = fresh;
  }

  void update_code_column(Index k) {
    if (w.row(k).isZero(0.0)) return;
    const Matrix rk = r + u.col(k) * w.row(k);
    const Vector v = rk * w.row(k).transpose();
    const double norm = v.norm();
    if (!(norm > 0)) return;
    u.col(k) = v / norm;
    r = rk - u.col(k) * w.row(k);
  }

  double value() const { return 0.5 * r.squaredNorm() + alpha * w.cwiseAbs().sum(); }

  // Runs sweeps until the relative decrease drops below tol. Appends to trace.
  bool run(int max_iter, double tol, std::vector<double>& trace, int& iterations) {
    double prev = value();
    for (int it = 0; it < max_iter; ++it) {
      for (Index k = 0; k < w.rows(); ++k) update_loading_row(k);
      for (Index k = 0; k < w.rows(); ++k) update_code_column(k);
      // Recompute occasionally to stop drift in the running residual.
      if ((it + 1) % 50 == 0) r = xc - u * w;
      const double cur = value();
      trace.push_back(cur);
      ++iterations;
      if (prev - cur <= tol * std::max(prev, 1e-300)) return true;
      prev = cur;
    }
    return false;
  }
};

}  // namespace

SparsePcaModel fit(const Matrix& x, const SparsePcaConfig& cfg) {
  const Index n = x.rows();
  const Index p = x.cols();
  const Index k_comp = cfg.n_components;
  if (n < 2) throw InvalidArgument("sparse PCA needs at least 2 samples");
  if (k_comp < 1) throw InvalidArgument("n_components must be >= 1");
  if (k_comp > std::min(n, p))
    throw InvalidArgument("n_components=" + std::to_string(k_comp) + " exceeds min(N, P)=" +
                          std::to_string(std::min(n, p)));
  if (!(cfg.alpha >= 0)) throw InvalidArgument("alpha must be non-negative");
  if (!(cfg.tol > 0)) throw InvalidArgument("tol must be positive");
  if (!x.allFinite()) throw InvalidArgument("input contains non-finite values");

  SparsePcaModel model;
  model.config = cfg;
  model.feature_means = x.colwise().mean().transpose();
  const Matrix xc = x.rowwise() - model.feature_means.transpose();

  Eigen::BDCSVD<Matrix> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Factorization f{xc, svd.matrixU().leftCols(k_comp),
                  svd.singularValues().head(k_comp).asDiagonal() *
                      svd.matrixV().leftCols(k_comp).transpose(),
                  Matrix(), cfg.alpha};
  f.r = xc - f.u * f.w;

  model.objective_trace.push_back(f.value());
  model.converged = f.run(cfg.max_iter, cfg.tol, model.objective_trace, model.iterations);

  // Re-seed all-zero rows once from the dominant residual direction.
  std::vector<Index> dead;
  for (Index k = 0; k < k_comp; ++k)
    if (f.w.row(k).isZero(0.0)) dead.push_back(k);
  if (!dead.empty()) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss;
    for (Index k : dead) {
      Eigen::BDCSVD<Matrix> rs(f.r, Eigen::ComputeThinU);
      Vector dir = rs.singularValues().size() > 0 && rs.singularValues()(0) > 0
                       ? Vector(rs.matrixU().col(0))
                       : Vector();
      if (dir.size() == 0) {
        dir.resize(n);
        for (Index i = 0; i < n; ++i) dir(i) = gauss(rng);
        dir.normalize();
      }
      f.u.col(k) = dir;
      f.update_loading_row(k);
    }
    model.objective_trace.push_back(f.value());
    model.converged = f.run(cfg.max_iter, cfg.tol, model.objective_trace, model.iterations);
  }

  // Order by explained variance (|U_k W_k|^2 / (N - 1) = |W_k|^2 / (N - 1)).
  Vector ev(k_comp);
  for (Index k = 0; k < k_comp; ++k) ev(k) = f.w.row(k).squaredNorm() / static_cast<double>(n - 1);
  std::vector<Index> order(static_cast<std::size_t>(k_comp));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return ev(a) > ev(b); });

  model.loadings.resize(k_comp, p);
  model.explained_variance.resize(k_comp);
  for (Index k = 0; k < k_comp; ++k) {
    RowVector row = f.w.row(order[static_cast<std::size_t>(k)]);
    Index arg = 0;
    row.cwiseAbs().maxCoeff(&arg);
    if (row(arg) < 0) row = -row;
    model.loadings.row(k) = row;
    model.explained_variance(k) = ev(order[static_cast<std::size_t>(k)]);
    if (row.isZero(0.0)) model.degenerate_components.push_back(static_cast<int>(k));
  }
  const auto zeros = (model.loadings.array() == 0.0).count();
  model.sparsity_fraction = static_cast<double>(zeros) / static_cast<double>(k_comp * p);
  return model;
}

ComponentValues transform(const SparsePcaModel& model, const Matrix& x) {
  if (x.cols() != model.n_features())
    throw DimensionMismatch("transform: input has " + std::to_string(x.cols()) +
                            " features, model expects " + std::to_string(model.n_features()));
  return (x.rowwise() - model.feature_means.transpose()) * model.loadings.transpose();
}

ComponentScaler ComponentScaler::fit(const ComponentValues& cv) {
  if (cv.rows() < 1) throw InvalidArgument("cannot fit a scaler on zero rows");
  ComponentScaler s;
  s.min = cv.colwise().minCoeff().transpose();
  s.max = cv.colwise().maxCoeff().transpose();
  return s;
}

ComponentValues ComponentScaler::apply(const ComponentValues& cv) const {
  if (cv.cols() != min.size()) throw DimensionMismatch("scaler component count mismatch");
  ComponentValues out(cv.rows(), cv.cols());
  for (Index k = 0; k < cv.cols(); ++k) {
    const double range = max(k) - min(k);
    for (Index i = 0; i < cv.rows(); ++i) {
      if (!(range > 0)) {
        out(i, k) = 0.0;
        continue;
      }
      const double v = 2.0 * (cv(i, k) - min(k)) / range - 1.0;
      out(i, k) = std::clamp(v, -clip, clip);
    }
  }
  return out;
}

nlohmann::json to_json(const ComponentScaler& s) {
  return {{"min", to_vec(s.min)}, {"max", to_vec(s.max)}, {"clip", s.clip}};
}

ComponentScaler component_scaler_from_json(const nlohmann::json& j) {
  ComponentScaler s;
  s.min = from_vec(j.at("min").get<std::vector<double>>());
  s.max = from_vec(j.at("max").get<std::vector<double>>());
  s.clip = j.value("clip", 1.5);
  return s;
}

ComponentValues normalize_components(const ComponentValues& cv) {
  if (cv.rows() < 2) throw InvalidArgument("normalize_components needs at least 2 samples");
  return ComponentScaler::fit(cv).apply(cv);
}

}  // namespace shapca::spca
