#include "shapca/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "shapca/backproject.hpp"

namespace shapca::consistency {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

std::optional<double> mean_of(double sum, long count) {
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(std::isnan(m(i, j)) ? nlohmann::json(nullptr) : nlohmann::json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json pair_json(const PairScores& p) {
  return {{"cosine", matrix_json(p.cosine)},
          {"pearson", matrix_json(p.pearson)},
          {"cosine_mean", opt_json(p.cosine_mean)},
          {"pearson_mean", opt_json(p.pearson_mean)},
          {"n_cosine_undefined", p.n_cosine_undefined},
          {"n_pearson_undefined", p.n_pearson_undefined}};
}

// Scores one vector per model against every other model.
PairScores score_pairs(const std::vector<const Vector*>& vectors) {
  const auto f = static_cast<Index>(vectors.size());
  PairScores out;
  out.cosine = Matrix::Constant(f, f, kNaN);
  out.pearson = Matrix::Constant(f, f, kNaN);
  double cs = 0, ps = 0;
  long cn = 0, pn = 0;
  for (Index a = 0; a < f; ++a) {
    for (Index b = a + 1; b < f; ++b) {
      std::optional<double> c, p;
      if (vectors[static_cast<std::size_t>(a)] && vectors[static_cast<std::size_t>(b)]) {
        c = cosine_sim(*vectors[static_cast<std::size_t>(a)], *vectors[static_cast<std::size_t>(b)]);
        p = pearson_corr(*vectors[static_cast<std::size_t>(a)], *vectors[static_cast<std::size_t>(b)]);
      }
      if (c) {
        out.cosine(a, b) = out.cosine(b, a) = *c;
        cs += *c;
        ++cn;
      } else {
        ++out.n_cosine_undefined;
      }
      if (p) {
        out.pearson(a, b) = out.pearson(b, a) = *p;
        ps += *p;
        ++pn;
      } else {
        ++out.n_pearson_undefined;
      }
    }
  }
  out.cosine_mean = mean_of(cs, cn);
  out.pearson_mean = mean_of(ps, pn);
  return out;
}

std::optional<double> mean_defined(const std::vector<PairScores>& scores, bool cosine) {
  double s = 0;
  long n = 0;
  for (const auto& p : scores) {
    const auto& v = cosine ? p.cosine_mean : p.pearson_mean;
    if (v) {
      s += *v;
      ++n;
    }
  }
  return mean_of(s, n);
}

}  // namespace

std::optional<double> cosine_sim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine_sim: vectors differ in length");
  if (!a.allFinite() || !b.allFinite()) return std::nullopt;
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return clamp_unit(a.dot(b) / (na * nb));
}

std::optional<double> pearson_corr(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("pearson_corr: vectors differ in length");
  if (a.size() < 2 || !a.allFinite() || !b.allFinite()) return std::nullopt;
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double na = ca.norm(), nb = cb.norm();
  // A constant vector leaves only rounding residue after centring.
  const double eps = 1e-12;
  if (!(na > eps * a.norm()) || !(nb > eps * b.norm()) || na == 0.0 || nb == 0.0) return std::nullopt;
  return clamp_unit(ca.dot(cb) / (na * nb));
}

std::string method_name(Method m) { return m == Method::kShapca ? "shapca" : "raw_shap"; }

std::optional<double> ConsistencyReport::global_cosine_mean() const { return mean_defined(global, true); }
std::optional<double> ConsistencyReport::global_pearson_mean() const { return mean_defined(global, false); }

ConsistencyReport score_explanations(const std::vector<ModelExplanations>& models,
                                     std::vector<std::string> class_names) {
  if (models.size() < 2) throw InvalidArgument("consistency needs at least two models");
  const std::size_t n_classes = class_names.size();
  const std::size_t n_holdout = models.front().local.size();
  for (const auto& m : models)
    if (m.global.size() != n_classes || m.local.size() != n_holdout || m.predictions.size() != n_holdout)
      throw DimensionMismatch("consistency: models explain different holdout sets or class counts");

  ConsistencyReport r;
  r.n_models = static_cast<int>(models.size());
  r.n_pairs = r.n_models * (r.n_models - 1) / 2;
  r.class_names = std::move(class_names);
  for (const auto& m : models) r.holdout_accuracy.push_back(m.holdout_accuracy);

  r.global.resize(n_classes);
  parallel::parallel_for(n_classes, [&](std::size_t c) {
    std::vector<const Vector*> vs;
    for (const auto& m : models) vs.push_back(m.global[c] ? &*m.global[c] : nullptr);
    r.global[c] = score_pairs(vs);
  });

  // Local: every (sample, pair) where both models predicted the same class.
  const auto f = static_cast<Index>(models.size());
  auto& loc = r.local;
  loc.pairs.cosine = Matrix::Constant(f, f, kNaN);
  loc.pairs.pearson = Matrix::Constant(f, f, kNaN);
  double cs_all = 0, ps_all = 0;
  long cn_all = 0, pn_all = 0;
  for (Index a = 0; a < f; ++a) {
    for (Index b = a + 1; b < f; ++b) {
      const auto& ma = models[static_cast<std::size_t>(a)];
      const auto& mb = models[static_cast<std::size_t>(b)];
      double cs = 0, ps = 0;
      long cn = 0, pn = 0;
      for (std::size_t s = 0; s < n_holdout; ++s) {
        ++loc.n_sample_pairs;
        if (ma.predictions[s] != mb.predictions[s]) {
          ++loc.n_class_mismatch;
          continue;
        }
        if (auto c = cosine_sim(ma.local[s], mb.local[s])) {
          cs += *c;
          ++cn;
        } else {
          ++loc.n_cosine_undefined;
        }
        if (auto p = pearson_corr(ma.local[s], mb.local[s])) {
          ps += *p;
          ++pn;
        } else {
          ++loc.n_pearson_undefined;
        }
      }
      if (cn) loc.pairs.cosine(a, b) = loc.pairs.cosine(b, a) = cs / static_cast<double>(cn);
      else ++loc.pairs.n_cosine_undefined;
      if (pn) loc.pairs.pearson(a, b) = loc.pairs.pearson(b, a) = ps / static_cast<double>(pn);
      else ++loc.pairs.n_pearson_undefined;
      cs_all += cs;
      ps_all += ps;
      cn_all += cn;
      pn_all += pn;
    }
  }
  loc.cosine_mean = mean_of(cs_all, cn_all);
  loc.pearson_mean = mean_of(ps_all, pn_all);
  double pc = 0, pp = 0;
  long npc = 0, npp = 0;
  for (Index a = 0; a < f; ++a)
    for (Index b = a + 1; b < f; ++b) {
      if (!std::isnan(loc.pairs.cosine(a, b))) pc += loc.pairs.cosine(a, b), ++npc;
      if (!std::isnan(loc.pairs.pearson(a, b))) pp += loc.pairs.pearson(a, b), ++npp;
    }
  loc.pairs.cosine_mean = mean_of(pc, npc);
  loc.pairs.pearson_mean = mean_of(pp, npp);
  return r;
}

ModelExplanations explain_pipeline(const FittedPipeline& pipeline, const Matrix& train_x,
                                   const io::SpectraDataset& holdout,
                                   const shap::ExplainerOptions& options) {
  const Matrix f_train = pipeline.features(train_x);
  const Matrix f_hold = pipeline.features(holdout.intensities());
  const auto phi = shap::explain(pipeline.classifier, f_hold, f_train, options);
  ModelExplanations out;
  out.predictions = models::predict(pipeline.classifier, f_hold);
  out.holdout_accuracy = models::accuracy(holdout.labels(), out.predictions);
  const auto n_classes = static_cast<std::size_t>(models::n_classes(pipeline.classifier));
  out.global.resize(n_classes);
  out.local.resize(static_cast<std::size_t>(holdout.n_samples()));

  if (pipeline.spca) {
    const Matrix& w = pipeline.spca->loadings;
    const Matrix cvn = pipeline.normalized_features(f_hold);
    const auto ge = backproject::global_explain(phi, out.predictions, cvn, w);
    for (std::size_t c = 0; c < n_classes; ++c)
      if (!ge[c].empty) out.global[c] = ge[c].psi;
    for (Index i = 0; i < holdout.n_samples(); ++i) {
      const auto le = backproject::local_explain(phi, i, out.predictions[static_cast<std::size_t>(i)],
                                                 cvn.row(i).transpose(), w);
      out.local[static_cast<std::size_t>(i)] = le.psi_total();
    }
    return out;
  }

  for (std::size_t c = 0; c < n_classes; ++c) {
    const Matrix slice = phi.class_slice(static_cast<Index>(c));
    Vector sum = Vector::Zero(phi.n_features());
    long count = 0;
    for (Index i = 0; i < phi.n_samples(); ++i) {
      if (out.predictions[static_cast<std::size_t>(i)] != static_cast<int>(c)) continue;
      sum += slice.row(i).transpose();
      ++count;
    }
    if (count) out.global[c] = sum / static_cast<double>(count);
  }
  for (Index i = 0; i < phi.n_samples(); ++i)
    out.local[static_cast<std::size_t>(i)] = phi.sample_block(i).col(out.predictions[static_cast<std::size_t>(i)]);
  return out;
}

ModelExplanations raw_shap_baseline(const io::SpectraDataset& train, const io::SpectraDataset& holdout,
                                    const models::ClassifierConfig& cfg,
                                    const shap::ExplainerOptions& options) {
  PipelineConfig pc;
  pc.use_sparse_pca = false;
  pc.classifier = cfg;
  const auto fitted = fit_pipeline(train.intensities(), train.labels(), train.n_classes(), pc);
  return explain_pipeline(fitted, train.intensities(), holdout, options);
}

ConsistencyReport run_protocol(const io::SpectraDataset& ds, const io::SpectraDataset& holdout,
                               const PipelineConfig& cfg, Method method, int k, std::uint64_t seed,
                               const ProtocolOptions& options) {
  if (k < 2) throw InvalidArgument("consistency protocol needs k >= 2");
  if (ds.n_features() != holdout.n_features()) throw DimensionMismatch("holdout and training data differ in P");
  if (ds.groups() && holdout.groups()) {
    const std::set<std::string> train_groups(ds.groups()->begin(), ds.groups()->end());
    for (const auto& g : *holdout.groups())
      if (train_groups.count(g)) throw InvalidArgument("holdout shares group '" + g + "' with the training data");
  }
  const auto mode = ds.groups() ? io::FoldMode::kGroupKFold : io::FoldMode::kStratifiedKFold;
  const auto folds = io::kfold_indices(ds, k, mode, derive_seed(seed, "consistency/folds"));

  std::vector<ModelExplanations> explained(folds.size());
  parallel::parallel_for(folds.size(), [&](std::size_t f) {
    const std::string tag = "consistency/fold" + std::to_string(f);
    PipelineConfig fc = cfg;
    auto eo = options.explainer;
    if (options.vary_seeds) {
      fc.spca.seed = derive_seed(seed, tag + "/sparse_pca");
      fc.classifier.forest.seed = derive_seed(seed, tag + "/forest");
      eo.kernel.seed = derive_seed(seed, tag + "/kernel");
      eo.background_seed = derive_seed(seed, tag + "/background");
    }
    const auto train = ds.subset(folds[f].train);
    try {
      if (method == Method::kRawShap) {
        explained[f] = raw_shap_baseline(train, holdout, fc.classifier, eo);
      } else {
        fc.use_sparse_pca = true;
        const auto fitted = fit_pipeline(train.intensities(), train.labels(), train.n_classes(), fc);
        explained[f] = explain_pipeline(fitted, train.intensities(), holdout, eo);
      }
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }
  });

  auto report = score_explanations(explained, ds.class_names());
  report.method = method_name(method);
  report.classifier = cfg.classifier.kind == models::ClassifierKind::kForest ? "forest" : "linear";
  return report;
}

nlohmann::json to_json(const ConsistencyReport& r) {
  nlohmann::json global = nlohmann::json::array();
  for (std::size_t c = 0; c < r.global.size(); ++c) {
    auto j = pair_json(r.global[c]);
    j["class_name"] = r.class_names[c];
    global.push_back(std::move(j));
  }
  nlohmann::json local = pair_json(r.local.pairs);
  local["cosine_mean"] = opt_json(r.local.cosine_mean);
  local["pearson_mean"] = opt_json(r.local.pearson_mean);
  local["n_sample_pairs"] = r.local.n_sample_pairs;
  local["n_class_mismatch"] = r.local.n_class_mismatch;
  local["exclusion_rate"] = r.local.exclusion_rate();
  local["n_sample_cosine_undefined"] = r.local.n_cosine_undefined;
  local["n_sample_pearson_undefined"] = r.local.n_pearson_undefined;
  return {{"method", r.method},
          {"classifier", r.classifier},
          {"n_models", r.n_models},
          {"n_pairs", r.n_pairs},
          {"holdout_accuracy", r.holdout_accuracy},
          {"global_cosine_mean", opt_json(r.global_cosine_mean())},
          {"global_pearson_mean", opt_json(r.global_pearson_mean())},
          {"global", std::move(global)},
          {"local", std::move(local)}};
}

std::string consistency_table_csv(const std::vector<ConsistencyReport>& reports) {
  if (reports.empty()) throw InvalidArgument("no consistency reports to tabulate");
  std::ostringstream out;
  out << std::setprecision(10) << "row";
  for (const auto& r : reports) out << ',' << r.label() << "_cosine," << r.label() << "_pearson";
  out << '\n';
  const auto cell = [&](const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  const auto& names = reports.front().class_names;
  for (std::size_t c = 0; c < names.size(); ++c) {
    out << names[c];
    for (const auto& r : reports) {
      if (r.global.size() != names.size()) throw DimensionMismatch("reports cover different classes");
      cell(r.global[c].cosine_mean);
      cell(r.global[c].pearson_mean);
    }
    out << '\n';
  }
  out << "Local";
  for (const auto& r : reports) {
    cell(r.local.cosine_mean);
    cell(r.local.pearson_mean);
  }
  out << '\n';
  return out.str();
}

}  // namespace shapca::consistency
