#include "shapca/search.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace shapca::search {

void set_param(PipelineConfig& cfg, const std::string& name, double value) {
  const auto as_int = [&] { return static_cast<int>(std::llround(value)); };
  if (name == "spca.n_components") cfg.spca.n_components = as_int();
  else if (name == "spca.alpha") cfg.spca.alpha = value;
  else if (name == "forest.n_trees") cfg.classifier.forest.n_trees = as_int();
  else if (name == "forest.max_depth") cfg.classifier.forest.max_depth = as_int();
  else if (name == "forest.min_leaf") cfg.classifier.forest.min_leaf = as_int();
  else if (name == "forest.max_features") cfg.classifier.forest.max_features = as_int();
  else if (name == "linear.l2") cfg.classifier.linear.l2 = value;
  else throw InvalidArgument("unknown hyperparameter '" + name + "'");
}

double get_param(const PipelineConfig& cfg, const std::string& name) {
  if (name == "spca.n_components") return cfg.spca.n_components;
  if (name == "spca.alpha") return cfg.spca.alpha;
  if (name == "forest.n_trees") return cfg.classifier.forest.n_trees;
  if (name == "forest.max_depth") return cfg.classifier.forest.max_depth;
  if (name == "forest.min_leaf") return cfg.classifier.forest.min_leaf;
  if (name == "forest.max_features") return cfg.classifier.forest.max_features;
  if (name == "linear.l2") return cfg.classifier.linear.l2;
  throw InvalidArgument("unknown hyperparameter '" + name + "'");
}

double Distribution::sample(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::kIntUniform: {
      std::uniform_int_distribution<long long> d(std::llround(lo), std::llround(hi));
      return static_cast<double>(d(rng));
    }
    case Kind::kUniform: {
      std::uniform_real_distribution<double> d(lo, hi);
      return d(rng);
    }
    case Kind::kLogUniform: {
      std::uniform_real_distribution<double> d(std::log(lo), std::log(hi));
      return std::exp(d(rng));
    }
    case Kind::kChoice: {
      std::uniform_int_distribution<std::size_t> d(0, choices.size() - 1);
      return choices[d(rng)];
    }
  }
  return lo;
}

SearchSpec search_spec_from_json(const nlohmann::json& j) {
  SearchSpec spec;
  spec.n_samples = j.value("n_samples", spec.n_samples);
  spec.k = j.value("k", spec.k);
  spec.seed = j.value("seed", spec.seed);
  spec.tie_tolerance = j.value("tie_tolerance", spec.tie_tolerance);
  const auto cv = j.value("cv", std::string("stratified_kfold"));
  if (cv == "group_kfold") spec.cv_mode = io::FoldMode::kGroupKFold;
  else if (cv == "stratified_kfold") spec.cv_mode = io::FoldMode::kStratifiedKFold;
  else throw InvalidArgument("cv must be 'group_kfold' or 'stratified_kfold'");
  const auto scoring = j.value("scoring", std::string("accuracy"));
  if (scoring == "accuracy") spec.scoring = Scoring::kAccuracy;
  else if (scoring == "macro_f1") spec.scoring = Scoring::kMacroF1;
  else throw InvalidArgument("scoring must be 'accuracy' or 'macro_f1'");

  if (j.contains("distributions")) {
    for (const auto& [name, jd] : j["distributions"].items()) {
      Distribution d;
      const auto type = jd.at("type").get<std::string>();
      if (type == "choice") {
        d.kind = Distribution::Kind::kChoice;
        d.choices = jd.at("values").get<std::vector<double>>();
        if (d.choices.empty()) throw InvalidArgument("choice distribution for " + name + " is empty");
      } else {
        if (type == "int_uniform") d.kind = Distribution::Kind::kIntUniform;
        else if (type == "uniform") d.kind = Distribution::Kind::kUniform;
        else if (type == "log_uniform") d.kind = Distribution::Kind::kLogUniform;
        else throw InvalidArgument("unknown distribution type '" + type + "'");
        d.lo = jd.at("lo").get<double>();
        d.hi = jd.at("hi").get<double>();
        if (!(d.lo <= d.hi)) throw InvalidArgument("distribution for " + name + " has lo > hi");
        if (d.kind == Distribution::Kind::kLogUniform && !(d.lo > 0))
          throw InvalidArgument("log_uniform bounds must be positive");
      }
      spec.distributions[name] = std::move(d);
    }
  }
  if (j.contains("grids")) {
    for (const auto& [name, jg] : j["grids"].items()) {
      auto values = jg.get<std::vector<double>>();
      if (values.empty()) throw InvalidArgument("grid for " + name + " is empty");
      spec.grids[name] = std::move(values);
    }
  }
  if (spec.n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  return spec;
}

std::size_t select_best(const std::vector<CandidateScore>& table, double tie_tolerance) {
  std::size_t best = table.size();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!table[i].feasible) continue;
    if (best == table.size()) {
      best = i;
      continue;
    }
    const double diff = table[i].score - table[best].score;
    if (diff > tie_tolerance ||
        (std::abs(diff) <= tie_tolerance && table[i].mean_sparsity > table[best].mean_sparsity))
      best = i;
  }
  if (best == table.size()) throw Error("hyperparameter search: no feasible candidate");
  return best;
}

CandidateScore evaluate(const io::SpectraDataset& train, const std::vector<io::Fold>& folds,
                        const PipelineConfig& cfg, Scoring scoring) {
  CandidateScore out;
  out.config = cfg;
  double acc = 0, f1 = 0, sparsity = 0;
  try {
    for (const auto& fold : folds) {
      const auto tr = train.subset(fold.train);
      const auto te = train.subset(fold.test);
      const auto fitted = fit_pipeline(tr.intensities(), tr.labels(), train.n_classes(), cfg);
      const auto pred = fitted.predict(te.intensities());
      acc += models::accuracy(te.labels(), pred);
      f1 += models::macro_f1(te.labels(), pred);
      if (fitted.spca) sparsity += fitted.spca->sparsity_fraction;
    }
  } catch (const Error& e) {
    out.feasible = false;
    out.note = e.what();
    return out;
  }
  const auto nf = static_cast<double>(folds.size());
  out.mean_accuracy = acc / nf;
  out.mean_macro_f1 = f1 / nf;
  out.mean_sparsity = sparsity / nf;
  out.score = scoring == Scoring::kAccuracy ? out.mean_accuracy : out.mean_macro_f1;
  return out;
}

SearchResult hyperparam_search(const io::SpectraDataset& train, const PipelineConfig& base,
                               const SearchSpec& spec) {
  for (const auto& [name, d] : spec.distributions) (void)get_param(base, name);
  for (const auto& [name, g] : spec.grids) (void)get_param(base, name);

  const auto folds = io::kfold_indices(train, spec.k, spec.cv_mode, derive_seed(spec.seed, "cv"));
  SearchResult result;
  std::mt19937_64 rng(derive_seed(spec.seed, "randomized"));

  for (int s = 0; s < spec.n_samples; ++s) {
    PipelineConfig cfg = base;
    std::map<std::string, double> params;
    for (const auto& [name, d] : spec.distributions) {
      const double v = d.sample(rng);
      set_param(cfg, name, v);
      params[name] = get_param(cfg, name);
    }
    auto row = evaluate(train, folds, cfg, spec.scoring);
    row.stage = 1;
    row.params = std::move(params);
    result.table.push_back(std::move(row));
  }
  const std::size_t stage1 = select_best(result.table, spec.tie_tolerance);

  if (!spec.grids.empty()) {
    const PipelineConfig anchor = result.table[stage1].config;
    std::vector<std::pair<std::string, std::vector<double>>> axes(spec.grids.begin(), spec.grids.end());
    std::vector<std::size_t> pos(axes.size(), 0);
    for (;;) {
      PipelineConfig cfg = anchor;
      std::map<std::string, double> params = result.table[stage1].params;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        set_param(cfg, axes[a].first, axes[a].second[pos[a]]);
        params[axes[a].first] = get_param(cfg, axes[a].first);
      }
      auto row = evaluate(train, folds, cfg, spec.scoring);
      row.stage = 2;
      row.params = std::move(params);
      result.table.push_back(std::move(row));

      std::size_t a = 0;
      while (a < axes.size() && ++pos[a] == axes[a].second.size()) pos[a++] = 0;
      if (a == axes.size()) break;
    }
  }
  result.best_index = select_best(result.table, spec.tie_tolerance);
  result.best = result.table[result.best_index].config;
  return result;
}

std::string score_table_csv(const SearchResult& result) {
  std::set<std::string> names;
  for (const auto& row : result.table)
    for (const auto& [name, v] : row.params) names.insert(name);
  std::ostringstream out;
  out << std::setprecision(10);
  out << "stage";
  for (const auto& n : names) out << ',' << n;
  out << ",mean_accuracy,mean_macro_f1,mean_sparsity,score,feasible,selected\n";
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const auto& row = result.table[i];
    out << row.stage;
    for (const auto& n : names) {
      out << ',';
      if (auto it = row.params.find(n); it != row.params.end()) out << it->second;
    }
    out << ',' << row.mean_accuracy << ',' << row.mean_macro_f1 << ',' << row.mean_sparsity << ','
        << row.score << ',' << (row.feasible ? 1 : 0) << ',' << (i == result.best_index ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace shapca::search
