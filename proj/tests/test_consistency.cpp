#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "shapca/consistency.hpp"
#include "shapca/synth.hpp"

using namespace shapca;
using namespace shapca::consistency;

namespace {

ModelExplanations model_with(std::vector<Vector> global, std::vector<Vector> local, std::vector<int> pred) {
  ModelExplanations m;
  for (auto& g : global) m.global.emplace_back(std::move(g));
  m.local = std::move(local);
  m.predictions = std::move(pred);
  return m;
}

io::SpectraDataset small_synth(std::uint64_t seed) {
  synth::SynthConfig sc;
  sc.n_samples = 90;
  sc.n_features = 48;
  sc.n_blocks = 4;
  sc.block_width = 8;
  sc.n_informative = 2;
  sc.class_shift = 0.8;
  sc.seed = seed;
  return synth::generate(sc).dataset;
}

}  // namespace

TEST_CASE("cosine examples") {
  CHECK(*cosine_sim(Vector{{1.0, 2.0, 3.0}}, Vector{{1.0, 2.0, 3.0}}) == doctest::Approx(1.0));
  CHECK(*cosine_sim(Vector{{1.0, 0.0}}, Vector{{0.0, 1.0}}) == 0.0);
  CHECK(*cosine_sim(Vector{{1.0, 1.0}}, Vector{{-1.0, -1.0}}) == doctest::Approx(-1.0));
  CHECK_FALSE(cosine_sim(Vector::Zero(3), Vector::Ones(3)).has_value());
  CHECK_FALSE(cosine_sim(Vector{{1.0, NAN}}, Vector::Ones(2)).has_value());
  CHECK_THROWS_AS(cosine_sim(Vector::Ones(2), Vector::Ones(3)), DimensionMismatch);
}

TEST_CASE("pearson examples") {
  const Vector a{{1.0, 4.0, 2.0, 8.0}};
  CHECK(*pearson_corr(a, (2.0 * a.array() + 7.0).matrix()) == doctest::Approx(1.0));
  CHECK(*pearson_corr(a, (-a.array() + 3.0).matrix()) == doctest::Approx(-1.0));
  CHECK_FALSE(pearson_corr(a, Vector::Constant(4, 3.0)).has_value());
  // Constant up to rounding after centring still counts as constant.
  CHECK_FALSE(pearson_corr(a, Vector::Constant(4, 0.1 + 0.2)).has_value());
}

TEST_CASE("metric properties on random pairs") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int rep = 0; rep < 500; ++rep) {
    Vector a(10), b(10);
    for (Index j = 0; j < 10; ++j) a(j) = g(rng), b(j) = g(rng);
    const double s = scale(rng), t = g(rng) * 5;
    const double c = *cosine_sim(a, b), p = *pearson_corr(a, b);
    CHECK(std::abs(c) <= 1.0);
    CHECK(std::abs(p) <= 1.0);
    CHECK(*cosine_sim(b, a) == doctest::Approx(c).epsilon(1e-14));
    CHECK(*pearson_corr(b, a) == doctest::Approx(p).epsilon(1e-14));
    CHECK(std::abs(*cosine_sim(a, (s * b).eval()) - c) < 1e-12);
    CHECK(std::abs(*pearson_corr(a, (s * b.array() + t).matrix()) - p) < 1e-10);
  }
}

TEST_CASE("identical models score 1 everywhere") {
  const auto m = model_with({Vector{{1.0, 2.0, 0.5}}, Vector{{0.0, -1.0, 3.0}}},
                            {Vector{{1.0, 0.0, 2.0}}, Vector{{0.3, 0.2, 0.1}}}, {0, 1});
  const auto r = score_explanations({m, m, m}, {"a", "b"});
  CHECK(r.n_pairs == 3);
  for (const auto& g : r.global) {
    CHECK(*g.cosine_mean == doctest::Approx(1.0));
    CHECK(*g.pearson_mean == doctest::Approx(1.0));
    CHECK(std::isnan(g.cosine(1, 1)));
  }
  CHECK(*r.local.cosine_mean == doctest::Approx(1.0));
  CHECK(r.local.n_sample_pairs == 6);
  CHECK(r.local.exclusion_rate() == 0.0);
}

TEST_CASE("zero vectors and mismatched predictions are excluded") {
  const auto z = model_with({Vector::Zero(3), Vector{{1.0, 2.0, 3.0}}}, {Vector::Zero(3)}, {0});
  auto y = z;
  y.predictions = {1};
  const auto r = score_explanations({z, z, y}, {"a", "b"});
  CHECK_FALSE(r.global[0].cosine_mean.has_value());
  CHECK(r.global[0].n_cosine_undefined == 3);
  CHECK(r.global[0].n_pearson_undefined == 3);
  CHECK(*r.global[1].cosine_mean == doctest::Approx(1.0));
  CHECK(r.global_cosine_mean().has_value());
  CHECK(*r.global_cosine_mean() == doctest::Approx(1.0));
  CHECK(r.local.n_class_mismatch == 2);
  CHECK(r.local.n_cosine_undefined == 1);
  CHECK(r.local.exclusion_rate() == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(r.local.cosine_mean.has_value());

  ModelExplanations absent = z;
  absent.global[1].reset();
  const auto r2 = score_explanations({z, absent}, {"a", "b"});
  CHECK(r2.global[1].n_cosine_undefined == 1);
}

TEST_CASE("scores are symmetric and order invariant") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  auto rv = [&] {
    Vector v(6);
    for (Index j = 0; j < 6; ++j) v(j) = g(rng);
    return v;
  };
  std::vector<ModelExplanations> ms;
  for (int m = 0; m < 4; ++m) ms.push_back(model_with({rv(), rv()}, {rv(), rv(), rv()}, {0, m % 2, 1}));
  const auto r = score_explanations(ms, {"a", "b"});
  for (const auto& p : r.global) CHECK((p.cosine.array() == p.cosine.transpose().array() || p.cosine.array().isNaN()).all());
  std::reverse(ms.begin(), ms.end());
  const auto q = score_explanations(ms, {"a", "b"});
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(*q.global[c].cosine_mean == doctest::Approx(*r.global[c].cosine_mean).epsilon(1e-12));
    CHECK(*q.global[c].pearson_mean == doctest::Approx(*r.global[c].pearson_mean).epsilon(1e-12));
  }
  CHECK(*q.local.cosine_mean == doctest::Approx(*r.local.cosine_mean).epsilon(1e-12));
  CHECK_THROWS_AS(score_explanations({ms[0]}, {"a", "b"}), InvalidArgument);
}

TEST_CASE("identity projection makes shapca and raw explanations agree") {
  const auto ds = small_synth(3);
  const auto train = ds.subset([] {
    std::vector<Index> r;
    for (Index i = 0; i < 70; ++i) r.push_back(i);
    return r;
  }());
  std::vector<Index> hold_rows;
  for (Index i = 70; i < 90; ++i) hold_rows.push_back(i);
  const auto holdout = ds.subset(hold_rows);

  models::ForestConfig fc;
  fc.n_trees = 10;
  fc.max_depth = 3;
  FittedPipeline raw{std::nullopt, spca::ComponentScaler::fit(train.intensities()),
                     models::fit_forest(train.intensities(), train.labels(), 2, fc)};
  spca::SparsePcaModel identity;
  identity.loadings = Matrix::Identity(48, 48);
  identity.feature_means = Vector::Zero(48);
  FittedPipeline proj = raw;
  proj.spca = identity;

  shap::ExplainerOptions opt;
  const auto a = explain_pipeline(raw, train.intensities(), holdout, opt);
  const auto b = explain_pipeline(proj, train.intensities(), holdout, opt);
  CHECK(a.predictions == b.predictions);
  for (std::size_t c = 0; c < 2; ++c) {
    REQUIRE(a.global[c].has_value() == b.global[c].has_value());
    if (a.global[c]) CHECK((*a.global[c] - *b.global[c]).cwiseAbs().maxCoeff() < 1e-12);
  }
  for (std::size_t s = 0; s < a.local.size(); ++s) CHECK((a.local[s] - b.local[s]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("raw baseline on separable data is finite") {
  const auto ds = small_synth(4);
  std::vector<Index> tr, ho;
  for (Index i = 0; i < 90; ++i) (i < 72 ? tr : ho).push_back(i);
  models::ClassifierConfig cc;
  cc.forest.n_trees = 10;
  const auto e = raw_shap_baseline(ds.subset(tr), ds.subset(ho), cc, shap::ExplainerOptions{});
  CHECK(e.holdout_accuracy >= 0.8);
  for (const auto& g : e.global)
    if (g) CHECK(g->allFinite());
  for (const auto& l : e.local) CHECK(l.allFinite());
}

TEST_CASE("run_protocol produces a symmetric report and is deterministic") {
  const auto ds = small_synth(5);
  io::SplitSpec sp;
  sp.seed = 1;
  const auto [train, holdout] = io::split(ds, sp);
  PipelineConfig cfg;
  cfg.spca.n_components = 4;
  cfg.spca.alpha = 0.2;
  cfg.classifier.forest.n_trees = 15;
  const auto r = run_protocol(train, holdout, cfg, Method::kShapca, 3, 9);
  CHECK(r.n_models == 3);
  CHECK(r.label() == "shapca+forest");
  for (const auto& p : r.global)
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b)
        if (a != b) CHECK(p.cosine(a, b) == p.cosine(b, a));
  const auto again = run_protocol(train, holdout, cfg, Method::kShapca, 3, 9);
  CHECK(to_json(again).dump() == to_json(r).dump());

  const auto raw = run_protocol(train, holdout, cfg, Method::kRawShap, 3, 9);
  CHECK(raw.method == "raw_shap");
  const auto csv = consistency_table_csv({r, raw});
  CHECK(csv.rfind("row,shapca+forest_cosine,shapca+forest_pearson,raw_shap+forest_cosine,raw_shap+forest_pearson\n", 0) == 0);
  CHECK(csv.find("\nLocal,") != std::string::npos);
}

TEST_CASE("run_protocol refuses a holdout sharing groups with training") {
  const auto ds = small_synth(6);
  PipelineConfig cfg;
  cfg.spca.n_components = 3;
  cfg.classifier.forest.n_trees = 5;
  CHECK_THROWS_AS(run_protocol(ds, ds.subset({0, 1, 2, 3}), cfg, Method::kShapca, 3, 1), InvalidArgument);
}
