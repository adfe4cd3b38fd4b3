#include "shapca/commands.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "shapca/backproject.hpp"

namespace fs = std::filesystem;

namespace shapca::cli {

fs::path RunConfig::data_file() const { return data_path ? *data_path : output_dir / "data.csv"; }

namespace {

const std::set<std::string> kTopLevelKeys = {"output_dir", "seed",     "data",        "split",  "preprocess",
                                             "pipeline",   "search",   "explainer",   "render", "consistency",
                                             "local",      "synth"};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir, bool require_inputs) {
  if (!j.is_object()) throw StageError("config", "run config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kTopLevelKeys.count(key)) throw StageError("config", "unknown key '" + key + "'");
  RunConfig cfg;
  try {
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("data")) {
      const auto& d = j["data"];
      if (d.contains("path")) cfg.data_path = resolve(base_dir, d["path"].get<std::string>());
      if (d.contains("holdout_path")) cfg.holdout_path = resolve(base_dir, d["holdout_path"].get<std::string>());
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      const auto mode = s.value("mode", std::string("group_level"));
      if (mode == "group_level") cfg.split.mode = io::SplitMode::kGroupLevel;
      else if (mode == "sample_level_stratified") cfg.split.mode = io::SplitMode::kSampleLevelStratified;
      else throw InvalidArgument("split.mode must be group_level or sample_level_stratified");
      cfg.split.test_fraction = s.value("test_fraction", cfg.split.test_fraction);
      if (!(cfg.split.test_fraction > 0 && cfg.split.test_fraction < 1))
        throw InvalidArgument("split.test_fraction must lie in (0, 1)");
    }
    if (j.contains("preprocess")) {
      auto p = j["preprocess"];
      cfg.preprocess_enabled = p.value("enabled", true);
      p.erase("enabled");
      cfg.preprocess = preprocess::preprocess_config_from_json(p);
    }
    if (j.contains("pipeline")) cfg.pipeline = pipeline_config_from_json(j["pipeline"]);
    if (j.contains("search") && !j["search"].is_null()) cfg.search = search::search_spec_from_json(j["search"]);
    if (j.contains("explainer")) cfg.explainer = shap::explainer_options_from_json(j["explainer"]);
    if (j.contains("render")) cfg.render = render::render_spec_from_json(j["render"]);
    if (j.contains("consistency")) {
      const auto& c = j["consistency"];
      cfg.consistency_k = c.value("k", cfg.consistency_k);
      if (cfg.consistency_k < 2) throw InvalidArgument("consistency.k must be at least 2");
      if (c.contains("methods")) {
        cfg.consistency_methods.clear();
        for (const auto& m : c["methods"]) {
          const auto name = m.get<std::string>();
          if (name == "shapca") cfg.consistency_methods.push_back(consistency::Method::kShapca);
          else if (name == "raw_shap") cfg.consistency_methods.push_back(consistency::Method::kRawShap);
          else throw InvalidArgument("consistency method must be shapca or raw_shap, got '" + name + "'");
        }
        if (cfg.consistency_methods.empty()) throw InvalidArgument("consistency.methods is empty");
      }
    }
    if (j.contains("local")) {
      const auto& l = j["local"];
      if (l.contains("samples")) cfg.local_samples = l["samples"].get<std::vector<std::string>>();
      cfg.local_count = l.value("count", cfg.local_count);
      if (cfg.local_count < 0) throw InvalidArgument("local.count must be non-negative");
      if (l.contains("class") && !l["class"].is_null()) cfg.local_class = l["class"].get<std::string>();
      cfg.export_tracks = l.value("export_tracks", cfg.export_tracks);
    }
    if (j.contains("synth")) cfg.synth = synth::synth_config_from_json(j["synth"]);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  if (!require_inputs) return cfg;
  if (cfg.data_path && !fs::exists(*cfg.data_path))
    throw StageError("config", "data file " + cfg.data_path->string() + " does not exist");
  if (cfg.holdout_path && !fs::exists(*cfg.holdout_path))
    throw StageError("config", "holdout file " + cfg.holdout_path->string() + " does not exist");
  return cfg;
}

RunConfig load_run_config(const fs::path& path, bool require_inputs) {
  std::ifstream in(path);
  if (!in) throw StageError("config", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const std::exception& e) {
    throw StageError("config", path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path(), require_inputs);
}

namespace {

// Collects a command's outputs and writes them all at the end: nothing is
// written if any target exists without --force, and each file lands via a
// rename so readers never see a partial file.
class Artifacts {
 public:
  Artifacts(fs::path root, bool force, std::string stage)
      : root_(std::move(root)), force_(force), stage_(std::move(stage)) {}

  void add(const fs::path& rel, std::string content) { files_.emplace_back(rel, std::move(content)); }
  void add_json(const fs::path& rel, const nlohmann::json& j) { add(rel, j.dump(2) + "\n"); }

  void commit() {
    for (const auto& [rel, content] : files_) {
      if (fs::exists(root_ / rel) && !force_)
        throw StageError(stage_, "refusing to overwrite " + (root_ / rel).string() + " (pass --force)");
    }
    for (const auto& [rel, content] : files_) {
      const fs::path target = root_ / rel;
      std::error_code ec;
      fs::create_directories(target.parent_path(), ec);
      if (ec) throw StageError(stage_, "cannot create " + target.parent_path().string() + ": " + ec.message());
      const fs::path tmp = target.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StageError(stage_, "cannot write " + tmp.string());
        out << content;
        if (!out) throw StageError(stage_, "write failed for " + tmp.string());
      }
      fs::rename(tmp, target, ec);
      if (ec) throw StageError(stage_, "cannot move " + tmp.string() + " into place: " + ec.message());
    }
  }

 private:
  fs::path root_;
  bool force_;
  std::string stage_;
  std::vector<std::pair<fs::path, std::string>> files_;
};

template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

nlohmann::json read_json(const fs::path& path, const std::string& stage) {
  std::ifstream in(path);
  if (!in) throw StageError(stage, "cannot open " + path.string() + "; run the earlier stages first");
  try {
    return nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw StageError(stage, path.string() + ": " + e.what());
  }
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
  return out.empty() ? "_" : out;
}

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

io::SpectralAxis axis_from_json(const nlohmann::json& j) {
  return io::SpectralAxis(j.at("values").get<std::vector<double>>(), j.at("unit").get<std::string>());
}

io::SpectraDataset load_and_preprocess(const RunConfig& cfg, const fs::path& path) {
  auto ds = in_stage("load", [&] {
    if (!fs::exists(path)) throw Error("data file " + path.string() + " does not exist");
    return io::load_csv(path);
  });
  if (!cfg.preprocess_enabled) return ds;
  return in_stage("preprocess", [&] { return preprocess::run_chain(ds, cfg.preprocess); });
}

struct Prepared {
  io::SpectraDataset train;
  io::SpectraDataset test;
};

// Reloads the data and reapplies the split recorded by `fit`.
Prepared prepared_from_split(const RunConfig& cfg, const std::string& stage) {
  const auto split = read_json(cfg.output_dir / "split.json", stage);
  const auto ds = load_and_preprocess(cfg, cfg.data_file());
  return in_stage(stage, [&] {
    const auto train_idx = split.at("train").get<std::vector<Index>>();
    for (Index i : train_idx)
      if (i < 0 || i >= ds.n_samples()) throw Error("split.json does not match the dataset");
    if (split.at("holdout_file").get<bool>()) {
      if (!cfg.holdout_path) throw Error("the model was fitted with a holdout file but none is configured");
      return Prepared{ds.subset(train_idx), load_and_preprocess(cfg, *cfg.holdout_path)};
    }
    const auto test_idx = split.at("test").get<std::vector<Index>>();
    for (Index i : test_idx)
      if (i < 0 || i >= ds.n_samples()) throw Error("split.json does not match the dataset");
    return Prepared{ds.subset(train_idx), ds.subset(test_idx)};
  });
}

struct LoadedModel {
  FittedPipeline pipeline;
  PipelineConfig config;
  std::vector<std::string> class_names;
};

LoadedModel load_model(const RunConfig& cfg, const std::string& stage) {
  const auto j = read_json(cfg.output_dir / "model.json", stage);
  return in_stage(stage, [&] {
    return LoadedModel{fitted_pipeline_from_json(j.at("pipeline")), pipeline_config_from_json(j.at("pipeline_config")),
                       j.at("class_names").get<std::vector<std::string>>()};
  });
}

shap::ExplainerOptions explainer_options(const RunConfig& cfg) {
  auto o = cfg.explainer;
  o.kernel.seed = derive_seed(cfg.seed, "kernel");
  o.background_seed = derive_seed(cfg.seed, "background");
  return o;
}

Matrix loadings_of(const FittedPipeline& p, Index n_raw) {
  if (p.spca) return p.spca->loadings;
  return Matrix::Identity(n_raw, n_raw);
}

// Attributions on the held-out set, reused from disk when explain-global
// already produced them for this model.
shap::AttributionTensor attributions(const RunConfig& cfg, const LoadedModel& m, const Prepared& data,
                                     bool reuse) {
  const fs::path cached = cfg.output_dir / "explanations" / "attributions.json";
  if (reuse && fs::exists(cached))
    return in_stage("explain", [&] { return shap::attribution_from_json(read_json(cached, "explain")); });
  return in_stage("explain", [&] {
    const Matrix f_train = m.pipeline.features(data.train.intensities());
    const Matrix f_test = m.pipeline.features(data.test.intensities());
    return shap::explain(m.pipeline.classifier, f_test, f_train, explainer_options(cfg));
  });
}

Vector class_mean_spectrum(const io::SpectraDataset& ds, const std::vector<int>& pred, int c) {
  Vector sum = Vector::Zero(ds.n_features());
  long n = 0;
  for (Index i = 0; i < ds.n_samples(); ++i)
    if (pred[static_cast<std::size_t>(i)] == c) {
      sum += ds.intensities().row(i).transpose();
      ++n;
    }
  if (n == 0) return ds.intensities().colwise().mean().transpose();
  return sum / static_cast<double>(n);
}

void add_global_figures(Artifacts& out, const fs::path& dir, const nlohmann::json& global, const render::RenderSpec& spec,
                        bool tracks) {
  const auto axis = axis_from_json(global.at("axis"));
  std::vector<backproject::GlobalExplanation> ge;
  std::vector<std::string> names;
  Matrix means(static_cast<Index>(global.at("classes").size()), axis.size());
  for (const auto& c : global.at("classes")) {
    ge.push_back(backproject::global_from_json(c));
    names.push_back(c.at("class_name").get<std::string>());
    const Vector mean = from_vec(c.at("mean_spectrum"));
    if (mean.size() != axis.size()) throw DimensionMismatch("mean spectrum does not match the axis");
    means.row(static_cast<Index>(ge.size() - 1)) = mean.transpose();
  }
  const auto docs = render::render_global(ge, axis, means, names, spec);
  if (spec.layout == render::Layout::kGrid) {
    out.add(dir / "global.svg", docs.front());
  } else {
    for (std::size_t c = 0; c < docs.size(); ++c) out.add(dir / ("global_" + safe_name(names[c]) + ".svg"), docs[c]);
  }
  if (tracks)
    for (std::size_t c = 0; c < ge.size(); ++c)
      out.add(dir / ("global_" + safe_name(names[c]) + "_tracks.csv"),
              render::tracks_csv(axis, {{"psi", ge[c].psi}, {"pc_track", ge[c].pc_track}}));
}

void add_local_figures(Artifacts& out, const fs::path& dir, const nlohmann::json& local, const render::RenderSpec& spec,
                       bool tracks) {
  const auto axis = axis_from_json(local.at("axis"));
  const auto le = backproject::local_from_json(local);
  const auto sid = local.at("sample_id").get<std::string>();
  const auto name = local.at("class_name").get<std::string>();
  const Vector spectrum = from_vec(local.at("spectrum"));
  out.add(dir / ("local_" + safe_name(sid) + ".svg"), render::render_local(le, axis, spectrum, name, sid, spec));
  if (tracks)
    out.add(dir / ("local_" + safe_name(sid) + "_tracks.csv"),
            render::tracks_csv(axis, {{"psi_pos", le.psi_pos}, {"psi_neg", le.psi_neg}, {"pc_track", le.pc_track}}));
}

}  // namespace

void cmd_synth(const RunConfig& cfg, const CommandOptions& opt) {
  auto sc = cfg.synth;
  sc.seed = derive_seed(cfg.seed, "synth");
  const auto result = in_stage("synth", [&] { return synth::generate(sc); });
  Artifacts out(cfg.output_dir, opt.force, "synth");
  if (cfg.data_path) {
    Artifacts data(cfg.data_path->parent_path(), opt.force, "synth");
    data.add(cfg.data_path->filename(), io::format_csv(result.dataset));
    data.commit();
  } else {
    out.add("data.csv", io::format_csv(result.dataset));
  }
  out.add("latent.csv", synth::latent_csv(result));
  out.add("templates.csv", synth::templates_csv(result));
  out.add_json("synth.json", synth::to_json(sc));
  out.commit();
}

void cmd_fit(const RunConfig& cfg, const CommandOptions& opt) {
  const auto ds = load_and_preprocess(cfg, cfg.data_file());
  auto split_spec = cfg.split;
  split_spec.seed = derive_seed(cfg.seed, "split");

  std::vector<Index> train_idx, test_idx;
  std::optional<io::SpectraDataset> holdout;
  if (cfg.holdout_path) {
    holdout = load_and_preprocess(cfg, *cfg.holdout_path);
    for (Index i = 0; i < ds.n_samples(); ++i) train_idx.push_back(i);
  } else {
    auto idx = in_stage("split", [&] { return io::split_indices(ds, split_spec); });
    train_idx = std::move(idx.train);
    test_idx = std::move(idx.test);
  }
  const auto train = ds.subset(train_idx);
  const auto test = holdout ? *holdout : ds.subset(test_idx);
  if (test.n_features() != train.n_features() || test.class_names() != train.class_names())
    throw StageError("split", "holdout file does not match the training data (axis or classes differ)");

  Artifacts out(cfg.output_dir, opt.force, "fit");
  PipelineConfig pc = cfg.pipeline;
  pc.spca.seed = derive_seed(cfg.seed, "sparse_pca");
  pc.classifier.forest.seed = derive_seed(cfg.seed, "forest");
  if (cfg.search) {
    auto spec = *cfg.search;
    spec.seed = derive_seed(cfg.seed, "search");
    const auto result = in_stage("search", [&] { return search::hyperparam_search(train, pc, spec); });
    pc = result.best;
    out.add("search_scores.csv", search::score_table_csv(result));
  }
  const auto fitted = in_stage("fit", [&] {
    return fit_pipeline(train.intensities(), train.labels(), train.n_classes(), pc);
  });
  const auto pred = in_stage("fit", [&] { return fitted.predict(test.intensities()); });

  nlohmann::json metrics = {{"accuracy", models::accuracy(test.labels(), pred)},
                            {"macro_f1", models::macro_f1(test.labels(), pred)},
                            {"n_train", train.n_samples()},
                            {"n_test", test.n_samples()},
                            {"classifier", pc.classifier.kind == models::ClassifierKind::kForest ? "forest" : "linear"},
                            {"use_sparse_pca", pc.use_sparse_pca}};
  if (fitted.spca) {
    metrics["n_components"] = fitted.spca->n_components();
    metrics["sparsity_fraction"] = fitted.spca->sparsity_fraction;
    metrics["sparse_pca_converged"] = fitted.spca->converged;
    metrics["sparse_pca_iterations"] = fitted.spca->iterations;
  }
  nlohmann::json model = {{"pipeline", to_json(fitted)},
                          {"pipeline_config", to_json(pc)},
                          {"class_names", train.class_names()},
                          {"axis", {{"values", train.axis().values()}, {"unit", train.axis().unit_label()}}},
                          {"seed", cfg.seed}};
  nlohmann::json split = {{"holdout_file", holdout.has_value()}, {"train", train_idx}, {"test", test_idx}};
  out.add_json("model.json", model);
  out.add_json("metrics.json", metrics);
  out.add_json("split.json", split);
  out.commit();
}

void cmd_explain_global(const RunConfig& cfg, const CommandOptions& opt) {
  const auto m = load_model(cfg, "explain");
  const auto data = prepared_from_split(cfg, "explain");
  const auto phi = attributions(cfg, m, data, false);

  const auto global = in_stage("backproject", [&] {
    const Matrix f_test = m.pipeline.features(data.test.intensities());
    const auto pred = models::predict(m.pipeline.classifier, f_test);
    const Matrix cvn = m.pipeline.normalized_features(f_test);
    const auto ge = backproject::global_explain(phi, pred, cvn, loadings_of(m.pipeline, data.test.n_features()));
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < ge.size(); ++c) {
      auto j = backproject::to_json(ge[c], data.test.axis(), m.class_names[c]);
      j["mean_spectrum"] = to_vec(class_mean_spectrum(data.test, pred, static_cast<int>(c)));
      classes.push_back(std::move(j));
    }
    return nlohmann::json{{"axis", {{"values", data.test.axis().values()}, {"unit", data.test.axis().unit_label()}}},
                          {"phi0", to_vec(phi.phi0())},
                          {"predictions", pred},
                          {"classes", std::move(classes)}};
  });

  Artifacts out(cfg.output_dir, opt.force, "explain-global");
  out.add_json(fs::path("explanations") / "attributions.json", shap::to_json(phi));
  out.add(fs::path("explanations") / "attributions.csv", shap::to_csv(phi));
  out.add_json(fs::path("explanations") / "global.json", global);
  in_stage("render", [&] { add_global_figures(out, "explanations", global, cfg.render, cfg.export_tracks); });
  out.commit();
}

void cmd_explain_local(const RunConfig& cfg, const CommandOptions& opt) {
  const auto m = load_model(cfg, "explain");
  const auto data = prepared_from_split(cfg, "explain");
  const auto phi = attributions(cfg, m, data, true);
  if (phi.n_samples() != data.test.n_samples())
    throw StageError("explain", "stored attributions do not match the held-out set; rerun explain-global --force");

  std::vector<Index> rows;
  if (!cfg.local_samples.empty()) {
    std::map<std::string, Index> by_id;
    for (Index i = 0; i < data.test.n_samples(); ++i) by_id[data.test.sample_ids()[static_cast<std::size_t>(i)]] = i;
    for (const auto& s : cfg.local_samples) {
      auto it = by_id.find(s);
      if (it == by_id.end()) throw StageError("explain", "sample '" + s + "' is not in the held-out set");
      rows.push_back(it->second);
    }
  } else {
    for (Index i = 0; i < std::min<Index>(cfg.local_count, data.test.n_samples()); ++i) rows.push_back(i);
  }
  std::optional<int> forced_class;
  if (cfg.local_class) {
    const auto& names = m.class_names;
    auto it = std::find(names.begin(), names.end(), *cfg.local_class);
    if (it == names.end()) throw StageError("explain", "unknown class '" + *cfg.local_class + "'");
    forced_class = static_cast<int>(it - names.begin());
  }

  Artifacts out(cfg.output_dir, opt.force, "explain-local");
  in_stage("backproject", [&] {
    const Matrix f_test = m.pipeline.features(data.test.intensities());
    const auto pred = models::predict(m.pipeline.classifier, f_test);
    const Matrix cvn = m.pipeline.normalized_features(f_test);
    const Matrix w = loadings_of(m.pipeline, data.test.n_features());
    for (Index i : rows) {
      const int c = forced_class.value_or(pred[static_cast<std::size_t>(i)]);
      const auto le = backproject::local_explain(phi, i, c, cvn.row(i).transpose(), w);
      const auto check = backproject::combine_sanity(le, w, le.phi);
      if (!check.pass) throw Error("sign split does not recombine (deviation " + std::to_string(check.max_deviation) + ")");
      const auto& sid = data.test.sample_ids()[static_cast<std::size_t>(i)];
      auto j = backproject::to_json(le, data.test.axis(), m.class_names[static_cast<std::size_t>(c)], sid);
      j["predicted_class"] = m.class_names[static_cast<std::size_t>(pred[static_cast<std::size_t>(i)])];
      j["spectrum"] = to_vec(data.test.intensities().row(i).transpose());
      out.add_json(fs::path("explanations") / ("local_" + safe_name(sid) + ".json"), j);
      add_local_figures(out, "explanations", j, cfg.render, cfg.export_tracks);
    }
  });
  out.commit();
}

void cmd_consistency(const RunConfig& cfg, const CommandOptions& opt) {
  const auto m = load_model(cfg, "consistency");
  const auto data = prepared_from_split(cfg, "consistency");
  consistency::ProtocolOptions po;
  po.explainer = cfg.explainer;
  std::vector<consistency::ConsistencyReport> reports;
  nlohmann::json all = nlohmann::json::array();
  for (auto method : cfg.consistency_methods) {
    auto report = in_stage("consistency", [&] {
      return consistency::run_protocol(data.train, data.test, m.config, method, cfg.consistency_k,
                                       derive_seed(cfg.seed, "consistency"), po);
    });
    all.push_back(consistency::to_json(report));
    reports.push_back(std::move(report));
  }
  Artifacts out(cfg.output_dir, opt.force, "consistency");
  out.add("report.csv", consistency::consistency_table_csv(reports));
  out.add_json("consistency.json", all);
  out.commit();
}

void cmd_render(const RunConfig& cfg, const CommandOptions& opt) {
  const fs::path dir = cfg.output_dir / "explanations";
  if (!fs::is_directory(dir)) throw StageError("render", "no explanations in " + dir.string() + "; run explain-global first");
  Artifacts out(cfg.output_dir, opt.force, "render");
  in_stage("render", [&] {
    bool any = false;
    if (fs::exists(dir / "global.json")) {
      add_global_figures(out, "figures", read_json(dir / "global.json", "render"), cfg.render, cfg.export_tracks);
      any = true;
    }
    std::vector<fs::path> locals;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("local_", 0) == 0 && e.path().extension() == ".json") locals.push_back(e.path());
    }
    std::sort(locals.begin(), locals.end());
    for (const auto& p : locals) {
      add_local_figures(out, "figures", read_json(p, "render"), cfg.render, cfg.export_tracks);
      any = true;
    }
    if (!any) throw Error("nothing to render in " + dir.string());
  });
  out.commit();
}

int run(int argc, char** argv) {
  CLI::App app{"Sparse-PCA Shapley explanations for spectra"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  unsigned workers = 1;
  bool force = false;
  app.add_option("--config", config_path, "Run-config JSON file");
  app.add_option("--seed", seed, "Global seed (overrides the config)");
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  app.add_option("--workers", workers, "Worker threads; 0 uses every core")->capture_default_str();
  app.add_flag("--force", force, "Overwrite existing artifacts");

  std::optional<int> n_samples, n_blocks, block_width;
  std::optional<double> noise;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic spectral dataset");
  synth_cmd->add_option("--n-samples", n_samples);
  synth_cmd->add_option("--n-blocks", n_blocks);
  synth_cmd->add_option("--block-width", block_width);
  synth_cmd->add_option("--noise", noise);
  auto* fit_cmd = app.add_subcommand("fit", "Preprocess, split, fit Sparse PCA and the classifier");
  auto* global_cmd = app.add_subcommand("explain-global", "Class-wise explanations on the held-out set");
  auto* local_cmd = app.add_subcommand("explain-local", "Per-sample explanations");
  auto* cons_cmd = app.add_subcommand("consistency", "Cross-fold explanation consistency");
  auto* render_cmd = app.add_subcommand("render", "Re-render SVG figures from saved explanations");
  for (auto* sub : {synth_cmd, fit_cmd, global_cmd, local_cmd, cons_cmd, render_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path, !synth_cmd->parsed());
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (n_samples) cfg.synth.n_samples = *n_samples;
    if (n_blocks) cfg.synth.n_blocks = *n_blocks;
    if (block_width) cfg.synth.block_width = *block_width;
    if (noise) cfg.synth.noise = *noise;
    parallel::set_workers(workers);
    const CommandOptions opt{force};

    if (synth_cmd->parsed()) cmd_synth(cfg, opt);
    else if (fit_cmd->parsed()) cmd_fit(cfg, opt);
    else if (global_cmd->parsed()) cmd_explain_global(cfg, opt);
    else if (local_cmd->parsed()) cmd_explain_local(cfg, opt);
    else if (cons_cmd->parsed()) cmd_consistency(cfg, opt);
    else if (render_cmd->parsed()) cmd_render(cfg, opt);
  } catch (const StageError& e) {
    std::cerr << "shapca: error " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "shapca: error [internal] " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace shapca::cli
