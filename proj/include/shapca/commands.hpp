#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapca/consistency.hpp"
#include "shapca/pipeline.hpp"
#include "shapca/preprocess.hpp"
#include "shapca/render.hpp"
#include "shapca/search.hpp"
#include "shapca/shap.hpp"
#include "shapca/spectra_io.hpp"
#include "shapca/synth.hpp"

namespace shapca::cli {

/// Everything a run needs, read from one JSON file. Relative paths inside
/// the file resolve against the file's directory. Stage seeds are derived
/// from `seed`; seeds written inside sections are ignored.
struct RunConfig {
  std::filesystem::path output_dir = "shapca-out";
  std::uint64_t seed = 0;

  // Dataset CSV; defaults to <output_dir>/data.csv (what `synth` writes).
  std::optional<std::filesystem::path> data_path;
  // Explicit held-out CSV. Without it the data is split by `split`.
  std::optional<std::filesystem::path> holdout_path;
  io::SplitSpec split;

  bool preprocess_enabled = true;
  preprocess::PreprocessConfig preprocess;

  PipelineConfig pipeline;
  std::optional<search::SearchSpec> search;
  shap::ExplainerOptions explainer;
  render::RenderSpec render;

  int consistency_k = 5;
  std::vector<consistency::Method> consistency_methods{consistency::Method::kShapca,
                                                       consistency::Method::kRawShap};

  // Local explanations: listed sample ids, else the first `local_count`
  // held-out samples. `local_class` names the explained class (default:
  // each sample's predicted class).
  std::vector<std::string> local_samples;
  int local_count = 3;
  std::optional<std::string> local_class;
  bool export_tracks = true;

  synth::SynthConfig synth;

  std::filesystem::path data_file() const;
};

// With require_inputs set, configured data files must already exist.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                               bool require_inputs = true);
RunConfig load_run_config(const std::filesystem::path& path, bool require_inputs = true);

/// Failure tagged with the stage it happened in.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct CommandOptions {
  bool force = false;  // overwrite existing artifacts
};

void cmd_synth(const RunConfig& cfg, const CommandOptions& opt);
void cmd_fit(const RunConfig& cfg, const CommandOptions& opt);
void cmd_explain_global(const RunConfig& cfg, const CommandOptions& opt);
void cmd_explain_local(const RunConfig& cfg, const CommandOptions& opt);
void cmd_consistency(const RunConfig& cfg, const CommandOptions& opt);
void cmd_render(const RunConfig& cfg, const CommandOptions& opt);

/// Parses argv, runs one subcommand, and returns the process exit code.
int run(int argc, char** argv);

}  // namespace shapca::cli
