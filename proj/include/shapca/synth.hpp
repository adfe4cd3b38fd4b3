#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "shapca/common.hpp"
#include "shapca/spectra_io.hpp"

namespace shapca::synth {

/// Spectra built as sums of flat-topped bands. Each band spans
/// `block_width` axis points that move together, so features inside a band
/// are duplicates up to the additive noise. Band amplitudes are latent
/// factors: a shared base, a class-dependent shift on the first
/// `n_informative` bands, a per-group offset and per-sample spread.
struct SynthConfig {
  int n_samples = 300;
  int n_features = 200;
  int n_classes = 2;
  int n_blocks = 8;
  int block_width = 12;
  int n_informative = 4;
  double class_shift = 0.5;    // class means sit +-shift around the base amplitude
  double amplitude_sd = 0.25;  // per-sample spread of each band amplitude
  double group_sd = 0.05;      // per-group amplitude offset
  double noise = 0.01;         // per-point additive noise
  int samples_per_group = 5;
  double axis_min = 400.0;
  double axis_max = 1800.0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthResult {
  io::SpectraDataset dataset;
  Matrix latent;     // N x n_blocks band amplitudes
  Matrix templates;  // n_blocks x P unit-height band shapes
};

SynthResult generate(const SynthConfig& cfg);

/// sample_id,group_id,label,block_0,... (one row per spectrum).
std::string latent_csv(const SynthResult& r);
/// axis,block_0,... (one row per axis point).
std::string templates_csv(const SynthResult& r);

}  // namespace shapca::synth
