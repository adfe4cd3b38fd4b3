#include "shapca/synth.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace shapca::synth {

void SynthConfig::validate() const {
  if (n_samples < 4) throw InvalidArgument("synth: n_samples must be at least 4");
  if (n_classes < 2) throw InvalidArgument("synth: n_classes must be at least 2");
  if (n_samples < 2 * n_classes) throw InvalidArgument("synth: need at least two samples per class");
  if (n_blocks < 1 || block_width < 1) throw InvalidArgument("synth: n_blocks and block_width must be positive");
  if (n_features < 2) throw InvalidArgument("synth: n_features must be at least 2");
  if (static_cast<long>(n_blocks) * (block_width + 2) > n_features)
    throw InvalidArgument("synth: " + std::to_string(n_blocks) + " blocks of width " + std::to_string(block_width) +
                          " do not fit in " + std::to_string(n_features) + " features");
  if (n_informative < 0 || n_informative > n_blocks) throw InvalidArgument("synth: n_informative out of range");
  if (!(noise >= 0) || !(amplitude_sd >= 0) || !(group_sd >= 0) || !(class_shift >= 0))
    throw InvalidArgument("synth: noise and spreads must be non-negative");
  if (samples_per_group < 1) throw InvalidArgument("synth: samples_per_group must be positive");
  if (!(axis_max > axis_min)) throw InvalidArgument("synth: axis_max must exceed axis_min");
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_samples", c.n_samples},       {"n_features", c.n_features},
          {"n_classes", c.n_classes},       {"n_blocks", c.n_blocks},
          {"block_width", c.block_width},   {"n_informative", c.n_informative},
          {"class_shift", c.class_shift},   {"amplitude_sd", c.amplitude_sd},
          {"group_sd", c.group_sd},         {"noise", c.noise},
          {"samples_per_group", c.samples_per_group},
          {"axis_min", c.axis_min},         {"axis_max", c.axis_max},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.n_features = j.value("n_features", c.n_features);
  c.n_classes = j.value("n_classes", c.n_classes);
  c.n_blocks = j.value("n_blocks", c.n_blocks);
  c.block_width = j.value("block_width", c.block_width);
  c.n_informative = j.value("n_informative", c.n_informative);
  c.class_shift = j.value("class_shift", c.class_shift);
  c.amplitude_sd = j.value("amplitude_sd", c.amplitude_sd);
  c.group_sd = j.value("group_sd", c.group_sd);
  c.noise = j.value("noise", c.noise);
  c.samples_per_group = j.value("samples_per_group", c.samples_per_group);
  c.axis_min = j.value("axis_min", c.axis_min);
  c.axis_max = j.value("axis_max", c.axis_max);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n_samples, p = cfg.n_features, b = cfg.n_blocks;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> axis(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j)
    axis[static_cast<std::size_t>(j)] = cfg.axis_min + (cfg.axis_max - cfg.axis_min) * static_cast<double>(j) / static_cast<double>(p - 1);

  // Blocks are centred in equal slots; shoulders fall off over one point on
  // each side so neighbouring blocks never touch.
  Matrix templates = Matrix::Zero(b, p);
  const double slot = static_cast<double>(p) / static_cast<double>(b);
  for (Index k = 0; k < b; ++k) {
    const auto start = static_cast<Index>(std::floor(slot * static_cast<double>(k) + 0.5 * (slot - cfg.block_width)));
    for (Index j = 0; j < cfg.block_width; ++j) templates(k, start + j) = 1.0;
    if (start - 1 >= 0) templates(k, start - 1) = 0.5;
    if (start + cfg.block_width < p) templates(k, start + cfg.block_width) = 0.5;
  }

  // Class means: informative blocks shift up or down per class.
  Matrix class_means = Matrix::Constant(cfg.n_classes, b, 2.0);
  for (Index k = 0; k < std::min<Index>(cfg.n_informative, b); ++k) {
    for (int c = 0; c < cfg.n_classes; ++c) {
      double s;
      if (cfg.n_classes == 2) s = (c == 0) == (k % 2 == 0) ? 1.0 : -1.0;
      else s = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
      class_means(c, k) += cfg.class_shift * s;
    }
  }

  const int n_groups = (cfg.n_samples + cfg.samples_per_group - 1) / cfg.samples_per_group;
  Matrix group_offset(n_groups, b);
  for (Index g = 0; g < n_groups; ++g)
    for (Index k = 0; k < b; ++k) group_offset(g, k) = cfg.group_sd * gauss(rng);

  Matrix latent(n, b);
  Matrix x(n, p);
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<std::string> groups(static_cast<std::size_t>(n)), ids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % cfg.n_classes);
    const Index g = i / cfg.samples_per_group;
    labels[static_cast<std::size_t>(i)] = c;
    groups[static_cast<std::size_t>(i)] = "g" + std::to_string(g);
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04ld", static_cast<long>(i));
    ids[static_cast<std::size_t>(i)] = buf;
    for (Index k = 0; k < b; ++k)
      latent(i, k) = std::max(0.1, class_means(c, k) + group_offset(g, k) + cfg.amplitude_sd * gauss(rng));
    x.row(i) = latent.row(i) * templates;
    if (cfg.noise > 0)
      for (Index j = 0; j < p; ++j) x(i, j) += cfg.noise * gauss(rng);
  }

  std::vector<std::string> class_names;
  for (int c = 0; c < cfg.n_classes; ++c) class_names.push_back("class" + std::to_string(c));
  io::SpectraDataset ds(io::SpectralAxis(std::move(axis), "cm^-1"), std::move(x), std::move(labels),
                        std::move(class_names), std::move(groups), std::move(ids));
  return SynthResult{std::move(ds), std::move(latent), std::move(templates)};
}

namespace {

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string latent_csv(const SynthResult& r) {
  std::ostringstream out;
  out << "sample_id,group_id,label";
  for (Index k = 0; k < r.latent.cols(); ++k) out << ",block_" << k;
  out << '\n';
  const auto& ds = r.dataset;
  for (Index i = 0; i < ds.n_samples(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    out << ds.sample_ids()[si] << ',' << (ds.groups() ? (*ds.groups())[si] : "") << ','
        << ds.class_names()[static_cast<std::size_t>(ds.labels()[si])];
    for (Index k = 0; k < r.latent.cols(); ++k) out << ',' << num(r.latent(i, k));
    out << '\n';
  }
  return out.str();
}

std::string templates_csv(const SynthResult& r) {
  std::ostringstream out;
  out << "axis";
  for (Index k = 0; k < r.templates.rows(); ++k) out << ",block_" << k;
  out << '\n';
  for (Index j = 0; j < r.templates.cols(); ++j) {
    out << num(r.dataset.axis()[j]);
    for (Index k = 0; k < r.templates.rows(); ++k) out << ',' << num(r.templates(k, j));
    out << '\n';
  }
  return out.str();
}

}  // namespace shapca::synth
