#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shapca/backproject.hpp"
#include "shapca/common.hpp"
#include "shapca/spectra_io.hpp"

namespace shapca::render {

enum class Layout { kSingle, kGrid };

struct RenderSpec {
  int width = 900;         // pixels per panel
  int height = 320;        // pixels per panel
  double alpha_min = 0.05; // opacity at zero importance
  Layout layout = Layout::kGrid;
  int grid_columns = 2;
  double stroke_width = 3.0;
  std::string x_label;     // empty: derived from the axis unit
  std::string y_label = "Intensity (a.u.)";

  void validate() const;
};

nlohmann::json to_json(const RenderSpec& s);
RenderSpec render_spec_from_json(const nlohmann::json& j);

struct Rgb {
  int r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Red for t > 0, blue for t < 0, near-white at 0. t is clipped to [-1, 1].
Rgb diverging_color(double t);

/// alpha_min + (1 - alpha_min) * |value| / max_abs, with max_abs <= 0
/// giving alpha_min.
double opacity(double value, double max_abs, double alpha_min);

/// One SVG per class (single layout) or one grid document. class_means holds
/// the grey reference curve per class (C x P).
std::vector<std::string> render_global(const std::vector<backproject::GlobalExplanation>& ge,
                                       const io::SpectralAxis& axis, const Matrix& class_means,
                                       const std::vector<std::string>& class_names,
                                       const RenderSpec& spec);

/// Two stacked panels: supporting evidence (psi_pos) over opposing evidence
/// (|psi_neg|), both coloured by the same pc_track.
std::string render_local(const backproject::LocalExplanation& le, const io::SpectralAxis& axis,
                         const Vector& spectrum, const std::string& class_name,
                         const std::string& sample_id, const RenderSpec& spec);

/// `axis,<name>...` columns for external plotting.
std::string tracks_csv(const io::SpectralAxis& axis,
                       const std::vector<std::pair<std::string, Vector>>& tracks);

}  // namespace shapca::render
