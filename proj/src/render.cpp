#include "shapca/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace shapca::render {

void RenderSpec::validate() const {
  if (width < 100 || height < 80) throw InvalidArgument("render panels must be at least 100 x 80 pixels");
  if (!(alpha_min >= 0.0 && alpha_min < 1.0)) throw InvalidArgument("alpha_min must lie in [0, 1)");
  if (grid_columns < 1) throw InvalidArgument("grid_columns must be positive");
  if (!(stroke_width > 0)) throw InvalidArgument("stroke_width must be positive");
}

nlohmann::json to_json(const RenderSpec& s) {
  return {{"width", s.width},
          {"height", s.height},
          {"alpha_min", s.alpha_min},
          {"layout", s.layout == Layout::kGrid ? "grid" : "single"},
          {"grid_columns", s.grid_columns},
          {"stroke_width", s.stroke_width},
          {"x_label", s.x_label},
          {"y_label", s.y_label}};
}

RenderSpec render_spec_from_json(const nlohmann::json& j) {
  RenderSpec s;
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.alpha_min = j.value("alpha_min", s.alpha_min);
  const auto layout = j.value("layout", std::string("grid"));
  if (layout == "grid") s.layout = Layout::kGrid;
  else if (layout == "single") s.layout = Layout::kSingle;
  else throw InvalidArgument("layout must be 'grid' or 'single'");
  s.grid_columns = j.value("grid_columns", s.grid_columns);
  s.stroke_width = j.value("stroke_width", s.stroke_width);
  s.x_label = j.value("x_label", s.x_label);
  s.y_label = j.value("y_label", s.y_label);
  s.validate();
  return s;
}

Rgb diverging_color(double t) {
  if (std::isnan(t)) t = 0.0;
  t = std::clamp(t, -1.0, 1.0);
  // Linear blends from a neutral near-white to saturated red / blue.
  constexpr double neutral[3] = {247, 247, 247};
  constexpr double red[3] = {178, 24, 43};
  constexpr double blue[3] = {33, 102, 172};
  const double* end = t >= 0 ? red : blue;
  const double a = std::abs(t);
  Rgb c;
  c.r = static_cast<int>(std::lround(neutral[0] + a * (end[0] - neutral[0])));
  c.g = static_cast<int>(std::lround(neutral[1] + a * (end[1] - neutral[1])));
  c.b = static_cast<int>(std::lround(neutral[2] + a * (end[2] - neutral[2])));
  return c;
}

double opacity(double value, double max_abs, double alpha_min) {
  if (!(max_abs > 0) || !std::isfinite(value)) return alpha_min;
  return alpha_min + (1.0 - alpha_min) * std::min(1.0, std::abs(value) / max_abs);
}

namespace {

std::string fmt(double v, int digits = 2) {
  char buf[64];
  if (std::abs(v) < 0.5 * std::pow(10.0, -digits)) v = 0.0;  // no "-0.00"
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string axis_label(const io::SpectralAxis& axis, const RenderSpec& spec) {
  if (!spec.x_label.empty()) return spec.x_label;
  return axis.unit_label().empty() ? "Axis" : "Axis (" + axis.unit_label() + ")";
}

struct Panel {
  double x0, y0, w, h;  // outer box
  std::string title;
};

constexpr double kLeft = 64, kRight = 16, kTop = 28, kBottom = 40;

// Draws one panel: frame, labels, grey curve, and the tinted overlay whose
// alpha follows |importance| and colour follows the value track.
void draw_panel(std::ostringstream& out, const Panel& p, const io::SpectralAxis& axis,
                const Vector& curve, const Vector* importance, const Vector* values,
                const RenderSpec& spec) {
  const double px = p.x0 + kLeft, py = p.y0 + kTop;
  const double pw = p.w - kLeft - kRight, ph = p.h - kTop - kBottom;
  const double xmin = axis[0], xmax = axis[axis.size() - 1];
  double ymin = curve.size() ? curve.minCoeff() : 0.0, ymax = curve.size() ? curve.maxCoeff() : 1.0;
  if (!(ymax > ymin)) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const auto sx = [&](double v) { return px + (v - xmin) / (xmax - xmin) * pw; };
  const auto sy = [&](double v) { return py + ph - (v - ymin) / (ymax - ymin) * ph; };

  out << "<g>\n";
  out << "<rect x=\"" << fmt(px) << "\" y=\"" << fmt(py) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << fmt(p.x0 + p.w / 2) << "\" y=\"" << fmt(p.y0 + 18)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << escape(p.title) << "</text>\n";
  out << "<text x=\"" << fmt(px + pw / 2) << "\" y=\"" << fmt(p.y0 + p.h - 6)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << escape(axis_label(axis, spec))
      << "</text>\n";
  out << "<text x=\"" << fmt(p.x0 + 14) << "\" y=\"" << fmt(py + ph / 2) << "\" transform=\"rotate(-90 "
      << fmt(p.x0 + 14) << ' ' << fmt(py + ph / 2)
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << escape(spec.y_label)
      << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = xmin + (xmax - xmin) * t / 4.0;
    out << "<text x=\"" << fmt(sx(v)) << "\" y=\"" << fmt(py + ph + 14)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(v, 1) << "</text>\n";
  }

  if (!importance) {
    out << "<text x=\"" << fmt(px + pw / 2) << "\" y=\"" << fmt(py + ph / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#666666\">no samples</text>\n";
    out << "</g>\n";
    return;
  }

  out << "<polyline fill=\"none\" stroke=\"#9a9a9a\" stroke-width=\"1\" points=\"";
  for (Index j = 0; j < curve.size(); ++j) out << (j ? " " : "") << fmt(sx(axis[j])) << ',' << fmt(sy(curve(j)));
  out << "\"/>\n";

  const double imax = importance->cwiseAbs().maxCoeff();
  const double vmax = values->cwiseAbs().maxCoeff();
  const Index n = curve.size();
  for (Index j = 0; j < n; ++j) {
    // Segment from the midpoint with the previous sample to the midpoint with the next.
    const double xl = j > 0 ? 0.5 * (axis[j - 1] + axis[j]) : axis[j];
    const double yl = j > 0 ? 0.5 * (curve(j - 1) + curve(j)) : curve(j);
    const double xr = j + 1 < n ? 0.5 * (axis[j] + axis[j + 1]) : axis[j];
    const double yr = j + 1 < n ? 0.5 * (curve(j) + curve(j + 1)) : curve(j);
    const Rgb c = diverging_color(vmax > 0 ? (*values)(j) / vmax : 0.0);
    const double a = opacity((*importance)(j), imax, spec.alpha_min);
    out << "<polyline fill=\"none\" stroke=\"rgb(" << c.r << ',' << c.g << ',' << c.b << ")\" stroke-opacity=\""
        << fmt(a, 4) << "\" stroke-width=\"" << fmt(spec.stroke_width) << "\" stroke-linecap=\"butt\" points=\""
        << fmt(sx(xl)) << ',' << fmt(sy(yl)) << ' ' << fmt(sx(axis[j])) << ',' << fmt(sy(curve(j))) << ' '
        << fmt(sx(xr)) << ',' << fmt(sy(yr)) << "\"/>\n";
  }
  out << "</g>\n";
}

void open_document(std::ostringstream& out, double w, double h) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(w, 0) << "\" height=\""
      << fmt(h, 0) << "\" viewBox=\"0 0 " << fmt(w, 0) << ' ' << fmt(h, 0) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << fmt(w, 0) << "\" height=\"" << fmt(h, 0) << "\" fill=\"#ffffff\"/>\n";
}

void check_track(const Vector& v, Index p, const char* what) {
  if (v.size() != p)
    throw DimensionMismatch(std::string(what) + " has length " + std::to_string(v.size()) + ", axis has " +
                            std::to_string(p));
}

}  // namespace

std::vector<std::string> render_global(const std::vector<backproject::GlobalExplanation>& ge,
                                       const io::SpectralAxis& axis, const Matrix& class_means,
                                       const std::vector<std::string>& class_names,
                                       const RenderSpec& spec) {
  spec.validate();
  const Index p = axis.size();
  if (class_means.rows() != static_cast<Index>(ge.size()) || class_names.size() != ge.size())
    throw DimensionMismatch("render_global: explanations, class means and class names disagree on C");
  if (class_means.cols() != p) throw DimensionMismatch("render_global: class means do not match the axis");
  for (const auto& g : ge) {
    if (g.empty) continue;
    check_track(g.psi, p, "psi");
    check_track(g.pc_track, p, "pc_track");
  }

  const auto panel_title = [&](std::size_t c) {
    return "Class " + class_names[c] + " (n=" + std::to_string(ge[c].n_samples_used) + ")";
  };
  const auto draw = [&](std::ostringstream& out, const Panel& panel, std::size_t c) {
    const Vector curve = class_means.row(static_cast<Index>(c)).transpose();
    if (ge[c].empty) draw_panel(out, panel, axis, curve, nullptr, nullptr, spec);
    else draw_panel(out, panel, axis, curve, &ge[c].psi, &ge[c].pc_track, spec);
  };

  std::vector<std::string> docs;
  if (spec.layout == Layout::kSingle) {
    docs.resize(ge.size());
    parallel::parallel_for(ge.size(), [&](std::size_t c) {
      std::ostringstream out;
      open_document(out, spec.width, spec.height);
      draw(out, Panel{0, 0, static_cast<double>(spec.width), static_cast<double>(spec.height), panel_title(c)}, c);
      out << "</svg>\n";
      docs[c] = out.str();
    });
    return docs;
  }
  const auto cols = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(spec.grid_columns),
                                                                   std::max<std::size_t>(1, ge.size())));
  const std::size_t rows = (ge.size() + cols - 1) / cols;
  std::ostringstream out;
  open_document(out, static_cast<double>(cols) * spec.width, static_cast<double>(std::max<std::size_t>(rows, 1)) * spec.height);
  for (std::size_t c = 0; c < ge.size(); ++c) {
    const Panel panel{static_cast<double>(c % cols) * spec.width, static_cast<double>(c / cols) * spec.height,
                      static_cast<double>(spec.width), static_cast<double>(spec.height), panel_title(c)};
    draw(out, panel, c);
  }
  out << "</svg>\n";
  docs.push_back(out.str());
  return docs;
}

std::string render_local(const backproject::LocalExplanation& le, const io::SpectralAxis& axis,
                         const Vector& spectrum, const std::string& class_name,
                         const std::string& sample_id, const RenderSpec& spec) {
  spec.validate();
  const Index p = axis.size();
  check_track(spectrum, p, "spectrum");
  check_track(le.psi_pos, p, "psi_pos");
  check_track(le.psi_neg, p, "psi_neg");
  check_track(le.pc_track, p, "pc_track");
  const Vector neg = le.psi_neg.cwiseAbs();
  std::ostringstream out;
  const double w = spec.width, h = spec.height;
  open_document(out, w, 2 * h);
  draw_panel(out, Panel{0, 0, w, h, "Sample " + sample_id + ": evidence for " + class_name}, axis, spectrum,
             &le.psi_pos, &le.pc_track, spec);
  draw_panel(out, Panel{0, h, w, h, "Sample " + sample_id + ": evidence against " + class_name}, axis, spectrum,
             &neg, &le.pc_track, spec);
  out << "</svg>\n";
  return out.str();
}

std::string tracks_csv(const io::SpectralAxis& axis,
                       const std::vector<std::pair<std::string, Vector>>& tracks) {
  for (const auto& [name, v] : tracks) check_track(v, axis.size(), name.c_str());
  std::ostringstream out;
  out.precision(17);
  out << "axis";
  for (const auto& t : tracks) out << ',' << t.first;
  out << '\n';
  for (Index j = 0; j < axis.size(); ++j) {
    out << axis[j];
    for (const auto& t : tracks) out << ',' << t.second(j);
    out << '\n';
  }
  return out.str();
}

}  // namespace shapca::render
