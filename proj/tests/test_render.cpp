#include <doctest.h>

#include <regex>

#include "oracles.hpp"
#include "shapca/render.hpp"

using namespace shapca;
using namespace shapca::render;

namespace {

// stroke-opacity values of each <g> panel, in document order.
std::vector<std::vector<double>> panel_alphas(const std::string& svg) {
  std::vector<std::vector<double>> out;
  static const std::regex re("stroke-opacity=\"([0-9.]+)\"");
  std::size_t pos = 0;
  while ((pos = svg.find("<g>", pos)) != std::string::npos) {
    const auto end = svg.find("</g>", pos);
    const std::string body = svg.substr(pos, end - pos);
    std::vector<double> a;
    for (std::sregex_iterator it(body.begin(), body.end(), re), e; it != e; ++it) a.push_back(std::stod((*it)[1]));
    out.push_back(std::move(a));
    pos = end;
  }
  return out;
}

std::vector<std::string> panel_colors(const std::string& svg) {
  std::vector<std::string> out;
  static const std::regex re("stroke=\"(rgb\\([0-9,]+\\))\"");
  for (std::sregex_iterator it(svg.begin(), svg.end(), re), e; it != e; ++it) out.push_back((*it)[1]);
  return out;
}

io::SpectralAxis axis6() { return io::SpectralAxis({400, 500, 600, 700, 800, 900}); }

backproject::GlobalExplanation global_with(Vector psi, Vector pc) {
  backproject::GlobalExplanation g;
  g.n_samples_used = 3;
  g.psi = std::move(psi);
  g.pc_track = std::move(pc);
  return g;
}

backproject::LocalExplanation local_from_phi(const Vector& phi, const Matrix& w, const Vector& cvn) {
  backproject::LocalExplanation le;
  le.phi = phi;
  le.psi_pos = w.cwiseAbs().transpose() * phi.cwiseMax(0.0);
  le.psi_neg = w.cwiseAbs().transpose() * phi.cwiseMin(0.0);
  le.pc_track = w.transpose() * cvn;
  return le;
}

}  // namespace

TEST_CASE("diverging colour endpoints and sign fidelity") {
  CHECK(diverging_color(1.0) == Rgb{178, 24, 43});
  CHECK(diverging_color(-1.0) == Rgb{33, 102, 172});
  CHECK(diverging_color(0.0) == Rgb{247, 247, 247});
  CHECK(diverging_color(5.0) == diverging_color(1.0));
  for (double t = 0.05; t <= 1.0; t += 0.05) {
    const auto r = diverging_color(t), b = diverging_color(-t);
    CHECK(r.r > r.b);  // red half
    CHECK(b.b > b.r);  // blue half
  }
}

TEST_CASE("opacity is monotone in magnitude") {
  CHECK(opacity(0.0, 2.0, 0.05) == 0.05);
  CHECK(opacity(-2.0, 2.0, 0.05) == 1.0);
  CHECK(opacity(1.0, 0.0, 0.1) == 0.1);
  double prev = 0;
  for (double v = 0; v <= 3; v += 0.1) {
    const double a = opacity(v, 3.0, 0.05);
    CHECK(a >= prev);
    prev = a;
  }
}

TEST_CASE("zero importance renders at alpha_min") {
  RenderSpec spec;
  spec.layout = Layout::kSingle;
  const auto svg = render_global({global_with(Vector::Zero(6), Vector::Zero(6))}, axis6(),
                                 Matrix::Random(1, 6), {"a"}, spec);
  REQUIRE(svg.size() == 1);
  const auto alphas = panel_alphas(svg[0]);
  REQUIRE(alphas.size() == 1);
  REQUIRE(alphas[0].size() == 6);
  for (double a : alphas[0]) CHECK(a == 0.05);
  CHECK(svg[0].find("#9a9a9a") != std::string::npos);  // grey reference curve
}

TEST_CASE("positive value maximum is drawn pure red") {
  Vector pc = Vector::Zero(6);
  pc(2) = 0.7;
  pc(4) = -0.2;
  const auto svg = render_global({global_with(Vector::Ones(6), pc)}, axis6(), Matrix::Random(1, 6), {"a"},
                                 RenderSpec{});
  const auto colors = panel_colors(svg[0]);
  REQUIRE(colors.size() == 6);
  CHECK(colors[2] == "rgb(178,24,43)");
  CHECK(colors[0] == "rgb(247,247,247)");
}

TEST_CASE("alpha follows importance within a panel") {
  const Vector psi{{0.0, 0.5, 1.0, -2.0, 0.25, 1.5}};
  const auto svg = render_global({global_with(psi, Vector::Ones(6))}, axis6(), Matrix::Random(1, 6), {"a"},
                                 RenderSpec{});
  const auto a = panel_alphas(svg[0])[0];
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (std::abs(psi(i)) > std::abs(psi(j))) CHECK(a[static_cast<std::size_t>(i)] >= a[static_cast<std::size_t>(j)]);
  CHECK(a[3] == 1.0);
}

TEST_CASE("global render is deterministic, valid and self contained") {
  std::vector<backproject::GlobalExplanation> ge{global_with(Vector::LinSpaced(6, 0, 1), Vector::LinSpaced(6, -1, 1)),
                                                 global_with(Vector::Zero(6), Vector::Zero(6)),
                                                 global_with(Vector::Ones(6), Vector::Ones(6))};
  ge[1].empty = true;
  ge[1].n_samples_used = 0;
  const Matrix means = Matrix::Random(3, 6);
  const std::vector<std::string> names{"a<b", "empty", "c&d"};
  const auto a = render_global(ge, axis6(), means, names, RenderSpec{});
  const auto b = render_global(ge, axis6(), means, names, RenderSpec{});
  REQUIRE(a.size() == 1);
  CHECK(a == b);
  std::string why;
  CHECK_MESSAGE(oracle::well_formed_xml(a[0], &why), why);
  CHECK(a[0].find("no samples") != std::string::npos);
  CHECK(a[0].find("href") == std::string::npos);
  CHECK(a[0].find("url(") == std::string::npos);

  RenderSpec single;
  single.layout = Layout::kSingle;
  const auto docs = render_global(ge, axis6(), means, names, single);
  CHECK(docs.size() == 3);
  for (const auto& d : docs) CHECK(oracle::well_formed_xml(d));
  CHECK_THROWS_AS(render_global(ge, axis6(), Matrix::Random(2, 6), names, single), DimensionMismatch);
}

TEST_CASE("local render: sign swap exchanges the panels") {
  Matrix w(3, 6);
  w << 1, 0.5, 0, 0, 0, 0,
       0, 0, 2, -1, 0, 0,
       0, 0, 0, 0.3, 0.3, -1;
  const Vector phi{{0.4, -0.7, 0.2}};
  const Vector cvn{{0.5, -0.5, 1.0}};
  const auto le = local_from_phi(phi, w, cvn);
  const auto flipped = local_from_phi(-phi, w, cvn);
  const Vector spectrum = Vector::LinSpaced(6, 1, 2);
  const auto s1 = render_local(le, axis6(), spectrum, "x", "s1", RenderSpec{});
  const auto s2 = render_local(flipped, axis6(), spectrum, "x", "s1", RenderSpec{});
  CHECK(oracle::well_formed_xml(s1));
  const auto a1 = panel_alphas(s1), a2 = panel_alphas(s2);
  REQUIRE(a1.size() == 2);
  CHECK(a1[0] == a2[1]);
  CHECK(a1[1] == a2[0]);
  CHECK(s1 == render_local(le, axis6(), spectrum, "x", "s1", RenderSpec{}));
}

TEST_CASE("local render: all-positive attributions leave the against panel at alpha_min") {
  const Matrix w = Matrix::Identity(6, 6);
  const auto le = local_from_phi(Vector::LinSpaced(6, 0.1, 0.6), w, Vector::Ones(6));
  const auto a = panel_alphas(render_local(le, axis6(), Vector::Ones(6), "x", "s", RenderSpec{}));
  for (double v : a[1]) CHECK(v == 0.05);
  CHECK(a[0].back() == 1.0);
}

TEST_CASE("render spec validation and tracks csv") {
  RenderSpec s;
  s.alpha_min = 1.0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = RenderSpec{};
  s.grid_columns = 3;
  CHECK(render_spec_from_json(to_json(s)).grid_columns == 3);
  const auto csv = tracks_csv(io::SpectralAxis({1, 2}), {{"psi", Vector{{0.5, 0.25}}}});
  CHECK(csv == "axis,psi\n1,0.5\n2,0.25\n");
  CHECK_THROWS_AS(tracks_csv(io::SpectralAxis({1, 2}), {{"psi", Vector::Zero(3)}}), DimensionMismatch);
}
