#include "shapca/backproject.hpp"

#include <cmath>
#include <limits>

namespace shapca::backproject {

namespace {

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::vector<GlobalExplanation> global_explain(const shap::AttributionTensor& phi,
                                              const std::vector<int>& yhat, const Matrix& cvn,
                                              const Matrix& loadings) {
  const Index n = phi.n_samples(), k = phi.n_features();
  if (static_cast<Index>(yhat.size()) != n || cvn.rows() != n)
    throw DimensionMismatch("global_explain: attributions, predictions and component values disagree on N");
  if (cvn.cols() != k || loadings.rows() != k)
    throw DimensionMismatch("global_explain: attributions, component values and loadings disagree on K");
  const Matrix abs_w = loadings.cwiseAbs();

  std::vector<GlobalExplanation> out(static_cast<std::size_t>(phi.n_classes()));
  for (Index c = 0; c < phi.n_classes(); ++c) {
    auto& ge = out[static_cast<std::size_t>(c)];
    ge.class_index = static_cast<int>(c);
    ge.mean_phi = Vector::Zero(k);
    ge.mean_cvn = Vector::Zero(k);
    for (Index i = 0; i < n; ++i) {
      const int y = yhat[static_cast<std::size_t>(i)];
      if (y < 0 || y >= phi.n_classes()) throw InvalidArgument("global_explain: prediction out of class range");
      if (y != c) continue;
      for (Index j = 0; j < k; ++j) ge.mean_phi(j) += phi(i, j, c);
      ge.mean_cvn += cvn.row(i).transpose();
      ++ge.n_samples_used;
    }
    if (ge.n_samples_used == 0) {
      ge.empty = true;
      ge.psi = Vector::Zero(loadings.cols());
      ge.pc_track = Vector::Zero(loadings.cols());
      continue;
    }
    ge.mean_phi /= static_cast<double>(ge.n_samples_used);
    ge.mean_cvn /= static_cast<double>(ge.n_samples_used);
    ge.psi = abs_w.transpose() * ge.mean_phi;
    ge.pc_track = loadings.transpose() * ge.mean_cvn;
  }
  return out;
}

LocalExplanation local_explain(const shap::AttributionTensor& phi, Index i, int c,
                               const Vector& cvn_row, const Matrix& loadings) {
  if (i < 0 || i >= phi.n_samples())
    throw InvalidArgument("local_explain: sample " + std::to_string(i) + " out of range");
  if (c < 0 || c >= phi.n_classes()) throw InvalidArgument("local_explain: class " + std::to_string(c) + " out of range");
  const Index k = phi.n_features();
  if (cvn_row.size() != k || loadings.rows() != k)
    throw DimensionMismatch("local_explain: component row, loadings and attributions disagree on K");

  LocalExplanation le;
  le.sample_index = i;
  le.class_index = c;
  le.phi.resize(k);
  for (Index j = 0; j < k; ++j) le.phi(j) = phi(i, j, c);
  const Matrix abs_w = loadings.cwiseAbs();
  le.psi_pos = abs_w.transpose() * le.phi.cwiseMax(0.0);
  le.psi_neg = abs_w.transpose() * le.phi.cwiseMin(0.0);
  le.pc_track = loadings.transpose() * cvn_row;
  return le;
}

SanityReport combine_sanity(const LocalExplanation& le, const Matrix& loadings,
                            const Vector& phi_row, double tolerance) {
  SanityReport r;
  if (le.psi_pos.size() != loadings.cols() || le.psi_neg.size() != loadings.cols() ||
      phi_row.size() != loadings.rows()) {
    r.pass = false;
    r.max_deviation = std::numeric_limits<double>::infinity();
    return r;
  }
  const Vector expect = loadings.cwiseAbs().transpose() * phi_row;
  r.max_deviation = expect.size() ? (le.psi_pos + le.psi_neg - expect).cwiseAbs().maxCoeff() : 0.0;
  r.pass = r.max_deviation <= tolerance;
  return r;
}

nlohmann::json to_json(const GlobalExplanation& ge, const io::SpectralAxis& axis,
                       const std::string& class_name) {
  return {{"kind", "global"},
          {"class_index", ge.class_index},
          {"class_name", class_name},
          {"empty", ge.empty},
          {"n_samples_used", ge.n_samples_used},
          {"axis", {{"values", axis.values()}, {"unit", axis.unit_label()}}},
          {"mean_phi", to_vec(ge.mean_phi)},
          {"mean_cvn", to_vec(ge.mean_cvn)},
          {"psi", to_vec(ge.psi)},
          {"pc_track", to_vec(ge.pc_track)}};
}

nlohmann::json to_json(const LocalExplanation& le, const io::SpectralAxis& axis,
                       const std::string& class_name, const std::string& sample_id) {
  return {{"kind", "local"},
          {"sample_index", le.sample_index},
          {"sample_id", sample_id},
          {"class_index", le.class_index},
          {"class_name", class_name},
          {"axis", {{"values", axis.values()}, {"unit", axis.unit_label()}}},
          {"phi", to_vec(le.phi)},
          {"psi_pos", to_vec(le.psi_pos)},
          {"psi_neg", to_vec(le.psi_neg)},
          {"pc_track", to_vec(le.pc_track)}};
}

GlobalExplanation global_from_json(const nlohmann::json& j) {
  GlobalExplanation ge;
  ge.class_index = j.at("class_index").get<int>();
  ge.empty = j.at("empty").get<bool>();
  ge.n_samples_used = j.at("n_samples_used").get<Index>();
  ge.mean_phi = from_vec(j.at("mean_phi"));
  ge.mean_cvn = from_vec(j.at("mean_cvn"));
  ge.psi = from_vec(j.at("psi"));
  ge.pc_track = from_vec(j.at("pc_track"));
  if (ge.psi.size() != ge.pc_track.size()) throw DimensionMismatch("global explanation tracks differ in length");
  return ge;
}

LocalExplanation local_from_json(const nlohmann::json& j) {
  LocalExplanation le;
  le.sample_index = j.at("sample_index").get<Index>();
  le.class_index = j.at("class_index").get<int>();
  le.phi = from_vec(j.at("phi"));
  le.psi_pos = from_vec(j.at("psi_pos"));
  le.psi_neg = from_vec(j.at("psi_neg"));
  le.pc_track = from_vec(j.at("pc_track"));
  if (le.psi_pos.size() != le.psi_neg.size() || le.psi_pos.size() != le.pc_track.size())
    throw DimensionMismatch("local explanation tracks differ in length");
  return le;
}

}  // namespace shapca::backproject
