#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "shapca/common.hpp"
#include "shapca/shap.hpp"
#include "shapca/spectra_io.hpp"

namespace shapca::backproject {

/// Class-wise explanation on the original axis.
///
/// psi is the attribution-weighted sum of absolute loadings (importance,
/// drawn as opacity); pc_track the mean normalised component values pushed
/// through the signed loadings (drawn as colour). A class no sample was
/// predicted as is marked `empty` and carries zero tracks.
struct GlobalExplanation {
  int class_index = 0;
  bool empty = false;
  Index n_samples_used = 0;
  Vector mean_phi;  // K
  Vector mean_cvn;  // K
  Vector psi;       // P
  Vector pc_track;  // P
};

/// One sample's attribution toward one class, split by sign.
struct LocalExplanation {
  Index sample_index = 0;
  int class_index = 0;  // the explained class, usually the predicted one
  Vector phi;           // K, attributions toward class_index
  Vector psi_pos;       // P, >= 0
  Vector psi_neg;       // P, <= 0
  Vector pc_track;      // P

  /// psi_pos + psi_neg: the signed importance track.
  Vector psi_total() const { return psi_pos + psi_neg; }
};

/// One entry per class. yhat holds predicted classes, cvn the N x K
/// normalised component values and loadings the K x P matrix W.
std::vector<GlobalExplanation> global_explain(const shap::AttributionTensor& phi,
                                              const std::vector<int>& yhat, const Matrix& cvn,
                                              const Matrix& loadings);

LocalExplanation local_explain(const shap::AttributionTensor& phi, Index i, int c,
                               const Vector& cvn_row, const Matrix& loadings);

struct SanityReport {
  bool pass = true;
  double max_deviation = 0.0;
};

/// Checks psi_pos + psi_neg against phi^T |W| elementwise.
SanityReport combine_sanity(const LocalExplanation& le, const Matrix& loadings,
                            const Vector& phi_row, double tolerance = 1e-12);

nlohmann::json to_json(const GlobalExplanation& ge, const io::SpectralAxis& axis,
                       const std::string& class_name);
nlohmann::json to_json(const LocalExplanation& le, const io::SpectralAxis& axis,
                       const std::string& class_name, const std::string& sample_id);
GlobalExplanation global_from_json(const nlohmann::json& j);
LocalExplanation local_from_json(const nlohmann::json& j);

}  // namespace shapca::backproject
