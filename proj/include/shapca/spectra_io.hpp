#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shapca/common.hpp"

namespace shapca::io {

/// Ordered spectral positions (wavenumbers or wavelengths) indexing the
/// columns of a dataset. Strictly increasing, at least two points.
class SpectralAxis {
 public:
  SpectralAxis(std::vector<double> values, std::string unit_label = "cm^-1");

  const std::vector<double>& values() const { return values_; }
  const std::string& unit_label() const { return unit_; }
  Index size() const { return static_cast<Index>(values_.size()); }
  double operator[](Index j) const { return values_[static_cast<std::size_t>(j)]; }

  bool operator==(const SpectralAxis&) const = default;

 private:
  std::vector<double> values_;
  std::string unit_;
};

/// N spectra over a shared axis with class labels and optional group ids.
///
/// Labels index into class_names. Groups, when present, identify the unit
/// of leakage-free splitting (a patient, a specimen).
class SpectraDataset {
 public:
  SpectraDataset(SpectralAxis axis, Matrix intensities, std::vector<int> labels,
                 std::vector<std::string> class_names,
                 std::optional<std::vector<std::string>> groups = std::nullopt,
                 std::vector<std::string> sample_ids = {});

  const SpectralAxis& axis() const { return axis_; }
  const Matrix& intensities() const { return x_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::optional<std::vector<std::string>>& groups() const { return groups_; }
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }

  Index n_samples() const { return x_.rows(); }
  Index n_features() const { return x_.cols(); }
  int n_classes() const { return static_cast<int>(class_names_.size()); }

  /// Rows `rows` in the given order; axis and class names are shared.
  SpectraDataset subset(const std::vector<Index>& rows) const;

  /// Same metadata with replaced intensities (row count must match) and a
  /// possibly different axis.
  SpectraDataset with_intensities(SpectralAxis axis, Matrix intensities) const;

 private:
  SpectralAxis axis_;
  Matrix x_;
  std::vector<int> labels_;
  std::vector<std::string> class_names_;
  std::optional<std::vector<std::string>> groups_;
  std::vector<std::string> sample_ids_;
};

enum class ParseErrorKind {
  kMissingColumn,
  kRaggedRow,
  kNonNumericCell,
  kNonMonotoneAxis,
  kEmpty,
};

/// Raised by load_csv. `row` is the 1-based line number in the file and
/// `column` the 0-based field index (or -1 when the whole row is at fault).
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, long row, long column, const std::string& what);
  ParseErrorKind kind() const { return kind_; }
  long row() const { return row_; }
  long column() const { return column_; }

 private:
  ParseErrorKind kind_;
  long row_;
  long column_;
};

// CSV layout: header `sample_id,group_id,label,<axis values...>`, then one
// row per spectrum. `#` lines are comments; the writer emits a
// `# classes=a,b,...` comment that the reader uses to fix class order (else
// classes are ordered by first appearance), and `# unit=...` for the axis.
SpectraDataset load_csv(const std::filesystem::path& path);
SpectraDataset parse_csv(const std::string& text);
void save_csv(const SpectraDataset& ds, const std::filesystem::path& path);
std::string format_csv(const SpectraDataset& ds);

nlohmann::json to_json(const SpectraDataset& ds);
SpectraDataset dataset_from_json(const nlohmann::json& j);

enum class SplitMode { kGroupLevel, kSampleLevelStratified };

struct SplitSpec {
  SplitMode mode = SplitMode::kGroupLevel;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> test;
};

SplitIndices split_indices(const SpectraDataset& ds, const SplitSpec& spec);
std::pair<SpectraDataset, SpectraDataset> split(const SpectraDataset& ds, const SplitSpec& spec);

enum class FoldMode { kGroupKFold, kStratifiedKFold };

struct Fold {
  std::vector<Index> train;
  std::vector<Index> test;
};

std::vector<Fold> kfold_indices(const SpectraDataset& ds, int k, FoldMode mode, std::uint64_t seed);

// Same as above without a dataset wrapper, for callers holding only labels
// and groups (groups may be empty for stratified mode).
std::vector<Fold> kfold_indices(const std::vector<int>& labels,
                                const std::vector<std::string>& groups, int k, FoldMode mode,
                                std::uint64_t seed);

}  // namespace shapca::io
