#include "shapca/spectra_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace shapca::io {

SpectralAxis::SpectralAxis(std::vector<double> values, std::string unit_label)
    : values_(std::move(values)), unit_(std::move(unit_label)) {
  if (values_.size() < 2) throw InvalidArgument("spectral axis needs at least 2 points");
  for (std::size_t j = 0; j < values_.size(); ++j) {
    if (!std::isfinite(values_[j])) throw InvalidArgument("spectral axis value is not finite");
    if (j > 0 && !(values_[j] > values_[j - 1]))
      throw InvalidArgument("spectral axis must be strictly increasing (position " +
                            std::to_string(j) + ")");
  }
}

SpectraDataset::SpectraDataset(SpectralAxis axis, Matrix intensities, std::vector<int> labels,
                               std::vector<std::string> class_names,
                               std::optional<std::vector<std::string>> groups,
                               std::vector<std::string> sample_ids)
    : axis_(std::move(axis)),
      x_(std::move(intensities)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)),
      groups_(std::move(groups)),
      sample_ids_(std::move(sample_ids)) {
  const auto n = static_cast<std::size_t>(x_.rows());
  if (x_.cols() != axis_.size())
    throw DimensionMismatch("intensity columns (" + std::to_string(x_.cols()) +
                            ") != axis length (" + std::to_string(axis_.size()) + ")");
  if (!x_.allFinite()) throw InvalidArgument("intensities contain non-finite values");
  if (labels_.size() != n) throw DimensionMismatch("labels length != number of spectra");
  if (class_names_.size() < 2) throw InvalidArgument("dataset needs at least 2 classes");
  for (int l : labels_)
    if (l < 0 || l >= static_cast<int>(class_names_.size()))
      throw InvalidArgument("label index " + std::to_string(l) + " out of range");
  if (groups_ && groups_->size() != n) throw DimensionMismatch("groups length != number of spectra");
  if (sample_ids_.empty()) {
    sample_ids_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) sample_ids_.push_back("s" + std::to_string(i));
  } else if (sample_ids_.size() != n) {
    throw DimensionMismatch("sample_ids length != number of spectra");
  }
}

SpectraDataset SpectraDataset::subset(const std::vector<Index>& rows) const {
  Matrix x(static_cast<Index>(rows.size()), x_.cols());
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::optional<std::vector<std::string>> groups;
  if (groups_) groups.emplace();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index i = rows[r];
    if (i < 0 || i >= x_.rows()) throw InvalidArgument("subset row out of range");
    x.row(static_cast<Index>(r)) = x_.row(i);
    labels.push_back(labels_[static_cast<std::size_t>(i)]);
    ids.push_back(sample_ids_[static_cast<std::size_t>(i)]);
    if (groups_) groups->push_back((*groups_)[static_cast<std::size_t>(i)]);
  }
  return SpectraDataset(axis_, std::move(x), std::move(labels), class_names_, std::move(groups),
                        std::move(ids));
}

SpectraDataset SpectraDataset::with_intensities(SpectralAxis axis, Matrix intensities) const {
  if (intensities.rows() != x_.rows()) throw DimensionMismatch("row count changed");
  return SpectraDataset(std::move(axis), std::move(intensities), labels_, class_names_, groups_,
                        sample_ids_);
}

ParseError::ParseError(ParseErrorKind kind, long row, long column, const std::string& what)
    : Error(what + " (line " + std::to_string(row) +
            (column >= 0 ? ", column " + std::to_string(column) : std::string()) + ")"),
      kind_(kind),
      row_(row),
      column_(column) {}

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    std::string_view f = line.substr(start, pos == std::string_view::npos ? line.npos : pos - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
    out.emplace_back(f);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void check_plain_field(const std::string& f) {
  if (f.find_first_of(",\n\r") != std::string::npos)
    throw InvalidArgument("CSV field contains a separator or newline: '" + f + "'");
}

}  // namespace

SpectraDataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  std::optional<std::vector<std::string>> declared_classes;
  std::string unit = "cm^-1";
  std::optional<std::vector<double>> axis;
  long header_line = 0;

  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids, groups, label_text;
  std::vector<long> row_lines;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') {
      const std::string_view body = std::string_view(line).substr(1);
      const auto strip = body.find_first_not_of(' ');
      if (strip == std::string_view::npos) continue;
      const auto rest = body.substr(strip);
      if (rest.starts_with("classes=")) {
        declared_classes = split_fields(rest.substr(8));
      } else if (rest.starts_with("unit=")) {
        unit = std::string(rest.substr(5));
      }
      continue;
    }
    auto fields = split_fields(line);
    if (!axis) {
      header_line = line_no;
      static const char* kRequired[] = {"sample_id", "group_id", "label"};
      for (int c = 0; c < 3; ++c) {
        if (static_cast<int>(fields.size()) <= c || fields[static_cast<std::size_t>(c)] != kRequired[c])
          throw ParseError(ParseErrorKind::kMissingColumn, line_no, c,
                           std::string("header column ") + std::to_string(c) + " must be '" +
                               kRequired[c] + "'");
      }
      std::vector<double> values;
      for (std::size_t c = 3; c < fields.size(); ++c) {
        double v = 0;
        if (!parse_double(fields[c], v))
          throw ParseError(ParseErrorKind::kNonNumericCell, line_no, static_cast<long>(c),
                           "non-numeric axis value '" + fields[c] + "'");
        if (!values.empty() && !(v > values.back()))
          throw ParseError(ParseErrorKind::kNonMonotoneAxis, line_no, static_cast<long>(c),
                           "axis values must be strictly increasing");
        values.push_back(v);
      }
      if (values.size() < 2)
        throw ParseError(ParseErrorKind::kEmpty, line_no, -1, "header must list at least 2 axis values");
      axis = std::move(values);
      continue;
    }
    const std::size_t expected = axis->size() + 3;
    if (fields.size() != expected)
      throw ParseError(ParseErrorKind::kRaggedRow, line_no, -1,
                       "row " + std::to_string(rows.size()) + " has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(expected));
    std::vector<double> r(axis->size());
    for (std::size_t c = 3; c < fields.size(); ++c) {
      if (!parse_double(fields[c], r[c - 3]))
        throw ParseError(ParseErrorKind::kNonNumericCell, line_no, static_cast<long>(c),
                         "non-numeric intensity '" + fields[c] + "'");
    }
    if (fields[2].empty())
      throw ParseError(ParseErrorKind::kMissingColumn, line_no, 2, "empty label");
    ids.push_back(fields[0]);
    groups.push_back(fields[1]);
    label_text.push_back(fields[2]);
    rows.push_back(std::move(r));
    row_lines.push_back(line_no);
  }
  if (!axis) throw ParseError(ParseErrorKind::kEmpty, line_no, -1, "no header row");
  if (rows.empty()) throw ParseError(ParseErrorKind::kEmpty, header_line, -1, "no data rows");

  std::vector<std::string> classes;
  std::unordered_map<std::string, int> class_index;
  if (declared_classes) {
    classes = *declared_classes;
    for (std::size_t c = 0; c < classes.size(); ++c) class_index[classes[c]] = static_cast<int>(c);
  }
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = class_index.find(label_text[i]);
    if (it == class_index.end()) {
      if (declared_classes)
        throw ParseError(ParseErrorKind::kMissingColumn, row_lines[i], 2,
                         "label '" + label_text[i] + "' not in declared classes");
      it = class_index.emplace(label_text[i], static_cast<int>(classes.size())).first;
      classes.push_back(label_text[i]);
    }
    labels.push_back(it->second);
  }

  const auto n_empty = std::count_if(groups.begin(), groups.end(), [](auto& g) { return g.empty(); });
  std::optional<std::vector<std::string>> group_opt;
  if (n_empty == 0) {
    group_opt = std::move(groups);
  } else if (static_cast<std::size_t>(n_empty) != groups.size()) {
    const auto first = std::find_if(groups.begin(), groups.end(), [](auto& g) { return g.empty(); });
    throw ParseError(ParseErrorKind::kMissingColumn, row_lines[static_cast<std::size_t>(first - groups.begin())], 1,
                     "group_id must be given for every row or for none");
  }

  Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(axis->size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < axis->size(); ++j)
      x(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];

  return SpectraDataset(SpectralAxis(std::move(*axis), unit), std::move(x), std::move(labels),
                        std::move(classes), std::move(group_opt), std::move(ids));
}

SpectraDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string format_csv(const SpectraDataset& ds) {
  std::string out;
  out += "# classes=";
  for (std::size_t c = 0; c < ds.class_names().size(); ++c) {
    check_plain_field(ds.class_names()[c]);
    if (c) out += ',';
    out += ds.class_names()[c];
  }
  out += "\n# unit=" + ds.axis().unit_label() + "\n";
  out += "sample_id,group_id,label";
  for (double v : ds.axis().values()) out += "," + format_double(v);
  out += '\n';
  const auto& x = ds.intensities();
  for (Index i = 0; i < ds.n_samples(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    check_plain_field(ds.sample_ids()[ui]);
    out += ds.sample_ids()[ui];
    out += ',';
    if (ds.groups()) {
      check_plain_field((*ds.groups())[ui]);
      out += (*ds.groups())[ui];
    }
    out += ',';
    out += ds.class_names()[static_cast<std::size_t>(ds.labels()[ui])];
    for (Index j = 0; j < x.cols(); ++j) out += "," + format_double(x(i, j));
    out += '\n';
  }
  return out;
}

void save_csv(const SpectraDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << format_csv(ds);
}

nlohmann::json to_json(const SpectraDataset& ds) {
  nlohmann::json j;
  j["axis"] = {{"values", ds.axis().values()}, {"unit", ds.axis().unit_label()}};
  j["class_names"] = ds.class_names();
  j["labels"] = ds.labels();
  j["sample_ids"] = ds.sample_ids();
  if (ds.groups()) j["groups"] = *ds.groups();
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(ds.n_samples()));
  for (Index i = 0; i < ds.n_samples(); ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    r.resize(static_cast<std::size_t>(ds.n_features()));
    for (Index jj = 0; jj < ds.n_features(); ++jj) r[static_cast<std::size_t>(jj)] = ds.intensities()(i, jj);
  }
  j["intensities"] = rows;
  return j;
}

SpectraDataset dataset_from_json(const nlohmann::json& j) {
  SpectralAxis axis(j.at("axis").at("values").get<std::vector<double>>(),
                    j.at("axis").value("unit", std::string("cm^-1")));
  const auto rows = j.at("intensities").get<std::vector<std::vector<double>>>();
  Matrix x(static_cast<Index>(rows.size()), axis.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Index>(rows[i].size()) != axis.size())
      throw DimensionMismatch("row " + std::to_string(i) + " length != axis length");
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      x(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
  }
  std::optional<std::vector<std::string>> groups;
  if (j.contains("groups")) groups = j["groups"].get<std::vector<std::string>>();
  return SpectraDataset(std::move(axis), std::move(x), j.at("labels").get<std::vector<int>>(),
                        j.at("class_names").get<std::vector<std::string>>(), std::move(groups),
                        j.value("sample_ids", std::vector<std::string>{}));
}

namespace {

std::vector<Index> complement(Index n, const std::vector<Index>& taken) {
  std::vector<char> mark(static_cast<std::size_t>(n), 0);
  for (Index i : taken) mark[static_cast<std::size_t>(i)] = 1;
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i)
    if (!mark[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

// Unique groups in order of first appearance and their member rows.
std::vector<std::vector<Index>> group_members(const std::vector<std::string>& groups) {
  std::unordered_map<std::string, std::size_t> pos;
  std::vector<std::vector<Index>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto [it, fresh] = pos.emplace(groups[i], members.size());
    if (fresh) members.emplace_back();
    members[it->second].push_back(static_cast<Index>(i));
  }
  return members;
}

std::vector<std::vector<Index>> class_members(const std::vector<int>& labels) {
  int c_max = -1;
  for (int l : labels) c_max = std::max(c_max, l);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(c_max + 1));
  for (std::size_t i = 0; i < labels.size(); ++i)
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  return members;
}

}  // namespace

SplitIndices split_indices(const SpectraDataset& ds, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw InvalidArgument("test_fraction must lie in (0, 1)");
  const Index n = ds.n_samples();
  std::mt19937_64 rng(spec.seed);
  SplitIndices out;

  if (spec.mode == SplitMode::kGroupLevel) {
    if (!ds.groups()) throw InvalidArgument("group-level split requested but dataset has no groups");
    auto members = group_members(*ds.groups());
    if (members.size() < 2) throw InvalidArgument("group-level split needs at least 2 groups");
    std::shuffle(members.begin(), members.end(), rng);
    const double target = spec.test_fraction * static_cast<double>(n);
    // The last group always stays in train so neither side is empty.
    for (std::size_t g = 0; g + 1 < members.size() && static_cast<double>(out.test.size()) < target; ++g) {
      out.test.insert(out.test.end(), members[g].begin(), members[g].end());
    }
  } else {
    auto members = class_members(ds.labels());
    for (std::size_t c = 0; c < members.size(); ++c) {
      auto& m = members[c];
      if (m.empty()) continue;
      if (m.size() < 2)
        throw InvalidArgument("class '" + ds.class_names()[c] +
                              "' has fewer than 2 samples; cannot stratify");
      std::shuffle(m.begin(), m.end(), rng);
      auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(m.size())));
      n_test = std::clamp<std::size_t>(n_test, 1, m.size() - 1);
      out.test.insert(out.test.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_test));
    }
  }
  std::sort(out.test.begin(), out.test.end());
  out.train = complement(n, out.test);
  return out;
}

std::pair<SpectraDataset, SpectraDataset> split(const SpectraDataset& ds, const SplitSpec& spec) {
  const auto idx = split_indices(ds, spec);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

std::vector<Fold> kfold_indices(const std::vector<int>& labels,
                                const std::vector<std::string>& groups, int k, FoldMode mode,
                                std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("k must be at least 2");
  const auto n = static_cast<Index>(labels.size());
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Index>> test(static_cast<std::size_t>(k));

  if (mode == FoldMode::kGroupKFold) {
    if (groups.size() != labels.size()) throw InvalidArgument("group k-fold requires group ids");
    auto members = group_members(groups);
    if (static_cast<int>(members.size()) < k)
      throw InvalidArgument("group k-fold: k=" + std::to_string(k) + " exceeds the number of groups (" +
                            std::to_string(members.size()) + ")");
    std::shuffle(members.begin(), members.end(), rng);
    std::stable_sort(members.begin(), members.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
    for (const auto& g : members) {
      auto lightest = std::min_element(test.begin(), test.end(),
                                       [](const auto& a, const auto& b) { return a.size() < b.size(); });
      lightest->insert(lightest->end(), g.begin(), g.end());
    }
  } else {
    auto members = class_members(labels);
    std::size_t min_count = static_cast<std::size_t>(-1);
    for (const auto& m : members)
      if (!m.empty()) min_count = std::min(min_count, m.size());
    if (static_cast<std::size_t>(k) > min_count)
      throw InvalidArgument("stratified k-fold: k=" + std::to_string(k) +
                            " exceeds the smallest class count (" + std::to_string(min_count) + ")");
    std::size_t offset = 0;
    for (auto& m : members) {
      std::shuffle(m.begin(), m.end(), rng);
      for (std::size_t j = 0; j < m.size(); ++j)
        test[(offset + j) % static_cast<std::size_t>(k)].push_back(m[j]);
      offset += m.size();
    }
  }

  std::vector<Fold> folds;
  folds.reserve(test.size());
  for (auto& t : test) {
    std::sort(t.begin(), t.end());
    folds.push_back({complement(n, t), std::move(t)});
  }
  return folds;
}

std::vector<Fold> kfold_indices(const SpectraDataset& ds, int k, FoldMode mode, std::uint64_t seed) {
  static const std::vector<std::string> kNoGroups;
  if (mode == FoldMode::kGroupKFold && !ds.groups())
    throw InvalidArgument("group k-fold requested but dataset has no groups");
  return kfold_indices(ds.labels(), ds.groups() ? *ds.groups() : kNoGroups, k, mode, seed);
}

}  // namespace shapca::io
