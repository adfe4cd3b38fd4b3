#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "shapca/spectra_io.hpp"

using namespace shapca;
using namespace shapca::io;

namespace {

SpectraDataset grouped(int n, int per_group, int n_classes = 2) {
  std::vector<double> axis;
  for (int j = 0; j < 4; ++j) axis.push_back(400.0 + 100.0 * j);
  Matrix x(n, 4);
  std::vector<int> labels;
  std::vector<std::string> groups, ids;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = i * 0.5 + j;
    labels.push_back(i % n_classes);
    groups.push_back("g" + std::to_string(i / per_group));
    ids.push_back("s" + std::to_string(i));
  }
  std::vector<std::string> names;
  for (int c = 0; c < n_classes; ++c) names.push_back("c" + std::to_string(c));
  return SpectraDataset(SpectralAxis(axis), x, labels, names, groups, ids);
}

std::set<std::string> groups_of(const SpectraDataset& ds, const std::vector<Index>& rows) {
  std::set<std::string> out;
  for (auto r : rows) out.insert((*ds.groups())[static_cast<std::size_t>(r)]);
  return out;
}

void check_partition(const std::vector<Index>& a, const std::vector<Index>& b, Index n) {
  std::vector<Index> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  REQUIRE(all.size() == static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);
}

}  // namespace

TEST_CASE("parse_csv reads a 3 x 4 file") {
  const auto ds = parse_csv(
      "sample_id,group_id,label,400,500,600,700\n"
      "a,g1,x,1,2,3,4\n"
      "b,g1,y,5,6,7,8\n"
      "c,g2,x,9,10,11,12\n");
  CHECK(ds.n_samples() == 3);
  CHECK(ds.n_features() == 4);
  CHECK(ds.class_names() == std::vector<std::string>{"x", "y"});
  CHECK(ds.labels() == std::vector<int>{0, 1, 0});
  CHECK(ds.intensities()(2, 3) == 12.0);
  CHECK(ds.groups().has_value());
}

TEST_CASE("parse_csv rejects a non-monotone axis") {
  try {
    parse_csv("sample_id,group_id,label,500,400,600\na,,x,1,2,3\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseErrorKind::kNonMonotoneAxis);
    CHECK(e.row() == 1);
  }
}

TEST_CASE("parse_csv reports a ragged row at its line") {
  try {
    parse_csv("sample_id,group_id,label,400,500,600\na,,x,1,2,3\nb,,x,1,2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseErrorKind::kRaggedRow);
    CHECK(e.row() == 3);
  }
}

TEST_CASE("parse_csv rejects missing columns and non-numeric cells") {
  CHECK_THROWS_AS(parse_csv("id,group_id,label,400,500\n"), ParseError);
  try {
    parse_csv("sample_id,group_id,label,400,500\na,,x,1,oops\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseErrorKind::kNonNumericCell);
    CHECK(e.column() == 4);
  }
  CHECK_THROWS_AS(parse_csv("# nothing here\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("sample_id,group_id,label,400,500\n"), ParseError);
}

TEST_CASE("csv round trip is bit exact") {
  auto ds = grouped(7, 2);
  Matrix x = ds.intensities();
  x(3, 1) = 0.1 + 0.2;  // not representable in short decimal
  x(0, 0) = -1.2345678901234567e-300;
  ds = ds.with_intensities(ds.axis(), x);
  const auto back = parse_csv(format_csv(ds));
  CHECK(back.intensities() == ds.intensities());
  CHECK(back.labels() == ds.labels());
  CHECK(back.class_names() == ds.class_names());
  CHECK(back.groups() == ds.groups());
  CHECK(back.sample_ids() == ds.sample_ids());
  CHECK(back.axis() == ds.axis());

  const auto path = std::filesystem::temp_directory_path() / "shapca_io_roundtrip.csv";
  save_csv(ds, path);
  CHECK(load_csv(path).intensities() == ds.intensities());
  std::filesystem::remove(path);
}

TEST_CASE("declared class order survives a subset missing a class") {
  const auto ds = grouped(6, 2, 3);
  const auto sub = ds.subset({2, 5});  // only class 2
  const auto back = parse_csv(format_csv(sub));
  CHECK(back.class_names() == ds.class_names());
  CHECK(back.labels() == std::vector<int>{2, 2});
}

TEST_CASE("group split puts one whole group in test") {
  const auto ds = grouped(10, 2);
  SplitSpec spec{SplitMode::kGroupLevel, 0.2, 3};
  const auto s = split_indices(ds, spec);
  CHECK(s.test.size() == 2);
  check_partition(s.train, s.test, 10);
  const auto tr = groups_of(ds, s.train), te = groups_of(ds, s.test);
  CHECK(te.size() == 1);
  for (const auto& g : te) CHECK(tr.count(g) == 0);

  const auto again = split_indices(ds, spec);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
}

TEST_CASE("group split requires groups") {
  auto ds = grouped(10, 2);
  SpectraDataset no_groups(ds.axis(), ds.intensities(), ds.labels(), ds.class_names());
  CHECK_THROWS_AS(split_indices(no_groups, SplitSpec{SplitMode::kGroupLevel, 0.2, 0}), InvalidArgument);
}

TEST_CASE("stratified split keeps class proportions") {
  const auto ds = grouped(20, 1);
  const auto s = split_indices(ds, SplitSpec{SplitMode::kSampleLevelStratified, 0.2, 5});
  check_partition(s.train, s.test, 20);
  int per_class[2] = {0, 0};
  for (auto i : s.test) ++per_class[ds.labels()[static_cast<std::size_t>(i)]];
  CHECK(per_class[0] == 2);
  CHECK(per_class[1] == 2);
}

TEST_CASE("group kfold with 3 groups gives one group per test fold") {
  const auto ds = grouped(6, 2);
  const auto folds = kfold_indices(ds, 3, FoldMode::kGroupKFold, 1);
  REQUIRE(folds.size() == 3);
  std::vector<Index> all_test;
  for (const auto& f : folds) {
    CHECK(groups_of(ds, f.test).size() == 1);
    CHECK(f.test.size() == 2);
    const auto tr = groups_of(ds, f.train);
    for (const auto& g : groups_of(ds, f.test)) CHECK(tr.count(g) == 0);
    check_partition(f.train, f.test, 6);
    all_test.insert(all_test.end(), f.test.begin(), f.test.end());
  }
  check_partition(all_test, {}, 6);
}

TEST_CASE("stratified kfold on balanced binary data") {
  const auto ds = grouped(10, 1);
  const auto folds = kfold_indices(ds, 5, FoldMode::kStratifiedKFold, 9);
  REQUIRE(folds.size() == 5);
  std::vector<Index> all_test;
  for (const auto& f : folds) {
    REQUIRE(f.test.size() == 2);
    CHECK(ds.labels()[static_cast<std::size_t>(f.test[0])] != ds.labels()[static_cast<std::size_t>(f.test[1])]);
    all_test.insert(all_test.end(), f.test.begin(), f.test.end());
  }
  check_partition(all_test, {}, 10);
}

TEST_CASE("kfold preconditions") {
  const auto ds = grouped(6, 2);
  CHECK_THROWS_AS(kfold_indices(ds, 1, FoldMode::kStratifiedKFold, 0), InvalidArgument);
  CHECK_THROWS_AS(kfold_indices(ds, 4, FoldMode::kGroupKFold, 0), InvalidArgument);
}

TEST_CASE("group kfold never leaks on uneven groups") {
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (int i = 0; i < 47; ++i) {
    labels.push_back(i % 3);
    groups.push_back("p" + std::to_string((i * 7) % 11));
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto folds = kfold_indices(labels, groups, 4, FoldMode::kGroupKFold, seed);
    std::vector<Index> all_test;
    for (const auto& f : folds) {
      CHECK_FALSE(f.test.empty());
      std::set<std::string> tr, te;
      for (auto i : f.train) tr.insert(groups[static_cast<std::size_t>(i)]);
      for (auto i : f.test) te.insert(groups[static_cast<std::size_t>(i)]);
      for (const auto& g : te) CHECK(tr.count(g) == 0);
      all_test.insert(all_test.end(), f.test.begin(), f.test.end());
    }
    check_partition(all_test, {}, 47);
  }
}

TEST_CASE("dataset constructor validates shapes") {
  CHECK_THROWS(SpectralAxis({1.0}));
  CHECK_THROWS(SpectralAxis({1.0, 1.0}));
  CHECK_THROWS_AS(SpectraDataset(SpectralAxis({1.0, 2.0}), Matrix::Zero(2, 3), {0, 1}, {"a", "b"}),
                  DimensionMismatch);
  CHECK_THROWS(SpectraDataset(SpectralAxis({1.0, 2.0}), Matrix::Zero(2, 2), {0, 2}, {"a", "b"}));
}
