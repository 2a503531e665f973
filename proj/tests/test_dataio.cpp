#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "novelkit/dataio.hpp"
#include "novelkit/evaluate.hpp"
#include "oracles.hpp"

using namespace novelkit;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("novelkit_test_" + name);
}

EmbeddingDataset tiny_dataset() {
  EmbeddingDataset ds;
  ds.features = Matrix(2, 3);
  ds.features.data = {0.25, -1.5, 3.0, 1e-9, 42.0, -7.125};
  ds.labels = {0, -1};
  ds.class_count_labelled = 1;
  return ds;
}

}  // namespace

TEST_CASE("csv round trip is bit exact") {
  auto path = temp_file("roundtrip.csv");
  EmbeddingDataset ds = tiny_dataset();
  // awkward values that need all 17 digits
  ds.features.data[0] = 0.1 + 0.2;
  ds.features.data[3] = -1.0 / 3.0;
  save_dataset(ds, path.string(), FileFormat::csv);
  EmbeddingDataset back = load_dataset(path.string(), FileFormat::csv);
  CHECK(back.features.data == ds.features.data);
  CHECK(back.labels == ds.labels);
  fs::remove(path);
}

TEST_CASE("binary round trip is bit exact") {
  auto path = temp_file("roundtrip.nvk");
  EmbeddingDataset ds = tiny_dataset();
  save_dataset(ds, path.string(), FileFormat::bin);
  EmbeddingDataset back = load_dataset(path.string(), FileFormat::bin);
  CHECK(back.features.data == ds.features.data);
  CHECK(back.labels == ds.labels);
  CHECK(back.has_labels);
  fs::remove(path);
}

TEST_CASE("csv parsing accepts the documented header and labels") {
  auto path = temp_file("basic.csv");
  {
    std::ofstream out(path);
    out << "d,3,labels,1\n";
    out << "1.0,2.0,3.0,0\n";
    out << "4.0,5.0,6.0,-1\n";
  }
  EmbeddingDataset ds = load_dataset(path.string(), FileFormat::csv);
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 3);
  CHECK(ds.labels[0] == 0);
  CHECK(ds.labels[1] == -1);
  fs::remove(path);
}

TEST_CASE("csv load errors name the offending row") {
  auto path = temp_file("ragged.csv");
  {
    std::ofstream out(path);
    out << "d,3,labels,0\n";
    out << "1,2,3\n";
    out << "1,2\n";
  }
  CHECK_THROWS_WITH_AS(load_dataset(path.string(), FileFormat::csv),
                       doctest::Contains("row 3"), std::runtime_error);
  fs::remove(path);

  auto path2 = temp_file("badlabel.csv");
  {
    std::ofstream out(path2);
    out << "d,2,labels,1\n";
    out << "1,2,-4\n";
  }
  CHECK_THROWS_WITH_AS(load_dataset(path2.string(), FileFormat::csv),
                       doctest::Contains("row 2"), std::runtime_error);
  fs::remove(path2);

  auto path3 = temp_file("badhead.csv");
  {
    std::ofstream out(path3);
    out << "dim,2\n";
  }
  CHECK_THROWS_AS(load_dataset(path3.string(), FileFormat::csv), std::runtime_error);
  fs::remove(path3);
}

TEST_CASE("empty binary dataset is rejected") {
  auto path = temp_file("empty.nvk");
  {
    std::ofstream out(path, std::ios::binary);
    out.write("NVK1", 4);
    char zeros[17] = {};
    out.write(zeros, 17);
  }
  CHECK_THROWS_WITH_AS(load_dataset(path.string(), FileFormat::bin),
                       doctest::Contains("empty"), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("synth mixture is deterministic and correctly labelled") {
  SynthSpec spec;
  spec.class_count_labelled = 5;
  spec.class_count_unlabelled = 5;
  spec.points_per_class = 20;
  spec.dim = 16;
  spec.separation = 10.0;
  spec.seed = 7;

  SynthResult a = synth_mixture(spec);
  SynthResult b = synth_mixture(spec);
  CHECK(a.labelled.features.data == b.labelled.features.data);
  CHECK(a.unlabelled.features.data == b.unlabelled.features.data);
  CHECK(a.test.features.data == b.test.features.data);

  // label histogram: exactly points_per_class per class on every split
  auto histogram_ok = [&](const EmbeddingDataset& ds, long long first, long long count) {
    std::vector<long long> hist(static_cast<std::size_t>(first + count), 0);
    for (long long y : ds.labels) {
      REQUIRE(y >= first);
      REQUIRE(y < first + count);
      ++hist[static_cast<std::size_t>(y)];
    }
    for (long long c = first; c < first + count; ++c)
      CHECK(hist[static_cast<std::size_t>(c)] == spec.points_per_class);
  };
  histogram_ok(a.labelled, 0, 5);
  histogram_ok(a.unlabelled, 5, 5);

  // saving twice yields identical bytes
  auto p1 = temp_file("synth1.nvk"), p2 = temp_file("synth2.nvk");
  save_dataset(a.labelled, p1.string(), FileFormat::bin);
  save_dataset(b.labelled, p2.string(), FileFormat::bin);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("synth mixture at separation 10 is recoverable by reference k-means") {
  SynthSpec spec;
  spec.class_count_labelled = 2;
  spec.class_count_unlabelled = 2;
  spec.points_per_class = 50;
  spec.dim = 8;
  spec.separation = 10.0;
  spec.seed = 11;
  SynthResult r = synth_mixture(spec);

  // all points from all three splits were drawn around the same 4 means;
  // cluster the test split with the reference Lloyd from class-mean seeds
  const EmbeddingDataset& ds = r.test;
  Matrix init(4, ds.dim(), 0.0);
  std::vector<std::size_t> cnt(4, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = init.row(static_cast<std::size_t>(ds.labels[i]));
    for (std::size_t j = 0; j < ds.dim(); ++j) row[j] += ds.features(i, j);
    ++cnt[static_cast<std::size_t>(ds.labels[i])];
  }
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t j = 0; j < ds.dim(); ++j)
      init(c, j) /= static_cast<double>(cnt[c]);
  auto assign = oracles::reference_lloyd(ds.features, init);
  double acc = oracles::brute_force_acc(assign, ds.labels);
  CHECK(acc >= 0.99);
}

TEST_CASE("synth precondition failures") {
  SynthSpec spec;
  spec.class_count_unlabelled = 0;
  CHECK_THROWS_AS(synth_mixture(spec), std::invalid_argument);
  spec = SynthSpec{};
  spec.points_per_class = 1;
  spec.points_per_class = 1;
  SynthResult r = synth_mixture(spec);  // singleton classes are legal
  CHECK(r.labelled.size() == 5);
  spec = SynthSpec{};
  spec.box_scale = 0.05;  // no room for the means
  spec.class_count_labelled = 30;
  spec.class_count_unlabelled = 30;
  spec.dim = 2;
  CHECK_THROWS_WITH_AS(synth_mixture(spec), doctest::Contains("retry budget"),
                       std::runtime_error);
}

TEST_CASE("split_probe partitions the labelled classes") {
  SynthSpec spec;
  spec.class_count_labelled = 10;
  spec.points_per_class = 2;
  SynthResult r = synth_mixture(spec);

  ProbeSplit s = split_probe(r.labelled, 5, 0.8, 3);
  CHECK(s.anchor_probe.size() == 4);  // round(0.8 * 5) anchors, remainder validates
  CHECK(s.validation_probe.size() == 1);
  CHECK(s.train_classes.size() == 5);

  std::vector<long long> all;
  for (auto* v : {&s.train_classes, &s.anchor_probe, &s.validation_probe})
    all.insert(all.end(), v->begin(), v->end());
  std::sort(all.begin(), all.end());
  std::vector<long long> expect(10);
  std::iota(expect.begin(), expect.end(), 0ll);
  CHECK(all == expect);  // disjoint union = every class exactly once

  ProbeSplit again = split_probe(r.labelled, 5, 0.8, 3);
  CHECK(again.anchor_probe == s.anchor_probe);

  ProbeSplit minimal = split_probe(r.labelled, 2, 0.5, 0);
  CHECK(minimal.anchor_probe.size() == 1);
  CHECK(minimal.validation_probe.size() == 1);

  CHECK_THROWS_AS(split_probe(r.labelled, 10, 0.8, 0), std::invalid_argument);
  CHECK_THROWS_AS(split_probe(r.labelled, 2, 0.9, 0), std::invalid_argument);
}

TEST_CASE("masked view hides every label") {
  SynthSpec spec;
  spec.points_per_class = 3;
  SynthResult r = synth_mixture(spec);
  EmbeddingDataset masked = r.unlabelled.without_labels();
  CHECK(r.unlabelled.any_label());
  CHECK(!masked.any_label());
  CHECK(masked.features.data == r.unlabelled.features.data);
}
