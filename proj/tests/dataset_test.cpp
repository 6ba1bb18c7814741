#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "floodgate/dataset.hpp"
#include "floodgate/rng.hpp"

namespace fg = floodgate;

namespace {

fg::Dataset dataset_with_counts(const fg::ClassCounts& counts) {
  fg::Dataset ds;
  double tag = 0;
  for (auto c : fg::kAllClasses)
    for (std::size_t i = 0; i < counts[fg::index_of(c)]; ++i) {
      fg::LabeledRecord r;
      r.features.fill(0.0);
      r.features[0] = tag++;  // unique id per record
      r.label = c;
      ds.records.push_back(r);
    }
  return ds;
}

fg::Dataset random_dataset(std::size_t n, std::uint64_t seed) {
  fg::Rng rng(seed);
  fg::Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    fg::LabeledRecord r;
    for (auto& v : r.features) v = rng.uniform(-1000, 1000);
    r.label = fg::class_from_index(i % fg::kClassCount);
    ds.records.push_back(r);
  }
  return ds;
}

std::multiset<double> ids(const fg::Dataset& ds) {
  std::multiset<double> out;
  for (const auto& r : ds.records) out.insert(r.features[0]);
  return out;
}

}  // namespace

TEST(EncodeLabel, AcceptsAliasesCaseInsensitively) {
  EXPECT_EQ(fg::encode_label("normal"), fg::TrafficClass::Normal);
  EXPECT_EQ(fg::encode_label("SYN_FLOOD"), fg::TrafficClass::SynFlood);
  EXPECT_EQ(fg::encode_label("syn"), fg::TrafficClass::SynFlood);
  EXPECT_EQ(fg::encode_label("Ack"), fg::TrafficClass::AckFlood);
  EXPECT_EQ(fg::encode_label("http_flood"), fg::TrafficClass::HttpFlood);
  EXPECT_EQ(fg::encode_label("UDP"), fg::TrafficClass::UdpFlood);
  EXPECT_EQ(static_cast<int>(fg::encode_label("normal")), 0);
  EXPECT_EQ(static_cast<int>(fg::encode_label("udp_flood")), 4);
}

TEST(EncodeLabel, RejectsUnknownNames) {
  try {
    fg::encode_label("teardrop");
    FAIL() << "expected UnknownLabel";
  } catch (const fg::Error& e) {
    EXPECT_EQ(e.code(), fg::ErrorCode::UnknownLabel);
  }
}

TEST(EncodeLabel, CanonicalNamesRoundTrip) {
  for (auto c : fg::kAllClasses) EXPECT_EQ(fg::encode_label(fg::label_name(c)), c);
}

TEST(StratifiedSplit, ReproducesReferenceTestRowTotals) {
  const auto ds = dataset_with_counts({16619, 3556, 7562, 1044, 9632});
  const auto parts = fg::stratified_split(ds, {0.70, 0.15, 0.15}, 2024);
  const fg::ClassCounts expected_test = {2493, 533, 1134, 157, 1445};
  EXPECT_EQ(parts.test.class_counts(), expected_test);
  EXPECT_EQ(parts.test.size(), 5762u);
  // Validation uses the same rounding, so it mirrors the test split here.
  EXPECT_EQ(parts.validation.class_counts(), expected_test);
  EXPECT_EQ(parts.train.size(), ds.size() - 2 * 5762u);
}

TEST(StratifiedSplit, RejectsBadRatios) {
  const auto ds = dataset_with_counts({10, 10, 10, 10, 10});
  for (fg::SplitRatios r : {fg::SplitRatios{1.0, 0.0, 0.0}, fg::SplitRatios{0.5, 0.5, 0.5},
                            fg::SplitRatios{0.8, -0.1, 0.3}}) {
    try {
      fg::stratified_split(ds, r, 1);
      FAIL() << "expected BadRatios";
    } catch (const fg::Error& e) {
      EXPECT_EQ(e.code(), fg::ErrorCode::BadRatios);
    }
  }
}

TEST(StratifiedSplit, RejectsUnderpopulatedClass) {
  const auto ds = dataset_with_counts({10, 10, 2, 10, 10});
  try {
    fg::stratified_split(ds, {0.7, 0.15, 0.15}, 1);
    FAIL() << "expected EmptyClass";
  } catch (const fg::Error& e) {
    EXPECT_EQ(e.code(), fg::ErrorCode::EmptyClass);
  }
}

TEST(StratifiedSplit, SameSeedSamePartitions) {
  const auto ds = dataset_with_counts({50, 20, 30, 7, 40});
  const auto a = fg::stratified_split(ds, {0.7, 0.15, 0.15}, 99);
  const auto b = fg::stratified_split(ds, {0.7, 0.15, 0.15}, 99);
  EXPECT_EQ(a.train.records, b.train.records);
  EXPECT_EQ(a.validation.records, b.validation.records);
  EXPECT_EQ(a.test.records, b.test.records);
  const auto c = fg::stratified_split(ds, {0.7, 0.15, 0.15}, 100);
  EXPECT_NE(a.test.records, c.test.records);
}

// Property: for many seeds and ratio triples the partitions are disjoint,
// cover the input and honour the per-class rounding rule.
TEST(StratifiedSplit, PartitionProperty) {
  fg::Rng gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    fg::ClassCounts counts;
    for (auto& c : counts) c = 3 + gen.below(200);
    const auto ds = dataset_with_counts(counts);
    const double val = gen.uniform(0.05, 0.3);
    const double test = gen.uniform(0.05, 0.3);
    const fg::SplitRatios r{1.0 - val - test, val, test};
    const auto parts = fg::stratified_split(ds, r, gen.next_u64());

    auto all = ids(parts.train);
    for (double id : ids(parts.validation)) all.insert(id);
    for (double id : ids(parts.test)) all.insert(id);
    EXPECT_EQ(all, ids(ds));
    EXPECT_EQ(std::set<double>(all.begin(), all.end()).size(), ds.size());

    const auto tc = parts.test.class_counts();
    for (std::size_t k = 0; k < fg::kClassCount; ++k)
      EXPECT_EQ(tc[k], static_cast<std::size_t>(std::floor(static_cast<double>(counts[k]) * test + 0.5)));
  }
}

TEST(FitNormalization, PopulationStatistics) {
  fg::Dataset ds;
  for (double v : {2.0, 4.0, 6.0}) {
    fg::LabeledRecord r;
    r.features.fill(5.0);
    r.features[0] = v;
    ds.records.push_back(r);
  }
  const auto s = fg::fit_normalization(ds);
  EXPECT_DOUBLE_EQ(s.mean[0], 4.0);
  EXPECT_NEAR(s.std[0], 1.632993161855452, 1e-12);
  EXPECT_DOUBLE_EQ(s.mean[1], 5.0);
  EXPECT_DOUBLE_EQ(s.std[1], 1.0);  // constant column is clamped
}

TEST(FitNormalization, SingleRecord) {
  fg::Dataset ds;
  fg::LabeledRecord r;
  for (std::size_t i = 0; i < fg::kFeatureCount; ++i) r.features[i] = static_cast<double>(i) * 1.5;
  ds.records.push_back(r);
  const auto s = fg::fit_normalization(ds);
  EXPECT_EQ(s.mean, r.features);
  for (double sd : s.std) EXPECT_EQ(sd, 1.0);
}

TEST(FitNormalization, EmptyDatasetThrows) {
  try {
    fg::fit_normalization(fg::Dataset{});
    FAIL();
  } catch (const fg::Error& e) {
    EXPECT_EQ(e.code(), fg::ErrorCode::EmptyDataset);
  }
}

TEST(ApplyNormalization, CentersAndScales) {
  fg::NormalizationStats s;
  s.mean.fill(4.0);
  s.std.fill(2.0);
  fg::FeatureVector v;
  v.fill(6.0);
  for (double x : fg::apply_normalization(v, s)) EXPECT_DOUBLE_EQ(x, 1.0);
  for (double x : fg::apply_normalization(s.mean, s)) EXPECT_DOUBLE_EQ(x, 0.0);
}

TEST(ApplyNormalization, FittedTrainingSetIsStandardized) {
  auto ds = random_dataset(500, 11);
  for (auto& r : ds.records) r.features[3] = 42.0;  // a clamped feature
  const auto s = fg::fit_normalization(ds);
  const auto z = fg::apply_normalization(ds, s);
  for (std::size_t i = 0; i < fg::kFeatureCount; ++i) {
    double mean = 0, sq = 0;
    for (const auto& r : z.records) mean += r.features[i];
    mean /= static_cast<double>(z.size());
    for (const auto& r : z.records) sq += (r.features[i] - mean) * (r.features[i] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(z.size()));
    EXPECT_LT(std::abs(mean), 1e-9) << "feature " << i;
    if (i == 3)
      EXPECT_EQ(sd, 0.0);
    else
      EXPECT_NEAR(sd, 1.0, 1e-9) << "feature " << i;
  }
}

TEST(Csv, RoundTripIsExact) {
  const auto ds = random_dataset(10, 3);
  std::stringstream ss;
  fg::write_csv(ss, ds);
  const auto back = fg::read_csv(ss);
  EXPECT_EQ(back.records, ds.records);
  EXPECT_EQ(back.class_counts(), ds.class_counts());
}

TEST(Csv, FileRoundTripPreservesClassCounts) {
  const auto ds = random_dataset(137, 5);
  const auto path = std::filesystem::temp_directory_path() / "floodgate_dataset_test.csv";
  fg::write_csv(ds, path);
  const auto back = fg::read_csv(path);
  EXPECT_EQ(back.class_counts(), ds.class_counts());
  EXPECT_EQ(back.records, ds.records);
  std::filesystem::remove(path);
}

TEST(Csv, HeaderNamesEveryFeature) {
  const auto h = fg::csv_header();
  EXPECT_EQ(h.substr(0, 8), "f01,f02,");
  EXPECT_EQ(h.substr(h.size() - 9), "f24,label");
}

TEST(Csv, ShortRowIsMalformed) {
  std::stringstream ss;
  ss << fg::csv_header() << '\n';
  for (int i = 0; i < 23; ++i) ss << "1,";
  ss << "normal\n";
  try {
    fg::read_csv(ss);
    FAIL();
  } catch (const fg::Error& e) {
    EXPECT_EQ(e.code(), fg::ErrorCode::MalformedRow);
  }
}

TEST(Csv, NonNumericFeatureIsMalformed) {
  std::stringstream ss;
  ss << fg::csv_header() << '\n';
  for (int i = 0; i < 23; ++i) ss << "1,";
  ss << "abc,normal\n";
  EXPECT_THROW(fg::read_csv(ss), fg::Error);
}

TEST(Csv, AliasLabelsMap) {
  std::stringstream ss;
  ss << fg::csv_header() << '\n';
  for (int i = 0; i < 24; ++i) ss << "0.5,";
  ss << "udp_flood\n";
  for (int i = 0; i < 24; ++i) ss << "1e3,";
  ss << "SYN\n";
  const auto ds = fg::read_csv(ss);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.records[0].label, fg::TrafficClass::UdpFlood);
  EXPECT_EQ(ds.records[1].label, fg::TrafficClass::SynFlood);
  EXPECT_EQ(ds.records[1].features[23], 1000.0);
}

TEST(Csv, UnknownLabelPropagates) {
  std::stringstream ss;
  ss << fg::csv_header() << '\n';
  for (int i = 0; i < 24; ++i) ss << "0,";
  ss << "smurf\n";
  try {
    fg::read_csv(ss);
    FAIL();
  } catch (const fg::Error& e) {
    EXPECT_EQ(e.code(), fg::ErrorCode::UnknownLabel);
  }
}
