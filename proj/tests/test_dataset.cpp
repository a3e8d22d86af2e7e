#include "clustkit/dataset.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace clustkit;

namespace {

// Rank by counting: average 1-based position of a value among ties.
std::vector<double> counted_ranks(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  std::vector<double> out;
  for (double x : v) {
    double less = 0, equal = 0;
    for (double y : v) {
      less += y < x;
      equal += y == x;
    }
    out.push_back((less + (equal + 1.0) / 2.0 - 1.0) / (n - 1.0));
  }
  return out;
}

TimeSeriesTable series(const std::vector<double>& cum) {
  std::vector<Date> dates;
  Matrix m(1, static_cast<Eigen::Index>(cum.size()));
  for (std::size_t t = 0; t < cum.size(); ++t) {
    dates.push_back(parse_date("2020-03-01") + std::chrono::days(static_cast<int>(t)));
    m(0, static_cast<Eigen::Index>(t)) = cum[t];
  }
  return TimeSeriesTable({"a"}, dates, m);
}

}  // namespace

TEST(FeatureTable, ParsesKeyedCsv) {
  const auto t = parse_table("fips,population,area\n01001,100,2.5\n01003,200,3\n01005,300,4\n");
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 2u);
  EXPECT_EQ(t.row_ids()[0], "01001");
  EXPECT_DOUBLE_EQ(t.values()(2, 1), 4.0);
}

TEST(FeatureTable, DuplicateColumnNamed) {
  try {
    parse_table("fips,a,a\n1,2,3\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("a"), std::string::npos);
  }
}

TEST(FeatureTable, NanCellCitesRowAndColumn) {
  try {
    parse_table("fips,a,b\n1,2,3\n7,NaN,3\n");
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("7"), std::string::npos);
    EXPECT_NE(msg.find("a"), std::string::npos);
  }
}

TEST(FeatureTable, SchemaSelectsAndOrders) {
  const auto t = parse_table("id,a,b,c\nx,1,2,3\ny,4,5,6\n", {"c", "a"});
  ASSERT_EQ(t.column_names(), (std::vector<std::string>{"c", "a"}));
  EXPECT_DOUBLE_EQ(t.values()(1, 0), 6.0);
  EXPECT_THROW(parse_table("id,a\nx,1\n", {"zzz"}), DataError);
}

TEST(FeatureTable, RoundTripsThroughCsv) {
  const auto t = parse_table("id,a,b\nx,0.1,-2e-300\ny,1e300,3\n");
  std::ostringstream out;
  write_table(out, t, "id");
  const auto back = parse_table(out.str());
  EXPECT_EQ(back.values(), t.values());
  EXPECT_EQ(back.row_ids(), t.row_ids());
}

TEST(FeatureTable, RejectsDuplicateIdsAndEmpty) {
  EXPECT_THROW(parse_table("id,a\nx,1\nx,2\n"), DataError);
  EXPECT_THROW(parse_table("id,a\n"), DataError);
}

TEST(PercentileRank, Examples) {
  EXPECT_EQ(percentile_rank({10, 20, 30}), (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(percentile_rank({5, 5}), (std::vector<double>{0.5, 0.5}));
  const auto r = percentile_rank({3, 1, 4, 1});
  EXPECT_DOUBLE_EQ(r[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r[1], 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(r[2], 1.0);
  EXPECT_DOUBLE_EQ(r[3], 1.0 / 6.0);
  EXPECT_THROW(percentile_rank({1}), DataError);
}

TEST(PercentileRank, MatchesCountingOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 30);
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(uniform_index(rng, 8));
    const auto got = percentile_rank(v);
    const auto want = counted_ranks(v);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12);
      EXPECT_GE(got[i], 0.0);
      EXPECT_LE(got[i], 1.0);
    }
  }
}

TEST(CompositeRanking, SingleAndDuplicatedColumns) {
  Matrix m(5, 2);
  m << 3, 3, 1, 1, 4, 4, 1, 1, 5, 5;
  const FeatureTable t({"a", "b", "c", "d", "e"}, {"p", "q"}, m);
  const auto single = composite_ranking(t, {"p"});
  EXPECT_EQ(single, percentile_rank(t.column("p")));
  EXPECT_EQ(composite_ranking(t, {"p", "q"}), single);
}

TEST(CompositeRanking, RankSumRankOracle) {
  Matrix m(5, 4);
  m << 12, 5, 38000, 10,  //
      16, 7, 30000, 13,   //
      20, 9, 25000, 16,   //
      14, 6, 33000, 11,   //
      18, 8, 28000, 15;
  const FeatureTable t({"a", "b", "c", "d", "e"}, {"poverty", "unemp", "income", "nodip"}, m);
  const std::vector<bool> invert{false, false, true, false};
  std::vector<double> sums(5, 0.0);
  for (Eigen::Index j = 0; j < 4; ++j) {
    std::vector<double> col(5);
    for (Eigen::Index i = 0; i < 5; ++i) col[static_cast<std::size_t>(i)] = invert[static_cast<std::size_t>(j)] ? -m(i, j) : m(i, j);
    const auto r = counted_ranks(col);
    for (std::size_t i = 0; i < 5; ++i) sums[i] += r[i];
  }
  const auto want = counted_ranks(sums);
  const auto got = composite_ranking(t, t.column_names(), invert);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  EXPECT_THROW(composite_ranking(t, {"poverty"}, {true, false}), DataError);
}

TEST(Summary, FlatSeries) {
  SummaryAnchors a;
  a.growth = {{"g", parse_date("2020-03-01"), parse_date("2020-03-05")}};
  a.new_counts = {{"n", parse_date("2020-03-04")}};
  const auto s = summarize_timeseries(series({4, 4, 4, 4, 4}), a);
  EXPECT_DOUBLE_EQ(s.table.values()(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.table.values()(0, 1), 0.0);
}

TEST(Summary, LinearSeries) {
  SummaryAnchors a;
  a.growth = {{"g", parse_date("2020-03-01"), parse_date("2020-03-05")}};
  a.new_counts = {{"n", parse_date("2020-03-05")}};
  a.cumulative = {{"c", parse_date("2020-03-05")}};
  const auto s = summarize_timeseries(series({0, 2, 4, 6, 8}), a);
  EXPECT_DOUBLE_EQ(s.table.values()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(s.table.values()(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(s.table.values()(0, 2), 8.0);
}

TEST(Summary, IrregularSeries) {
  SummaryAnchors a;
  a.growth = {{"g", parse_date("2020-03-01"), parse_date("2020-03-05")}};
  a.new_counts = {{"n", parse_date("2020-03-04")}};
  const auto s = summarize_timeseries(series({0, 1, 1, 5, 7}), a);
  EXPECT_DOUBLE_EQ(s.table.values()(0, 0), 7.0 / 4.0);
  EXPECT_DOUBLE_EQ(s.table.values()(0, 1), 4.0);
}

TEST(Summary, AnchorsResolveAndValidate) {
  SummaryAnchors a;
  a.new_counts = {{"n", parse_date("2020-03-04")}};
  const auto s = summarize_timeseries(series({0, 3, 2, 5, 7}), a);
  EXPECT_EQ(s.non_monotone_rows, 1u);
  SummaryAnchors late;
  late.cumulative = {{"c", parse_date("2020-04-01")}};
  EXPECT_THROW(summarize_timeseries(series({0, 1}), late), DataError);
  SummaryAnchors dip;
  dip.new_counts = {{"n", parse_date("2020-03-03")}};
  EXPECT_EQ(summarize_timeseries(series({0, 3, 2, 5}), dip).clamped_new_counts, 1u);
}

TEST(Summary, ParsesTimeseriesCsv) {
  const auto ts = parse_timeseries("fips,2020-03-01,2020-03-02\n1,0,1\n2,3,4\n");
  EXPECT_EQ(ts.rows(), 2u);
  EXPECT_EQ(format_date(ts.dates()[1]), "2020-03-02");
  EXPECT_THROW(parse_timeseries("fips,2020-03-02,2020-03-01\n1,0,1\n"), DataError);
  EXPECT_THROW(parse_timeseries("fips,2020-03-01\n1,-1\n"), DataError);
  EXPECT_THROW(parse_date("2020-02-30"), DataError);
}

TEST(Standardize, Examples) {
  Matrix m(3, 2);
  m << 1, 7, 2, 7, 3, 7;
  const auto s = standardize(FeatureTable::from_matrix(m));
  const double z = std::sqrt(1.5);  // (x - 2) / sqrt(2/3)
  EXPECT_NEAR(s.table.values()(0, 0), -z, 1e-12);
  EXPECT_NEAR(s.table.values()(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(s.table.values()(2, 0), z, 1e-12);
  EXPECT_NEAR(s.table.values()(0, 0), -1.224745, 1e-6);
  EXPECT_EQ(s.table.values().col(1), Vector::Zero(3));
  EXPECT_DOUBLE_EQ(s.params.scales[1], 1.0);
}

TEST(Standardize, IdempotentAndInvertible) {
  Rng rng(5);
  Matrix m(20, 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 10.0 * standard_normal(rng) + 3.0;
  const auto t = FeatureTable::from_matrix(m);
  const auto once = standardize(t);
  const auto twice = standardize(once.table);
  EXPECT_LT((once.table.values() - twice.table.values()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((once.params.invert(once.table).values() - m).cwiseAbs().maxCoeff(), 1e-9);
  const auto back = standardization_from_json(to_json(once.params));
  EXPECT_EQ(back.apply(t).values(), once.table.values());
}

TEST(Pca, RankOneLine) {
  Matrix m(5, 2);
  for (int i = 0; i < 5; ++i) m.row(i) << i, 2.0 * i;
  const auto r = pca_fit_transform(FeatureTable::from_matrix(m), PcaTarget::variance(0.95));
  EXPECT_EQ(r.model.retained(), 1u);
  EXPECT_NEAR(r.model.explained_variance_ratio[0], 1.0, 1e-12);
  EXPECT_LT((r.model.reconstruct(r.table.values()) - m).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca, SymmetricCross) {
  Matrix m(4, 2);
  m << 1, 0, -1, 0, 0, 1, 0, -1;
  const auto r = pca_fit_transform(FeatureTable::from_matrix(m), PcaTarget::count(2));
  EXPECT_NEAR(r.model.explained_variance_ratio[0], 0.5, 1e-12);
  EXPECT_NEAR(r.model.explained_variance_ratio[1], 0.5, 1e-12);
}

TEST(Pca, RetainsSmallestPrefixReachingTarget) {
  Rng rng(9);
  Matrix m(200, 6);
  for (Eigen::Index i = 0; i < 200; ++i) {
    const double a = standard_normal(rng), b = standard_normal(rng);
    for (Eigen::Index j = 0; j < 6; ++j)
      m(i, j) = a * (j + 1) + b * (6 - j) * 0.5 + 0.3 * standard_normal(rng);
  }
  const auto r = pca_fit_transform(FeatureTable::from_matrix(m), PcaTarget::variance(0.95));
  double cum = 0.0;
  std::size_t want = 0;
  for (std::size_t i = 0; i < r.model.explained_variance_ratio.size(); ++i) {
    cum += r.model.explained_variance_ratio[i];
    if (cum >= 0.95) {
      want = i + 1;
      break;
    }
  }
  EXPECT_EQ(r.model.retained(), want);
  // components are orthonormal
  const Matrix gram = r.model.components * r.model.components.transpose();
  EXPECT_LT((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
  const auto back = pca_from_json(to_json(r.model));
  EXPECT_LT((back.transform(FeatureTable::from_matrix(m)).values() - r.table.values()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(pca_fit_transform(FeatureTable::from_matrix(m), PcaTarget::count(7)), ConfigError);
  EXPECT_THROW(pca_fit_transform(FeatureTable::from_matrix(m), PcaTarget::variance(1.5)), ConfigError);
}

TEST(Core, FormatDoubleRoundTrips) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = standard_normal(rng) * std::pow(10.0, static_cast<double>(uniform_index(rng, 40)) - 20.0);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(kInf), "inf");
}

TEST(Core, CompactLabelsKeepsNoise) {
  EXPECT_EQ(compact_labels({7, -1, 3, 7, 3}), (LabelVector{0, -1, 1, 0, 1}));
  EXPECT_EQ(count_clusters({7, -1, 3, 7}), 2u);
  EXPECT_EQ(count_noise({7, -1, 3, -1}), 2u);
}
