#include "clustkit/density.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace clustkit;

namespace {

Matrix column(const std::vector<double>& xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
  return m;
}

DensityParams params(double eps, std::size_t min_pts) {
  DensityParams p;
  p.eps = eps;
  p.min_pts = min_pts;
  return p;
}

Matrix two_blobs() {
  Matrix m(6, 2);
  m << 0, 0, 0.3, 0, 0, 0.3, 10, 10, 10.3, 10, 10, 10.3;
  return m;
}

// Pairs of core points share a cluster in `a` exactly when they do in `b`.
bool same_core_comembership(const LabelVector& a, const LabelVector& b, const std::vector<bool>& core) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (!core[i] || !core[j]) continue;
      if ((a[i] == a[j] && a[i] >= 0) != (b[i] == b[j] && b[i] >= 0)) return false;
    }
  return true;
}

}  // namespace

TEST(Dbscan, HandNeighborhoods) {
  const auto r = dbscan(pairwise_distances(column({0, 1, 2, 100})), params(1.5, 3));
  EXPECT_EQ(r.labels, (LabelVector{0, 0, 0, -1}));
  EXPECT_EQ(r.kinds[1], PointKind::core);
  EXPECT_EQ(r.kinds[0], PointKind::border);
  EXPECT_EQ(r.kinds[2], PointKind::border);
  EXPECT_EQ(r.kinds[3], PointKind::noise);
}

TEST(Dbscan, IdenticalPointsOneCoreCluster) {
  const auto r = dbscan(pairwise_distances(column({4, 4, 4, 4})), params(0.1, 3));
  EXPECT_EQ(r.labels, (LabelVector{0, 0, 0, 0}));
  for (auto k : r.kinds) EXPECT_EQ(k, PointKind::core);
}

TEST(Dbscan, TinyEpsAllNoise) {
  const auto r = dbscan(pairwise_distances(column({0, 1, 2, 3})), params(1e-12, 2));
  for (int l : r.labels) EXPECT_EQ(l, -1);
}

TEST(Dbscan, MatchesDefinitionOnRandomData) {
  Rng rng(10);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = static_cast<Eigen::Index>(5 + uniform_index(rng, 40));
    Matrix x(n, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng) * 5.0;
    const double eps = 0.3 + uniform01(rng);
    const std::size_t min_pts = 2 + uniform_index(rng, 5);
    const auto r = dbscan(pairwise_distances(x), params(eps, min_pts));
    const auto want = oracle::core_components(x, eps, min_pts);
    std::vector<bool> core(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < core.size(); ++i) {
      core[i] = want[i] >= 0;
      EXPECT_EQ(r.kinds[i] == PointKind::core, core[i]);
    }
    EXPECT_TRUE(same_core_comembership(r.labels, want, core));
    // border points sit within eps of a core point of their cluster
    for (std::size_t i = 0; i < core.size(); ++i) {
      if (r.kinds[i] != PointKind::border) continue;
      bool ok = false;
      for (std::size_t j = 0; j < core.size(); ++j)
        ok |= core[j] && r.labels[j] == r.labels[i] && oracle::dist(x, i, j) <= eps;
      EXPECT_TRUE(ok);
    }
  }
}

TEST(Dbscan, Preconditions) {
  const auto d = pairwise_distances(column({0, 1, 2}));
  EXPECT_THROW(dbscan(d, params(1.0, 1)), ConfigError);
  EXPECT_THROW(dbscan(d, params(0.0, 2)), ConfigError);
}

TEST(Optics, MinPtsTwoCoreIsNearestNeighbor) {
  const auto x = column({0, 1, 3, 7, 15});
  const auto r = optics_order(pairwise_distances(x), params(kInf, 2));
  EXPECT_EQ(r.core_distance, (std::vector<double>{1, 1, 2, 4, 8}));
  EXPECT_TRUE(std::isinf(r.reachability[r.ordering.front()]));
  EXPECT_EQ(r.ordering.size(), 5u);
}

TEST(Optics, TwoBlobExtractionMatchesDbscan) {
  const auto d = pairwise_distances(two_blobs());
  const auto r = optics_order(d, params(kInf, 3));
  const auto labels = extract_clusters(r, 1.0);
  EXPECT_EQ(labels, dbscan(d, params(1.0, 3)).labels);
  EXPECT_EQ(count_clusters(labels), 2u);
}

TEST(Optics, ThresholdExtremes) {
  const auto d = pairwise_distances(two_blobs());
  const auto r = optics_order(d, params(kInf, 2));
  for (int l : extract_clusters(r, 0.1)) EXPECT_EQ(l, -1);
  for (int l : extract_clusters(r, 1000.0)) EXPECT_EQ(l, 0);
  EXPECT_THROW(extract_clusters(r, 0.0), ConfigError);
  const auto bounded = optics_order(d, params(1.0, 2));
  EXPECT_THROW(extract_clusters(bounded, 2.0), ConfigError);
}

TEST(Optics, DecileThresholdsAgreeWithDbscanOnCores) {
  Rng rng(11);
  for (int trial = 0; trial < 15; ++trial) {
    const auto n = static_cast<Eigen::Index>(10 + uniform_index(rng, 60));
    Matrix x(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double cx = static_cast<double>(uniform_index(rng, 3)) * 4.0;
      x.row(i) << cx + standard_normal(rng), standard_normal(rng);
    }
    const std::size_t min_pts = 2 + uniform_index(rng, 6);
    const auto d = pairwise_distances(x);
    const auto r = optics_order(d, params(kInf, min_pts));
    for (double t : reachability_deciles(r)) {
      const auto got = extract_clusters(r, t);
      const auto want = dbscan(d, params(t, min_pts));
      std::vector<bool> core(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < core.size(); ++i) core[i] = want.kinds[i] == PointKind::core;
      EXPECT_TRUE(same_core_comembership(got, want.labels, core));
      for (std::size_t i = 0; i < core.size(); ++i)
        if (core[i]) {
          EXPECT_GE(got[i], 0);
        }
    }
  }
}

TEST(Optics, DecilesSortedPositive) {
  OpticsResult r;
  r.reachability = {kInf, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto q = reachability_deciles(r);
  ASSERT_EQ(q.size(), 9u);
  EXPECT_NEAR(q.front(), 1.9, 1e-12);
  EXPECT_NEAR(q.back(), 9.1, 1e-12);
}

TEST(Optics, ReachabilityCsvWritesInf) {
  const auto r = optics_order(pairwise_distances(column({0, 1, 5})), params(kInf, 2));
  std::ostringstream out;
  write_reachability_csv(out, r, {"a", "b", "c"});
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "order_position,point_id,reachability,core_distance");
  EXPECT_NE(out.str().find("0,a,inf,1"), std::string::npos);
}
