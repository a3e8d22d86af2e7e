#include "clustkit/prototype.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace clustkit;

namespace {

FeatureTable line(const std::vector<double>& xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
  return FeatureTable::from_matrix(m);
}

FeatureTable blobs(std::uint64_t seed, std::size_t per, const std::vector<std::pair<double, double>>& centers,
                   double sd) {
  Rng rng(seed);
  Matrix m(static_cast<Eigen::Index>(per * centers.size()), 2);
  Eigen::Index r = 0;
  for (const auto& [cx, cy] : centers)
    for (std::size_t i = 0; i < per; ++i, ++r) m.row(r) << cx + sd * standard_normal(rng), cy + sd * standard_normal(rng);
  return FeatureTable::from_matrix(m);
}

const std::vector<double> kSeparated{0, 0.1, 0.2, 10, 10.1};

}  // namespace

TEST(KMeans, SingletonsAtKEqualsN) {
  KMeansOptions o;
  o.k = 5;
  const auto m = kmeans_fit(line({1, 4, 9, 16, 25}), o);
  EXPECT_DOUBLE_EQ(m.inertia, 0.0);
  EXPECT_EQ(count_clusters(m.labels), 5u);
}

TEST(KMeans, OneClusterIsMean) {
  KMeansOptions o;
  o.k = 1;
  const auto t = blobs(1, 10, {{0, 0}, {5, 5}}, 1.0);
  const auto m = kmeans_fit(t, o);
  EXPECT_LT((m.centroids.row(0) - t.values().colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KMeans, SeparatedLineMatchesExhaustive) {
  KMeansOptions o;
  o.k = 2;
  const auto t = line(kSeparated);
  const auto m = kmeans_fit(t, o);
  EXPECT_TRUE(oracle::same_partition(m.labels, {0, 0, 0, 1, 1}));
  EXPECT_NEAR(m.inertia, oracle::min_two_partition_sse(t.values()), 1e-12);
}

TEST(KMeans, RandomInstancesMatchExhaustive) {
  Rng rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = static_cast<Eigen::Index>(3 + uniform_index(rng, 6));
    Matrix x(n, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
    KMeansOptions o;
    o.k = 2;
    o.restarts = 20;
    o.seed = static_cast<std::uint64_t>(trial);
    EXPECT_NEAR(kmeans_fit(FeatureTable::from_matrix(x), o).inertia, oracle::min_two_partition_sse(x), 1e-9);
  }
}

TEST(KMeans, InertiaTraceNonIncreasingAndDeterministic) {
  const auto t = blobs(3, 30, {{0, 0}, {4, 0}, {0, 4}}, 1.2);
  KMeansOptions o;
  o.k = 3;
  o.seed = 77;
  o.restarts = 4;
  const auto a = kmeans_fit(t, o);
  const auto b = kmeans_fit(t, o);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.centroids, b.centroids);
  for (std::size_t i = 1; i < a.inertia_trace.size(); ++i) EXPECT_LE(a.inertia_trace[i], a.inertia_trace[i - 1] + 1e-12);
  EXPECT_NEAR(a.inertia, inertia_of(t.values(), a.labels, a.centroids), 1e-9);
}

TEST(KMeans, Preconditions) {
  KMeansOptions o;
  o.k = 6;
  EXPECT_THROW(kmeans_fit(line({1, 2, 3}), o), ConfigError);
  o.k = 0;
  EXPECT_THROW(kmeans_fit(line({1, 2, 3}), o), ConfigError);
}

TEST(KMeans, JsonRoundTripAssigns) {
  const auto t = blobs(4, 15, {{0, 0}, {6, 6}}, 0.5);
  KMeansOptions o;
  o.k = 2;
  const auto m = kmeans_fit(t, o);
  const auto back = kmeans_from_json(to_json(m));
  EXPECT_EQ(assign(back, t), m.labels);
}

TEST(MiniBatch, FullBatchMatchesKMeans) {
  const auto t = line(kSeparated);
  MiniBatchConfig c;
  c.k = 2;
  c.batch_size = 5;
  const auto m = minibatch_kmeans_fit(t, c);
  KMeansOptions o;
  o.k = 2;
  EXPECT_TRUE(oracle::same_partition(m.labels, kmeans_fit(t, o).labels));
}

TEST(MiniBatch, SingleClusterConvergesToMean) {
  const auto t = line({1, 2, 3, 4, 10});
  MiniBatchConfig c;
  c.k = 1;
  c.batch_size = 5;
  const auto m = minibatch_kmeans_fit(t, c);
  EXPECT_NEAR(m.centroids(0, 0), 4.0, 1e-12);
}

TEST(MiniBatch, Deterministic) {
  const auto t = blobs(5, 40, {{0, 0}, {3, 3}}, 1.0);
  MiniBatchConfig c;
  c.k = 2;
  c.seed = 9;
  c.batch_size = 10;
  const auto a = minibatch_kmeans_fit(t, c);
  const auto b = minibatch_kmeans_fit(t, c);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(Fuzzy, MembershipRules) {
  Matrix centroids(2, 1);
  centroids << 0, 2;
  Vector mid(1), on(1);
  mid << 1;
  on << 2;
  const auto u = fuzzy_memberships(mid, centroids, 2.0);
  EXPECT_DOUBLE_EQ(u(0), 0.5);
  EXPECT_DOUBLE_EQ(u(1), 0.5);
  const auto v = fuzzy_memberships(on, centroids, 2.0);
  EXPECT_DOUBLE_EQ(v(0), 0.0);
  EXPECT_DOUBLE_EQ(v(1), 1.0);
}

TEST(Fuzzy, HardenedMatchesKMeans) {
  const auto t = line(kSeparated);
  FuzzyOptions f;
  f.c = 2;
  const auto m = fuzzy_cmeans_fit(t, f);
  KMeansOptions o;
  o.k = 2;
  EXPECT_TRUE(oracle::same_partition(m.hardened(), kmeans_fit(t, o).labels));
  for (Eigen::Index i = 0; i < m.membership.rows(); ++i) EXPECT_NEAR(m.membership.row(i).sum(), 1.0, 1e-12);
}

TEST(Fuzzy, RejectsBadFuzzifier) {
  FuzzyOptions f;
  f.fuzzifier = 1.0;
  EXPECT_THROW(fuzzy_cmeans_fit(line(kSeparated), f), ConfigError);
}

TEST(Gmm, SingleComponentClosedForm) {
  const auto t = blobs(6, 50, {{1, 2}}, 1.5);
  GmmOptions o;
  o.k = 1;
  const auto m = gmm_fit(t, o);
  const auto& x = t.values();
  const Vector mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows()) + o.reg_floor * Matrix::Identity(2, 2);
  EXPECT_LT((m.means.row(0).transpose() - mean).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((m.covariances[0] - cov).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Gmm, SeparatedBlobsOneHot) {
  const auto t = blobs(7, 40, {{0, 0}, {50, 50}}, 1.0);
  GmmOptions o;
  o.k = 2;
  o.seed = 3;
  const auto m = gmm_fit(t, o);
  const auto resp = predict_proba(m, t);
  for (Eigen::Index i = 0; i < resp.rows(); ++i) EXPECT_GT(resp.row(i).maxCoeff(), 1.0 - 1e-6);
  const Vector a = t.values().topRows(40).colwise().mean().transpose();
  const Vector b = t.values().bottomRows(40).colwise().mean().transpose();
  const int la = m.labels[0];
  EXPECT_LT((m.means.row(la).transpose() - a).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LT((m.means.row(1 - la).transpose() - b).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Gmm, TraceNonDecreasingForEveryCovarianceType) {
  for (auto type : {CovarianceType::full, CovarianceType::tied, CovarianceType::diagonal, CovarianceType::spherical}) {
    const auto t = blobs(8, 50, {{0, 0}, {2, 1}, {-1, 3}}, 1.0);
    GmmOptions o;
    o.k = 3;
    o.covariance_type = type;
    o.seed = 1;
    const auto m = gmm_fit(t, o);
    for (std::size_t i = 1; i < m.log_likelihood_trace.size(); ++i)
      EXPECT_GE(m.log_likelihood_trace[i], m.log_likelihood_trace[i - 1] - 1e-7) << to_string(type);
    EXPECT_NEAR(std::accumulate(m.weights.begin(), m.weights.end(), 0.0), 1.0, 1e-12);
    const auto back = gmm_from_json(to_json(m));
    EXPECT_NEAR(log_likelihood(back, t), log_likelihood(m, t), 1e-9);
  }
}

TEST(Gmm, ParameterCountsMatchEntryCount) {
  const std::pair<CovarianceType, const char*> types[] = {{CovarianceType::full, "full"},
                                                          {CovarianceType::tied, "tied"},
                                                          {CovarianceType::diagonal, "diag"},
                                                          {CovarianceType::spherical, "spherical"}};
  for (const auto& [type, name] : types)
    for (std::size_t k = 1; k <= 4; ++k)
      for (std::size_t d = 1; d <= 4; ++d)
        EXPECT_EQ(gmm_parameter_count(type, k, d), oracle::gmm_free_parameters(name, k, d));
  EXPECT_EQ(gmm_parameter_count(CovarianceType::full, 3, 2), 17u);
}

TEST(Assign, TrainingTableReproducesLabels) {
  const auto t = blobs(9, 20, {{0, 0}, {5, 0}, {0, 5}}, 0.8);
  KMeansOptions o;
  o.k = 3;
  const auto m = kmeans_fit(t, o);
  EXPECT_EQ(assign(m, t), m.labels);
}

TEST(Assign, EquidistantGoesToLowestCentroid) {
  Matrix c(2, 1);
  c << -1, 1;
  Vector p(1);
  p << 0;
  EXPECT_EQ(nearest_centroid(p, c).first, 0);
  KMeansModel m;
  m.k = 2;
  m.centroids = c;
  EXPECT_EQ(assign(m, line({0}))[0], 0);
}

TEST(Assign, GmmHeavierWeightWinsAtMidpoint) {
  GmmModel m;
  m.k = 2;
  m.weights = {0.01, 0.99};
  m.means = Matrix(2, 1);
  m.means << -1, 1;
  m.covariances = {Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  EXPECT_EQ(assign(m, line({0}))[0], 1);
  m.weights = {0.99, 0.01};
  EXPECT_EQ(assign(m, line({0}))[0], 0);
}
