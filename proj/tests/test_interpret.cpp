#include "clustkit/interpret.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace clustkit;

namespace {

FeatureTable from_columns(const std::vector<std::vector<double>>& cols, std::vector<std::string> names = {}) {
  const auto n = static_cast<Eigen::Index>(cols.front().size());
  Matrix m(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, static_cast<Eigen::Index>(j)) = cols[j][static_cast<std::size_t>(i)];
  auto t = FeatureTable::from_matrix(m);
  return names.empty() ? t : t.with_values(std::move(names), m);
}

// Scaled SDCM of the classes induced by `breaks` on integer values.
std::int64_t scaled_goodness(const std::vector<std::int64_t>& values, const JenksBreaks& jb) {
  std::vector<std::int64_t> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> cuts{0};
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (jb.classify(static_cast<double>(sorted[i])) != jb.classify(static_cast<double>(sorted[i - 1]))) cuts.push_back(i);
  cuts.push_back(sorted.size());
  return oracle::scaled_sdcm(sorted, cuts);
}

}  // namespace

TEST(Profile, OneClusterZeroDeltas) {
  const auto p = cluster_profile(from_columns({{1, 2, 3}, {4, 4, 7}}), {5, 5, 5});
  EXPECT_EQ(p.cluster_ids, (std::vector<int>{5}));
  EXPECT_LT(p.deltas.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Profile, SymmetricTwoClusters) {
  const auto p = cluster_profile(from_columns({{-1, -1, 1, 1}}), {0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(p.deltas(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(p.deltas(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.spread[0], 2.0);
}

TEST(Profile, GroupbyOracleAndWeightedMean) {
  Rng rng(31);
  const std::size_t n = 90;
  std::vector<double> a(n), b(n), c(n);
  LabelVector labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 3) * 2 - (i % 17 == 0 ? 0 : 0);
    a[i] = standard_normal(rng) + labels[i];
    b[i] = 5.0 * standard_normal(rng);
    c[i] = uniform01(rng);
  }
  labels[7] = -1;
  const auto t = from_columns({a, b, c}, {"a", "b", "c"});
  const auto p = cluster_profile(t, labels);
  ASSERT_EQ(p.cluster_ids, (std::vector<int>{0, 2, 4}));
  Vector weighted = Vector::Zero(3);
  std::size_t total = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> sum(3, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == p.cluster_ids[k]) {
        sum[0] += a[i], sum[1] += b[i], sum[2] += c[i];
        ++count;
      }
    EXPECT_EQ(p.sizes[k], count);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(p.means(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)), sum[j] / static_cast<double>(count), 1e-12);
    weighted += static_cast<double>(count) * p.means.row(static_cast<Eigen::Index>(k)).transpose();
    total += count;
  }
  EXPECT_LT((weighted / static_cast<double>(total) - p.global_mean).cwiseAbs().maxCoeff(), 1e-8);
  for (std::size_t i = 1; i < p.ranking.size(); ++i) EXPECT_GE(p.spread[p.ranking[i - 1]], p.spread[p.ranking[i]]);
  std::ostringstream out;
  write_profile_csv(out, p);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "cluster,size,feature,mean,delta,spread");
}

TEST(Jenks, HandExample) {
  const auto jb = jenks_breaks({1, 2, 10, 11}, 2);
  ASSERT_EQ(jb.breaks.size(), 1u);
  EXPECT_DOUBLE_EQ(jb.breaks[0], 6.0);
  EXPECT_DOUBLE_EQ(jb.goodness, 1.0);
  EXPECT_EQ(jb.classify(2), 0u);
  EXPECT_EQ(jb.classify(10), 1u);
}

TEST(Jenks, Degenerate) {
  const auto all = jenks_breaks({3, 1, 2, 5}, 4);
  EXPECT_DOUBLE_EQ(all.goodness, 0.0);
  EXPECT_EQ(all.breaks.size(), 3u);
  const auto flat = jenks_breaks({4, 4, 4}, 1);
  EXPECT_TRUE(flat.breaks.empty());
  EXPECT_DOUBLE_EQ(flat.goodness, 0.0);
  EXPECT_THROW(jenks_breaks({4, 4, 4}, 2), DataError);
  EXPECT_THROW(jenks_breaks({1, 2}, 0), DataError);
}

TEST(Jenks, ExactAgainstBruteForce) {
  Rng rng(32);
  for (std::size_t n = 1; n <= 12; ++n)
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::int64_t> v(n);
      for (auto& x : v) x = static_cast<std::int64_t>(uniform_index(rng, 25)) - 5;
      std::vector<double> d(v.begin(), v.end());
      std::set<std::int64_t> distinct(v.begin(), v.end());
      for (std::size_t k = 1; k <= std::min<std::size_t>(4, distinct.size()); ++k) {
        const auto jb = jenks_breaks(d, k);
        EXPECT_EQ(scaled_goodness(v, jb), oracle::min_contiguous_sdcm(v, k));
        EXPECT_NEAR(jb.goodness, static_cast<double>(oracle::min_contiguous_sdcm(v, k)) / 27720.0, 1e-9);
        for (std::size_t i = 1; i < jb.breaks.size(); ++i) EXPECT_LT(jb.breaks[i - 1], jb.breaks[i]);
        // every class nonempty
        std::set<std::size_t> used;
        for (double x : d) used.insert(jb.classify(x));
        EXPECT_EQ(used.size(), k);
        // order invariance
        auto shuffled = d;
        std::reverse(shuffled.begin(), shuffled.end());
        EXPECT_EQ(jenks_breaks(shuffled, k).breaks, jb.breaks);
      }
    }
}

TEST(JenksScreen, IdentityAndMonotoneFeaturesScoreOne) {
  Rng rng(33);
  const std::size_t n = 300;
  std::vector<double> id(n), cube(n), noise(n);
  LabelVector labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(uniform_index(rng, 3));
    id[i] = labels[i];
    cube[i] = std::pow(labels[i] + 1.0, 3);
    noise[i] = standard_normal(rng);
  }
  const auto t = from_columns({noise, id, cube}, {"noise", "id", "cube"});
  const auto screen = jenks_screen(t, labels);
  ASSERT_EQ(screen.size(), 3u);
  EXPECT_DOUBLE_EQ(screen[0].v_measure, 1.0);
  EXPECT_EQ(screen[0].feature, "id");
  EXPECT_DOUBLE_EQ(screen[1].v_measure, 1.0);
  EXPECT_EQ(screen[2].feature, "noise");
  EXPECT_LT(screen[2].v_measure, 0.1);
}

TEST(Tree, PureInputSingleLeaf) {
  const auto tree = fit_tree(from_columns({{1, 2, 3}}), {4, 4, 4});
  EXPECT_EQ(tree.nodes.size(), 1u);
  EXPECT_TRUE(tree.single_class);
  EXPECT_EQ(tree.nodes[0].predicted, 4);
}

TEST(Tree, MidpointSplit) {
  const auto tree = fit_tree(from_columns({{1, 2, 9, 10}}), {0, 0, 1, 1});
  ASSERT_EQ(tree.nodes.size(), 3u);
  EXPECT_DOUBLE_EQ(tree.nodes[0].threshold, 5.5);
  EXPECT_TRUE(tree.nodes[static_cast<std::size_t>(tree.nodes[0].left)].leaf);
  EXPECT_DOUBLE_EQ(tree.nodes[static_cast<std::size_t>(tree.nodes[0].left)].impurity, 0.0);
  EXPECT_NE(render_text(tree).find("x0 <= 5.5"), std::string::npos);
  EXPECT_NE(render_dot(tree).find("digraph"), std::string::npos);
}

TEST(Tree, MaxDepthRespected) {
  // labels 0,1,0 along one axis need two splits
  const auto t = from_columns({{1, 2, 3, 4, 5, 6}});
  const LabelVector labels{0, 0, 1, 1, 0, 0};
  TreeOptions o;
  o.max_depth = 1;
  EXPECT_EQ(fit_tree(t, labels, o).depth(), 1u);
  EXPECT_EQ(fit_tree(t, labels).depth(), 2u);
}

TEST(Tree, PerfectTrainingAccuracyAndMidpoints) {
  Rng rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + uniform_index(rng, 60);
    std::vector<double> a(n), b(n);
    LabelVector labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(uniform_index(rng, 1000));
      b[i] = standard_normal(rng);
      labels[i] = static_cast<int>(uniform_index(rng, 3));
    }
    const auto t = from_columns({a, b});
    const auto tree = fit_tree(t, labels);
    EXPECT_EQ(tree.predict(t), labels);
    // each split sits halfway between adjacent distinct values of the rows reaching it
    std::vector<std::vector<std::size_t>> reach(tree.nodes.size());
    for (std::size_t r = 0; r < n; ++r) reach[0].push_back(r);
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      const auto& node = tree.nodes[k];
      if (node.leaf) continue;
      const auto& col = node.feature == 0 ? a : b;
      double below = -kInf, above = kInf;
      for (std::size_t r : reach[k]) {
        const bool left = col[r] <= node.threshold;
        reach[static_cast<std::size_t>(left ? node.left : node.right)].push_back(r);
        if (left) below = std::max(below, col[r]);
        else above = std::min(above, col[r]);
      }
      EXPECT_DOUBLE_EQ(node.threshold, 0.5 * (below + above));
    }
  }
}

TEST(Forest, ConstantsScoreZero) {
  Rng rng(35);
  const std::size_t n = 120;
  std::vector<double> signal(n), c1(n, 3.0), c2(n, -1.0);
  LabelVector labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 2);
    signal[i] = labels[i] * 5.0 + uniform01(rng);
  }
  ForestOptions o;
  o.n_trees = 50;
  o.seed = 1;
  const auto imp = forest_importance(from_columns({c1, signal, c2}), labels, o);
  EXPECT_DOUBLE_EQ(imp.values[0], 0.0);
  EXPECT_NEAR(imp.values[1], 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(imp.values[2], 0.0);
}

TEST(Forest, SumsToOneAndDeterministic) {
  Rng rng(36);
  const std::size_t n = 150;
  std::vector<double> a(n), b(n), c(n), d(n);
  LabelVector labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(uniform_index(rng, 3));
    a[i] = labels[i] + standard_normal(rng);
    b[i] = standard_normal(rng);
    c[i] = 0.5 * labels[i] + standard_normal(rng);
    d[i] = uniform01(rng);
  }
  const auto t = from_columns({a, b, c, d});
  ForestOptions o;
  o.n_trees = 40;
  o.seed = 9;
  const auto x = forest_importance(t, labels, o);
  const auto y = forest_importance(t, labels, o);
  EXPECT_EQ(x.values, y.values);
  EXPECT_NEAR(std::accumulate(x.values.begin(), x.values.end(), 0.0), 1.0, 1e-10);
  EXPECT_THROW(forest_importance(t, LabelVector(n, 2), o), DataError);
}

TEST(Forest, DuplicatedFeaturesShareImportance) {
  Rng rng(37);
  const std::size_t n = 200;
  std::vector<double> a(n), b(n), c(n), d(n);
  LabelVector labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 2);
    a[i] = labels[i] * 4.0 + standard_normal(rng);
    b[i] = a[i];
    c[i] = standard_normal(rng);
    d[i] = standard_normal(rng);
  }
  ForestOptions o;
  o.n_trees = 200;
  o.seed = 2;
  const auto imp = forest_importance(from_columns({a, b, c, d}), labels, o);
  EXPECT_GT(imp.values[0] + imp.values[1], 0.7);
  EXPECT_GE(imp.values[0], 0.2);
  EXPECT_LE(imp.values[0], 0.8);
  EXPECT_GE(imp.values[1], 0.2);
  EXPECT_LE(imp.values[1], 0.8);
  std::ostringstream out;
  write_importance_csv(out, imp);
  EXPECT_EQ(out.str().substr(0, 19), "feature,importance\n");
}
