#pragma once

// Cluster interpretation: feature profiles, Jenks natural breaks screened by
// v-measure, CART decision trees and random-forest importances.

#include "clustkit/core.hpp"
#include "clustkit/dataset.hpp"
#include "clustkit/metrics.hpp"

#include <ostream>
#include <sstream>

namespace clustkit {

// ---------------------------------------------------------------------------
// Profiles

struct ClusterProfile {
  std::vector<std::string> feature_names;
  std::vector<int> cluster_ids;    // sorted label values, noise excluded
  std::vector<std::size_t> sizes;
  Matrix means;                    // clusters x features
  Matrix deltas;                   // means - global mean
  Vector global_mean;              // over non-noise rows
  std::vector<double> spread;      // max - min of cluster means per feature
  std::vector<std::size_t> ranking;  // features by descending spread
};

inline ClusterProfile cluster_profile(const FeatureTable& table, const LabelVector& labels) {
  if (labels.size() != table.rows()) throw DataError("cluster_profile: label count does not match row count");
  const auto g = detail::group(labels);
  if (g.k() < 1) throw DataError("cluster_profile: no clusters (all rows are noise)");
  const auto& x = table.values();

  ClusterProfile profile;
  profile.feature_names = table.column_names();
  for (int label : labels)
    if (label != kNoise) profile.cluster_ids.push_back(label);
  std::sort(profile.cluster_ids.begin(), profile.cluster_ids.end());
  profile.cluster_ids.erase(std::unique(profile.cluster_ids.begin(), profile.cluster_ids.end()),
                            profile.cluster_ids.end());
  profile.sizes = g.sizes;
  profile.means = detail::centroids_of(x, g);
  profile.global_mean = Vector::Zero(x.cols());
  for (std::size_t row : g.rows) profile.global_mean += x.row(static_cast<Eigen::Index>(row)).transpose();
  profile.global_mean /= static_cast<double>(g.rows.size());
  profile.deltas = profile.means.rowwise() - profile.global_mean.transpose();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    profile.spread.push_back(profile.means.col(j).maxCoeff() - profile.means.col(j).minCoeff());
  profile.ranking.resize(profile.spread.size());
  std::iota(profile.ranking.begin(), profile.ranking.end(), 0);
  std::stable_sort(profile.ranking.begin(), profile.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return profile.spread[a] > profile.spread[b]; });
  return profile;
}

/// Long format: cluster, size, feature, mean, delta, spread.
inline void write_profile_csv(std::ostream& out, const ClusterProfile& profile) {
  out << "cluster,size,feature,mean,delta,spread\n";
  for (std::size_t c = 0; c < profile.cluster_ids.size(); ++c)
    for (std::size_t f : profile.ranking)
      csv::write_row(out, {std::to_string(profile.cluster_ids[c]), std::to_string(profile.sizes[c]),
                           profile.feature_names[f],
                           format_double(profile.means(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(f))),
                           format_double(profile.deltas(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(f))),
                           format_double(profile.spread[f])});
}

// ---------------------------------------------------------------------------
// Jenks natural breaks

struct JenksBreaks {
  std::size_t k = 1;
  std::vector<double> breaks;  // k-1 strictly increasing cut values
  double goodness = 0.0;       // sum of squared deviations from class means

  /// Class index of `value`: the number of breaks below it.
  std::size_t classify(double value) const {
    return static_cast<std::size_t>(std::lower_bound(breaks.begin(), breaks.end(), value) - breaks.begin());
  }
};

/// Exact natural breaks: dynamic program over the sorted distinct values
/// minimizing the total within-class squared deviation. Breaks sit midway
/// between the last value of a class and the first of the next.
inline JenksBreaks jenks_breaks(const std::vector<double>& values, std::size_t k) {
  if (values.empty()) throw DataError("jenks_breaks: no values");
  for (double v : values)
    if (!std::isfinite(v)) throw DataError("jenks_breaks: non-finite value");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct;
  std::vector<double> weight;
  for (double v : sorted) {
    if (distinct.empty() || v != distinct.back()) {
      distinct.push_back(v);
      weight.push_back(0.0);
    }
    weight.back() += 1.0;
  }
  const std::size_t m = distinct.size();
  if (k < 1 || k > m)
    throw DataError("jenks_breaks: k = " + std::to_string(k) + " but only " + std::to_string(m) +
                    " distinct values");

  // Prefix sums on centered values for a better-conditioned cost.
  double center = 0.0;
  for (double v : sorted) center += v;
  center /= static_cast<double>(sorted.size());
  std::vector<double> w(m + 1, 0.0), s1(m + 1, 0.0), s2(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double c = distinct[i] - center;
    w[i + 1] = w[i] + weight[i];
    s1[i + 1] = s1[i] + weight[i] * c;
    s2[i + 1] = s2[i] + weight[i] * c * c;
  }
  // cost of groups [i, j)
  auto cost = [&](std::size_t i, std::size_t j) {
    const double ww = w[j] - w[i];
    const double a = s1[j] - s1[i];
    return std::max(0.0, (s2[j] - s2[i]) - a * a / ww);
  };

  // best[c][j]: minimal cost of the first j groups split into c+1 classes.
  std::vector<std::vector<double>> best(k, std::vector<double>(m + 1, kInf));
  std::vector<std::vector<std::size_t>> start(k, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t j = 1; j <= m; ++j) best[0][j] = cost(0, j);
  for (std::size_t c = 1; c < k; ++c)
    for (std::size_t j = c + 1; j <= m; ++j)
      for (std::size_t i = c; i < j; ++i) {
        const double candidate = best[c - 1][i] + cost(i, j);
        if (candidate < best[c][j]) {
          best[c][j] = candidate;
          start[c][j] = i;
        }
      }

  std::vector<std::size_t> bounds;  // first group index of classes 1..k-1
  std::size_t j = m;
  for (std::size_t c = k - 1; c >= 1; --c) {
    j = start[c][j];
    bounds.push_back(j);
  }
  std::reverse(bounds.begin(), bounds.end());

  JenksBreaks out;
  out.k = k;
  for (std::size_t b : bounds) out.breaks.push_back(0.5 * (distinct[b - 1] + distinct[b]));

  // Goodness recomputed directly per class (two-pass mean, then deviations).
  std::vector<std::size_t> edges{0};
  edges.insert(edges.end(), bounds.begin(), bounds.end());
  edges.push_back(m);
  for (std::size_t c = 0; c + 1 < edges.size(); ++c) {
    double total = 0.0, count = 0.0;
    for (std::size_t g = edges[c]; g < edges[c + 1]; ++g) {
      total += weight[g] * distinct[g];
      count += weight[g];
    }
    const double mean = total / count;
    for (std::size_t g = edges[c]; g < edges[c + 1]; ++g)
      out.goodness += weight[g] * (distinct[g] - mean) * (distinct[g] - mean);
  }
  return out;
}

struct JenksScreenEntry {
  std::string feature;
  double v_measure = 0.0;
  std::size_t classes = 0;  // Jenks class count actually used
};

/// Classifies each feature on its own with Jenks (k = number of clusters,
/// reduced to the feature's distinct-value count when smaller) and ranks
/// features by v-measure against the clustering. Noise rows are dropped.
inline std::vector<JenksScreenEntry> jenks_screen(const FeatureTable& table, const LabelVector& labels) {
  if (labels.size() != table.rows()) throw DataError("jenks_screen: label count does not match row count");
  const std::size_t k = count_clusters(labels);
  if (k < 2) throw DataError("jenks_screen: needs at least 2 clusters");
  std::vector<std::size_t> rows;
  LabelVector kept;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) {
      rows.push_back(i);
      kept.push_back(labels[i]);
    }

  std::vector<JenksScreenEntry> out;
  for (std::size_t f = 0; f < table.cols(); ++f) {
    std::vector<double> values;
    values.reserve(rows.size());
    for (std::size_t r : rows) values.push_back(table.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)));
    std::vector<double> uniq = values;
    std::sort(uniq.begin(), uniq.end());
    const auto distinct = static_cast<std::size_t>(std::unique(uniq.begin(), uniq.end()) - uniq.begin());
    const std::size_t classes = std::min(k, distinct);
    const auto breaks = jenks_breaks(values, classes);
    LabelVector jenks_labels(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) jenks_labels[i] = static_cast<int>(breaks.classify(values[i]));
    out.push_back({table.column_names()[f], v_measure(jenks_labels, kept), classes});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const JenksScreenEntry& a, const JenksScreenEntry& b) { return a.v_measure > b.v_measure; });
  return out;
}

// ---------------------------------------------------------------------------
// CART

struct TreeNode {
  bool leaf = true;
  std::vector<std::size_t> class_counts;
  int predicted = 0;        // label value
  std::size_t feature = 0;  // split nodes only
  double threshold = 0.0;   // rows with value <= threshold go left
  int left = -1;
  int right = -1;
  double impurity = 0.0;           // Gini
  double impurity_decrease = 0.0;  // weighted by the node's share of samples
  std::size_t samples = 0;
  std::size_t depth = 0;
};

struct TreeOptions {
  std::size_t max_depth = 1000;
  std::size_t min_leaf = 1;
  std::size_t max_features = 0;  // features examined per split, 0 = all
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<int> classes;     // label value of each class index
  std::vector<std::string> feature_names;
  bool single_class = false;
  std::string units = "as supplied";

  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    std::size_t node = 0;
    while (!nodes[node].leaf)
      node = static_cast<std::size_t>(row(static_cast<Eigen::Index>(nodes[node].feature)) <= nodes[node].threshold
                                          ? nodes[node].left
                                          : nodes[node].right);
    return nodes[node].predicted;
  }

  LabelVector predict(const FeatureTable& table) const {
    LabelVector out(table.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict(table.values().row(static_cast<Eigen::Index>(i)));
    return out;
  }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& node : nodes) d = std::max(d, node.depth);
    return d;
  }

  std::vector<double> raw_importance() const {
    std::vector<double> out(feature_names.size(), 0.0);
    for (const auto& node : nodes)
      if (!node.leaf) out[node.feature] += node.impurity_decrease;
    return out;
  }
};

namespace detail {

inline double gini(const std::vector<std::size_t>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double sum = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / total;
    sum += p * p;
  }
  return 1.0 - sum;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::size_t>& y, std::size_t n_classes, const TreeOptions& options,
              Rng* rng)
      : x_(x), y_(y), n_classes_(n_classes), options_(options), rng_(rng) {}

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    total_ = static_cast<double>(rows.size());
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = -1.0;
  };

  int grow(std::vector<std::size_t>& rows, std::size_t depth) {
    TreeNode node;
    node.depth = depth;
    node.samples = rows.size();
    node.class_counts.assign(n_classes_, 0);
    for (auto r : rows) ++node.class_counts[y_[r]];
    node.impurity = gini(node.class_counts, static_cast<double>(rows.size()));
    node.predicted = static_cast<int>(std::max_element(node.class_counts.begin(), node.class_counts.end()) -
                                      node.class_counts.begin());
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    if (node.impurity <= 0.0 || depth >= options_.max_depth || rows.size() < 2 * options_.min_leaf) return index;
    const Split split = find_split(rows, node);
    if (!split.found) return index;

    std::vector<std::size_t> left, right;
    for (auto r : rows)
      (x_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(split.feature)) <= split.threshold ? left : right)
          .push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    nodes_[static_cast<std::size_t>(index)].leaf = false;
    nodes_[static_cast<std::size_t>(index)].feature = split.feature;
    nodes_[static_cast<std::size_t>(index)].threshold = split.threshold;
    nodes_[static_cast<std::size_t>(index)].impurity_decrease =
        static_cast<double>(node.samples) / total_ * split.gain;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[static_cast<std::size_t>(index)].left = l;
    nodes_[static_cast<std::size_t>(index)].right = r;
    return index;
  }

  Split find_split(const std::vector<std::size_t>& rows, const TreeNode& node) {
    const auto d = static_cast<std::size_t>(x_.cols());
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    const bool subsample = rng_ != nullptr && options_.max_features > 0 && options_.max_features < d;
    if (subsample)
      for (std::size_t i = 0; i + 1 < d; ++i) std::swap(features[i], features[i + uniform_index(*rng_, d - i)]);

    Split best;
    std::size_t usable = 0;
    std::vector<std::pair<double, std::size_t>> sorted(rows.size());
    std::vector<std::size_t> left(n_classes_), right(n_classes_);
    const double n = static_cast<double>(rows.size());
    for (std::size_t f : features) {
      if (subsample && usable >= options_.max_features) break;
      for (std::size_t i = 0; i < rows.size(); ++i)
        sorted[i] = {x_(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(f)), y_[rows[i]]};
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;  // constant here
      ++usable;
      std::fill(left.begin(), left.end(), 0);
      right = node.class_counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        ++left[sorted[i].second];
        --right[sorted[i].second];
        if (sorted[i].first == sorted[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = sorted.size() - nl;
        if (nl < options_.min_leaf || nr < options_.min_leaf) continue;
        const double gain = node.impurity - (static_cast<double>(nl) / n) * gini(left, static_cast<double>(nl)) -
                            (static_cast<double>(nr) / n) * gini(right, static_cast<double>(nr));
        const double threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        const bool better = !best.found || gain > best.gain ||
                            (!subsample && gain == best.gain &&
                             (f < best.feature || (f == best.feature && threshold < best.threshold)));
        if (better) best = {true, f, threshold, gain};
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<std::size_t>& y_;
  std::size_t n_classes_;
  TreeOptions options_;
  Rng* rng_;
  double total_ = 0.0;
  std::vector<TreeNode> nodes_;
};

struct EncodedLabels {
  std::vector<int> classes;
  std::vector<std::size_t> y;
};

inline EncodedLabels encode(const LabelVector& labels) {
  EncodedLabels out;
  out.classes = labels;
  std::sort(out.classes.begin(), out.classes.end());
  out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
  out.y.reserve(labels.size());
  for (int label : labels)
    out.y.push_back(static_cast<std::size_t>(std::lower_bound(out.classes.begin(), out.classes.end(), label) -
                                             out.classes.begin()));
  return out;
}

}  // namespace detail

/// CART with Gini impurity. Splits are midpoints between adjacent observed
/// values; the best impurity decrease wins, ties to the lowest feature and
/// then the lowest threshold. Growth stops at purity, `max_depth`, or when a
/// split would leave fewer than `min_leaf` rows on a side. A single-class
/// input yields one leaf with `single_class` set.
inline DecisionTree fit_tree(const FeatureTable& table, const LabelVector& labels, const TreeOptions& options = {}) {
  if (labels.size() != table.rows()) throw DataError("fit_tree: label count does not match row count");
  if (options.max_depth < 1) throw ConfigError("fit_tree: max_depth must be >= 1");
  if (options.min_leaf < 1) throw ConfigError("fit_tree: min_leaf must be >= 1");
  const auto encoded = detail::encode(labels);
  DecisionTree tree;
  tree.classes = encoded.classes;
  tree.feature_names = table.column_names();
  tree.single_class = encoded.classes.size() < 2;
  std::vector<std::size_t> rows(table.rows());
  std::iota(rows.begin(), rows.end(), 0);
  TreeOptions plain = options;
  plain.max_features = 0;
  detail::TreeBuilder builder(table.values(), encoded.y, encoded.classes.size(), plain, nullptr);
  tree.nodes = builder.build(std::move(rows));
  for (auto& node : tree.nodes) node.predicted = tree.classes[static_cast<std::size_t>(node.predicted)];
  return tree;
}

struct ImportanceVector {
  std::vector<std::string> feature_names;
  std::vector<double> values;  // sums to 1 when any split occurred
};

struct ForestOptions {
  std::size_t n_trees = 200;
  std::uint64_t seed = 0;
  std::size_t max_depth = 1000;
  std::size_t min_leaf = 1;
};

/// Bootstrap forest with floor(sqrt(d)) candidate features per split (features
/// that are constant within a node are skipped without counting). Importance
/// is each feature's impurity decrease, normalized per tree, averaged over
/// trees and renormalized.
inline ImportanceVector forest_importance(const FeatureTable& table, const LabelVector& labels,
                                          const ForestOptions& options = {}) {
  if (labels.size() != table.rows()) throw DataError("forest_importance: label count does not match row count");
  if (options.n_trees < 1) throw ConfigError("forest_importance: n_trees must be >= 1");
  const auto encoded = detail::encode(labels);
  if (encoded.classes.size() < 2) throw DataError("forest_importance: needs at least 2 classes");
  const std::size_t d = table.cols();
  const std::size_t n = table.rows();
  TreeOptions tree_options{options.max_depth, options.min_leaf,
                           std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))))};

  Rng master(options.seed);
  std::vector<std::uint64_t> seeds(options.n_trees);
  for (auto& s : seeds) s = master();

  std::vector<double> total(d, 0.0);
  for (std::uint64_t tree_seed : seeds) {
    Rng rng(tree_seed);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = uniform_index(rng, n);
    detail::TreeBuilder builder(table.values(), encoded.y, encoded.classes.size(), tree_options, &rng);
    const auto nodes = builder.build(std::move(rows));
    std::vector<double> raw(d, 0.0);
    for (const auto& node : nodes)
      if (!node.leaf) raw[node.feature] += node.impurity_decrease;
    const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    if (sum > 0.0)
      for (std::size_t f = 0; f < d; ++f) total[f] += raw[f] / sum;
  }
  ImportanceVector out{table.column_names(), std::vector<double>(d, 0.0)};
  const double sum = std::accumulate(total.begin(), total.end(), 0.0);
  if (sum > 0.0)
    for (std::size_t f = 0; f < d; ++f) out.values[f] = total[f] / sum;
  return out;
}

inline void write_importance_csv(std::ostream& out, const ImportanceVector& importance) {
  std::vector<std::size_t> order(importance.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance.values[a] > importance.values[b]; });
  out << "feature,importance\n";
  for (std::size_t f : order) csv::write_row(out, {importance.feature_names[f], format_double(importance.values[f])});
}

inline std::string render_text(const DecisionTree& tree) {
  std::ostringstream out;
  auto counts = [&](const TreeNode& node) {
    std::string s;
    for (std::size_t c = 0; c < node.class_counts.size(); ++c) {
      if (c) s += ", ";
      s += std::to_string(tree.classes[c]) + ":" + std::to_string(node.class_counts[c]);
    }
    return s;
  };
  auto visit = [&](auto&& self, std::size_t index) -> void {
    const auto& node = tree.nodes[index];
    const std::string pad(node.depth * 2, ' ');
    if (node.leaf) {
      out << pad << "class " << node.predicted << " [" << counts(node) << "]\n";
      return;
    }
    const auto& name = tree.feature_names[node.feature];
    out << pad << name << " <= " << format_double(node.threshold) << " (samples " << node.samples << ", gini "
        << format_double(node.impurity) << ")\n";
    self(self, static_cast<std::size_t>(node.left));
    out << pad << name << " > " << format_double(node.threshold) << '\n';
    self(self, static_cast<std::size_t>(node.right));
  };
  out << "# units: " << tree.units << '\n';
  visit(visit, 0);
  return out.str();
}

inline std::string render_dot(const DecisionTree& tree) {
  std::ostringstream out;
  out << "digraph Tree {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    out << "  " << i << " [label=\"";
    if (node.leaf)
      out << "class " << node.predicted;
    else
      out << tree.feature_names[node.feature] << " <= " << format_double(node.threshold);
    out << "\\nsamples = " << node.samples << "\\ngini = " << format_double(node.impurity) << "\"];\n";
    if (!node.leaf) {
      out << "  " << i << " -> " << node.left << " [label=\"yes\"];\n";
      out << "  " << i << " -> " << node.right << " [label=\"no\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace clustkit
