#pragma once

// Internal validity indices, information criteria, distortion knees and
// v-measure agreement. Noise rows (label -1) are excluded from every index.

#include "clustkit/core.hpp"
#include "clustkit/distance.hpp"
#include "clustkit/prototype.hpp"

namespace clustkit {

namespace detail {

/// Scored rows and their clusters renumbered densely.
struct Grouping {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cluster;  // aligned with rows
  std::vector<std::size_t> sizes;
  std::size_t noise = 0;

  std::size_t k() const { return sizes.size(); }
};

inline Grouping group(const LabelVector& labels) {
  Grouping g;
  std::map<int, std::size_t> dense;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) {
      ++g.noise;
      continue;
    }
    if (labels[i] < 0) throw DataError("labels must be -1 (noise) or nonnegative");
    dense.emplace(labels[i], 0);
  }
  std::size_t next = 0;
  for (auto& [label, index] : dense) index = next++;
  g.sizes.assign(dense.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) continue;
    const auto c = dense.at(labels[i]);
    g.rows.push_back(i);
    g.cluster.push_back(c);
    ++g.sizes[c];
  }
  return g;
}

inline Grouping require_clusters(const LabelVector& labels, std::size_t rows, const char* index) {
  if (labels.size() != rows)
    throw DataError(std::string(index) + ": label count does not match row count");
  auto g = group(labels);
  if (g.k() < 2) throw DataError(std::string(index) + ": needs at least 2 clusters after removing noise");
  return g;
}

inline Matrix centroids_of(const Matrix& x, const Grouping& g) {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(g.k()), x.cols());
  for (std::size_t r = 0; r < g.rows.size(); ++r)
    c.row(static_cast<Eigen::Index>(g.cluster[r])) += x.row(static_cast<Eigen::Index>(g.rows[r]));
  for (std::size_t j = 0; j < g.k(); ++j) c.row(static_cast<Eigen::Index>(j)) /= static_cast<double>(g.sizes[j]);
  return c;
}

}  // namespace detail

/// Mean of (b - a) / max(a, b) over scored rows, where a is the mean distance
/// to the row's own cluster and b the smallest mean distance to another
/// cluster. Rows in singleton clusters contribute 0.
inline double silhouette(const DistanceMatrix& distances, const LabelVector& labels) {
  const auto g = detail::require_clusters(labels, distances.size(), "silhouette");
  const std::size_t m = g.rows.size();
  std::vector<double> sums(g.k());
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t s = 0; s < m; ++s)
      if (s != r) sums[g.cluster[s]] += distances(g.rows[r], g.rows[s]);
    const std::size_t own = g.cluster[r];
    if (g.sizes[own] == 1) continue;
    const double a = sums[own] / static_cast<double>(g.sizes[own] - 1);
    double b = kInf;
    for (std::size_t c = 0; c < g.k(); ++c)
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(g.sizes[c]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(m);
}

inline double silhouette(const FeatureTable& table, const LabelVector& labels,
                         const Metric& metric = Metric::euclidean()) {
  detail::require_clusters(labels, table.rows(), "silhouette");
  return silhouette(pairwise_distances(table, metric), labels);
}

/// (between SS / (k - 1)) / (within SS / (n - k)); +infinity when the within
/// sum of squares is zero.
inline double calinski_harabasz(const FeatureTable& table, const LabelVector& labels) {
  const auto g = detail::require_clusters(labels, table.rows(), "calinski_harabasz");
  const auto& x = table.values();
  const Matrix centroids = detail::centroids_of(x, g);
  Eigen::RowVectorXd overall = Eigen::RowVectorXd::Zero(x.cols());
  for (std::size_t row : g.rows) overall += x.row(static_cast<Eigen::Index>(row));
  overall /= static_cast<double>(g.rows.size());

  double between = 0.0;
  for (std::size_t c = 0; c < g.k(); ++c)
    between += static_cast<double>(g.sizes[c]) * (centroids.row(static_cast<Eigen::Index>(c)) - overall).squaredNorm();
  double within = 0.0;
  for (std::size_t r = 0; r < g.rows.size(); ++r)
    within += (x.row(static_cast<Eigen::Index>(g.rows[r])) - centroids.row(static_cast<Eigen::Index>(g.cluster[r]))).squaredNorm();

  const double n = static_cast<double>(g.rows.size());
  const double k = static_cast<double>(g.k());
  if (within == 0.0 || n == k) return kInf;
  return (between / (k - 1.0)) / (within / (n - k));
}

/// Mean over clusters of the worst (s_i + s_j) / |c_i - c_j|, with s the mean
/// distance to the centroid; +infinity when two centroids coincide.
inline double davies_bouldin(const FeatureTable& table, const LabelVector& labels) {
  const auto g = detail::require_clusters(labels, table.rows(), "davies_bouldin");
  const auto& x = table.values();
  const Matrix centroids = detail::centroids_of(x, g);
  std::vector<double> scatter(g.k(), 0.0);
  for (std::size_t r = 0; r < g.rows.size(); ++r)
    scatter[g.cluster[r]] +=
        (x.row(static_cast<Eigen::Index>(g.rows[r])) - centroids.row(static_cast<Eigen::Index>(g.cluster[r]))).norm();
  for (std::size_t c = 0; c < g.k(); ++c) scatter[c] /= static_cast<double>(g.sizes[c]);

  double total = 0.0;
  for (std::size_t i = 0; i < g.k(); ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < g.k(); ++j) {
      if (i == j) continue;
      const double gap = (centroids.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(j))).norm();
      if (gap == 0.0) return kInf;
      worst = std::max(worst, (scatter[i] + scatter[j]) / gap);
    }
    total += worst;
  }
  return total / static_cast<double>(g.k());
}

// ---------------------------------------------------------------------------
// Score reports

struct ScoreReport {
  std::map<std::string, double> values;
  std::size_t k = 0;
  std::size_t noise_count = 0;
  std::size_t rows_scored = 0;
  std::string silhouette_metric = "euclidean";
  std::vector<std::string> flags;

  std::optional<double> get(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) return std::nullopt;
    return it->second;
  }
};

/// JSON number, or the string "inf"/"-inf"/"nan" for non-finite values.
inline nlohmann::json json_number(double value) {
  if (std::isfinite(value)) return value;
  return format_double(value);
}

inline double json_to_double(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  return std::numeric_limits<double>::quiet_NaN();
}

inline nlohmann::json to_json(const ScoreReport& report) {
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [name, value] : report.values) values[name] = json_number(value);
  return {{"values", values},
          {"k", report.k},
          {"noise_count", report.noise_count},
          {"rows_scored", report.rows_scored},
          {"silhouette_metric", report.silhouette_metric},
          {"noise_excluded", true},
          {"flags", report.flags}};
}

/// Silhouette, Calinski-Harabasz and Davies-Bouldin for one labeling. Pass
/// `distances` to reuse a precomputed matrix for the silhouette.
inline ScoreReport score_labels(const FeatureTable& table, const LabelVector& labels,
                                const Metric& silhouette_metric = Metric::euclidean(),
                                const DistanceMatrix* distances = nullptr) {
  if (labels.size() != table.rows()) throw DataError("score_labels: label count does not match row count");
  ScoreReport report;
  const auto g = detail::group(labels);
  report.k = g.k();
  report.noise_count = g.noise;
  report.rows_scored = g.rows.size();
  report.silhouette_metric = silhouette_metric.name();
  if (g.noise > 0) report.flags.push_back("noise_excluded");
  if (g.k() < 2) {
    report.flags.push_back("fewer_than_two_clusters");
    return report;
  }
  report.values["silhouette"] = distances ? silhouette(*distances, labels)
                                          : silhouette(table, labels, silhouette_metric);
  report.values["calinski_harabasz"] = calinski_harabasz(table, labels);
  report.values["davies_bouldin"] = davies_bouldin(table, labels);
  for (const auto& [name, value] : report.values)
    if (std::isinf(value)) report.flags.push_back(name + "_degenerate");
  return report;
}

// ---------------------------------------------------------------------------
// Distortion and knee

struct KneeResult {
  std::vector<std::size_t> evaluated_k;
  std::vector<double> scores;
  std::size_t knee_k = 0;
};

/// Point of maximum distance to the chord joining the curve's endpoints, both
/// axes scaled to [0, 1]. Ties go to the smaller k.
inline std::size_t find_knee(const std::vector<std::size_t>& ks, const std::vector<double>& scores) {
  if (ks.size() != scores.size()) throw DataError("find_knee: size mismatch");
  if (ks.size() < 3) throw ConfigError("knee detection needs at least 3 evaluated k values");
  const double x0 = static_cast<double>(ks.front());
  const double x_span = static_cast<double>(ks.back()) - x0;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double y_span = *hi - *lo;
  if (x_span <= 0.0 || y_span <= 0.0) return ks.front();
  auto nx = [&](std::size_t i) { return (static_cast<double>(ks[i]) - x0) / x_span; };
  auto ny = [&](std::size_t i) { return (scores[i] - *lo) / y_span; };
  const double dx = nx(ks.size() - 1) - nx(0);
  const double dy = ny(ks.size() - 1) - ny(0);
  const double length = std::hypot(dx, dy);
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double d = std::abs(dx * (ny(i) - ny(0)) - dy * (nx(i) - nx(0))) / length;
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return ks[best];
}

/// Best k-means model for each k. Each k is also warm-started from the
/// previous k's centroids plus the worst-served point, so inertia never
/// increases along the range.
inline std::vector<KMeansModel> distortion_models(const FeatureTable& table, const std::vector<std::size_t>& k_range,
                                                  std::uint64_t seed, std::size_t restarts = 10) {
  for (std::size_t i = 0; i < k_range.size(); ++i) {
    if (k_range[i] < 1 || k_range[i] > table.rows()) throw ConfigError("distortion: k outside [1, n]");
    if (i && k_range[i] <= k_range[i - 1]) throw ConfigError("distortion: k_range must increase");
  }
  std::vector<KMeansModel> models;
  const auto& x = table.values();
  for (std::size_t k : k_range) {
    KMeansOptions options;
    options.k = k;
    options.seed = seed;
    options.restarts = restarts;
    KMeansModel model = kmeans_fit(table, options);
    if (!models.empty()) {
      Matrix warm = models.back().centroids;
      while (static_cast<std::size_t>(warm.rows()) < k) {
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          const double d = nearest_centroid(x.row(i).transpose(), warm).second;
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        warm.conservativeResize(warm.rows() + 1, Eigen::NoChange);
        warm.row(warm.rows() - 1) = x.row(far);
      }
      KMeansModel warm_model = kmeans_from(table, std::move(warm));
      if (warm_model.inertia < model.inertia) {
        warm_model.seed = seed;
        model = std::move(warm_model);
      }
    }
    models.push_back(std::move(model));
  }
  return models;
}

/// Distortion curve over `k_range` and its knee.
inline KneeResult distortion_knee(const FeatureTable& table, const std::vector<std::size_t>& k_range,
                                  std::uint64_t seed, std::size_t restarts = 10) {
  if (k_range.size() < 3) throw ConfigError("distortion_knee: k_range needs at least 3 values");
  KneeResult result;
  for (const auto& model : distortion_models(table, k_range, seed, restarts)) {
    result.evaluated_k.push_back(model.k);
    result.scores.push_back(model.inertia);
  }
  result.knee_k = find_knee(result.evaluated_k, result.scores);
  return result;
}

// ---------------------------------------------------------------------------
// Information criteria

struct InformationCriteria {
  double bic = 0.0;
  double aic = 0.0;
  double log_likelihood = 0.0;
  std::size_t parameters = 0;
  std::size_t rows = 0;
};

/// BIC = -2 logL + p ln n, AIC = -2 logL + 2p (natural logs).
inline InformationCriteria information_criteria(double log_likelihood, std::size_t parameters, std::size_t rows) {
  InformationCriteria ic;
  ic.log_likelihood = log_likelihood;
  ic.parameters = parameters;
  ic.rows = rows;
  const double p = static_cast<double>(parameters);
  ic.bic = -2.0 * log_likelihood + p * std::log(static_cast<double>(rows));
  ic.aic = -2.0 * log_likelihood + 2.0 * p;
  return ic;
}

inline InformationCriteria information_criteria(const GmmModel& model, const FeatureTable& table) {
  if (table.cols() != model.dims()) throw DataError("information_criteria: dimension mismatch");
  return information_criteria(log_likelihood(model, table),
                              gmm_parameter_count(model.covariance_type, model.k, model.dims()), table.rows());
}

// ---------------------------------------------------------------------------
// V-measure

struct VMeasure {
  double homogeneity = 1.0;
  double completeness = 1.0;
  double v = 1.0;
};

/// Homogeneity of `a` given `b`, completeness, and their harmonic mean. Rows
/// where either labeling is noise are dropped. A component whose reference
/// entropy is zero is 1 by convention; v is 0 if either component is 0.
inline VMeasure v_measure_scores(const LabelVector& a, const LabelVector& b) {
  if (a.size() != b.size()) throw DataError("v_measure: labelings differ in length");
  std::map<int, double> count_a, count_b;
  std::map<std::pair<int, int>, double> joint;
  double n = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == kNoise || b[i] == kNoise) continue;
    count_a[a[i]] += 1.0;
    count_b[b[i]] += 1.0;
    joint[{a[i], b[i]}] += 1.0;
    n += 1.0;
  }
  VMeasure out;
  if (n == 0.0) return out;
  auto entropy = [n](const std::map<int, double>& counts) {
    double h = 0.0;
    for (const auto& [label, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double ha = entropy(count_a);
  const double hb = entropy(count_b);
  double ha_given_b = 0.0;
  double hb_given_a = 0.0;
  for (const auto& [pair, c] : joint) {
    ha_given_b -= (c / n) * std::log(c / count_b.at(pair.second));
    hb_given_a -= (c / n) * std::log(c / count_a.at(pair.first));
  }
  out.homogeneity = ha == 0.0 ? 1.0 : 1.0 - ha_given_b / ha;
  out.completeness = hb == 0.0 ? 1.0 : 1.0 - hb_given_a / hb;
  // Clamp rounding noise around the exact endpoints.
  out.homogeneity = std::clamp(out.homogeneity, 0.0, 1.0);
  out.completeness = std::clamp(out.completeness, 0.0, 1.0);
  if (out.homogeneity == 0.0 || out.completeness == 0.0)
    out.v = 0.0;
  else
    out.v = 2.0 * out.homogeneity * out.completeness / (out.homogeneity + out.completeness);
  return out;
}

inline double v_measure(const LabelVector& a, const LabelVector& b) { return v_measure_scores(a, b).v; }

}  // namespace clustkit
