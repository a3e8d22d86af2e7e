#pragma once

// Prototype-based clustering: K-means (Lloyd), mini-batch K-means, fuzzy
// c-means and Gaussian mixtures fit by expectation-maximization.

#include "clustkit/core.hpp"
#include "clustkit/dataset.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <numeric>

namespace clustkit {

// ---------------------------------------------------------------------------
// Shared helpers

/// Nearest centroid by squared euclidean distance; ties go to the lowest index.
inline std::pair<int, double> nearest_centroid(const Eigen::Ref<const Vector>& point, const Matrix& centroids) {
  int best = 0;
  double best_d = kInf;
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c).transpose() - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return {best, best_d};
}

/// Picks `k` initial centroids from the rows of `x`. k-means++ (D^2
/// weighting) by default, uniform without replacement when `uniform` is set.
inline Matrix seed_centroids(const Matrix& x, std::size_t k, Rng& rng, bool uniform = false) {
  const auto n = static_cast<std::size_t>(x.rows());
  Matrix centroids(static_cast<Eigen::Index>(k), x.cols());
  if (uniform) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t pick = c + uniform_index(rng, n - c);
      std::swap(pool[c], pool[pick]);
      centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pool[c]));
    }
    return centroids;
  }

  std::vector<double> closest(n, kInf);
  std::size_t first = uniform_index(rng, n);
  centroids.row(0) = x.row(static_cast<Eigen::Index>(first));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (x.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(c - 1))).squaredNorm();
      closest[i] = std::min(closest[i], d);
      total += closest[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double running = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        running += closest[i];
        if (running > target && closest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
  }
  return centroids;
}

inline double inertia_of(const Matrix& x, const LabelVector& labels, const Matrix& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    total += (x.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return total;
}

inline void check_cluster_count(std::size_t k, std::size_t n, const char* what) {
  if (n == 0) throw DataError(std::string(what) + ": empty table");
  if (k < 1) throw ConfigError(std::string(what) + ": cluster count must be >= 1");
  if (k > n)
    throw ConfigError(std::string(what) + ": cluster count " + std::to_string(k) + " exceeds row count " +
                      std::to_string(n));
}

// ---------------------------------------------------------------------------
// K-means

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t restarts = 10;
  double tolerance = 1e-10;       // stop when no centroid moves farther than this
  std::size_t max_iterations = 300;
  bool uniform_init = false;      // force uniform seeding instead of k-means++
};

struct KMeansModel {
  std::size_t k = 0;
  Matrix centroids;
  LabelVector labels;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_trace;  // after every assignment step
};

namespace detail {

inline LabelVector assign_all(const Matrix& x, const Matrix& centroids) {
  LabelVector labels(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    labels[static_cast<std::size_t>(i)] = nearest_centroid(x.row(i).transpose(), centroids).first;
  return labels;
}

/// Means of assigned points. Empty clusters are reseeded at the point
/// farthest from its own centroid (taken from a cluster with more than one
/// member); that point is moved into the empty cluster.
inline Matrix update_means(const Matrix& x, LabelVector& labels, const Matrix& previous) {
  const auto k = previous.rows();
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int label : labels) ++sizes[static_cast<std::size_t>(label)];

  for (Eigen::Index c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] != 0) continue;
    std::size_t far = labels.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto own = static_cast<std::size_t>(labels[i]);
      if (sizes[own] < 2) continue;
      const double d = (x.row(static_cast<Eigen::Index>(i)) - previous.row(labels[i])).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == labels.size() || far_d <= 0.0) continue;  // fewer distinct points than clusters
    --sizes[static_cast<std::size_t>(labels[far])];
    labels[far] = static_cast<int>(c);
    sizes[static_cast<std::size_t>(c)] = 1;
  }

  Matrix sums = Matrix::Zero(k, x.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) sums.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
  Matrix means = previous;
  for (Eigen::Index c = 0; c < k; ++c)
    if (sizes[static_cast<std::size_t>(c)] > 0)
      means.row(c) = sums.row(c) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
  return means;
}

inline KMeansModel lloyd(const Matrix& x, Matrix centroids, double tolerance, std::size_t max_iterations) {
  KMeansModel model;
  model.k = static_cast<std::size_t>(centroids.rows());
  LabelVector labels = assign_all(x, centroids);
  model.inertia_trace.push_back(inertia_of(x, labels, centroids));

  for (std::size_t it = 1; it <= max_iterations; ++it) {
    Matrix updated = update_means(x, labels, centroids);
    const double shift = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    LabelVector next = assign_all(x, centroids);
    model.inertia_trace.push_back(inertia_of(x, next, centroids));
    model.iterations = it;
    const bool stable = next == labels;
    labels = std::move(next);
    if (stable || shift < tolerance) break;
  }

  // Final centroids are the means of the final assignment.
  std::vector<std::size_t> sizes(model.k, 0);
  Matrix sums = Matrix::Zero(centroids.rows(), x.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sums.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
    ++sizes[static_cast<std::size_t>(labels[i])];
  }
  for (Eigen::Index c = 0; c < centroids.rows(); ++c)
    if (sizes[static_cast<std::size_t>(c)] > 0)
      centroids.row(c) = sums.row(c) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);

  model.inertia = inertia_of(x, labels, centroids);
  model.centroids = std::move(centroids);
  model.labels = std::move(labels);
  return model;
}

}  // namespace detail

/// Lloyd iterations from the given starting centroids (no restarts).
inline KMeansModel kmeans_from(const FeatureTable& table, Matrix initial, double tolerance = 1e-10,
                               std::size_t max_iterations = 300) {
  if (initial.cols() != static_cast<Eigen::Index>(table.cols())) throw DataError("kmeans: dimension mismatch");
  check_cluster_count(static_cast<std::size_t>(initial.rows()), table.rows(), "kmeans");
  return detail::lloyd(table.values(), std::move(initial), tolerance, max_iterations);
}

/// Best of `restarts` seeded Lloyd runs by inertia. Deterministic per seed.
inline KMeansModel kmeans_fit(const FeatureTable& table, const KMeansOptions& options) {
  check_cluster_count(options.k, table.rows(), "kmeans");
  if (!(options.tolerance > 0.0)) throw ConfigError("kmeans: tolerance must be positive");
  const auto& x = table.values();
  Rng rng(options.seed);
  KMeansModel best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
    Matrix init = seed_centroids(x, options.k, rng, options.uniform_init);
    KMeansModel run = detail::lloyd(x, std::move(init), options.tolerance, options.max_iterations);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  best.seed = options.seed;
  return best;
}

// ---------------------------------------------------------------------------
// Mini-batch K-means

struct MiniBatchConfig {
  std::size_t k = 2;
  std::size_t batch_size = 0;  // 0 selects default_batch_size(n)
  std::size_t max_iterations = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-7;     // stop once no centroid moves more than this in an iteration
  bool uniform_init = false;

  /// 10% of the rows, capped at 1024, never below k.
  static std::size_t default_batch_size(std::size_t n, std::size_t k) {
    return std::min(n, std::max<std::size_t>({k, std::size_t{1}, std::min<std::size_t>(n / 10, 1024)}));
  }
};

/// Each iteration draws `batch_size` distinct rows, assigns them to the
/// current centroids and folds them into a per-centroid running average
/// (learning rate 1 / samples ever assigned). Labels come from one final full
/// assignment pass; the centroids are running averages, not exact means.
inline KMeansModel minibatch_kmeans_fit(const FeatureTable& table, const MiniBatchConfig& config) {
  const std::size_t n = table.rows();
  check_cluster_count(config.k, n, "minibatch");
  const std::size_t batch = config.batch_size == 0 ? MiniBatchConfig::default_batch_size(n, config.k)
                                                   : config.batch_size;
  if (batch > n) throw ConfigError("minibatch: batch_size exceeds row count");
  const auto& x = table.values();

  Rng rng(config.seed);
  Matrix centroids = seed_centroids(x, config.k, rng, config.uniform_init);
  std::vector<double> counts(config.k, 0.0);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> batch_labels(batch);

  KMeansModel model;
  model.k = config.k;
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t pick = b + uniform_index(rng, n - b);
      std::swap(pool[b], pool[pick]);
    }
    for (std::size_t b = 0; b < batch; ++b)
      batch_labels[b] = nearest_centroid(x.row(static_cast<Eigen::Index>(pool[b])).transpose(), centroids).first;
    const Matrix before = centroids;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto c = static_cast<std::size_t>(batch_labels[b]);
      counts[c] += 1.0;
      const auto row = static_cast<Eigen::Index>(c);
      centroids.row(row) += (x.row(static_cast<Eigen::Index>(pool[b])) - centroids.row(row)) / counts[c];
    }
    model.iterations = it;
    const double shift = (centroids - before).rowwise().norm().maxCoeff();
    if (shift < config.tolerance) break;
  }

  model.labels = detail::assign_all(x, centroids);
  model.inertia = inertia_of(x, model.labels, centroids);
  model.centroids = std::move(centroids);
  model.seed = config.seed;
  return model;
}

// ---------------------------------------------------------------------------
// Fuzzy c-means

struct FuzzyOptions {
  std::size_t c = 2;
  double fuzzifier = 2.0;
  std::uint64_t seed = 0;
  double tolerance = 1e-7;  // on the largest membership change
  std::size_t max_iterations = 500;
};

struct FuzzyModel {
  std::size_t c = 0;
  double fuzzifier = 2.0;
  Matrix membership;  // n x c, rows sum to 1
  Matrix centroids;   // c x d
  std::size_t iterations = 0;
  std::uint64_t seed = 0;

  /// Argmax membership per row, ties to the lowest cluster.
  LabelVector hardened() const {
    LabelVector labels(static_cast<std::size_t>(membership.rows()));
    for (Eigen::Index i = 0; i < membership.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < membership.cols(); ++j)
        if (membership(i, j) > membership(i, best)) best = j;
      labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return labels;
  }
};

/// Membership of one point: u_j = 1 / sum_l (d_j / d_l)^(2 / (m - 1)). A point
/// on a centroid gets membership 1 there (first such centroid) and 0 elsewhere.
inline Vector fuzzy_memberships(const Eigen::Ref<const Vector>& point, const Matrix& centroids, double fuzzifier) {
  if (!(fuzzifier > 1.0)) throw ConfigError("fuzzifier must be > 1");
  const auto c = centroids.rows();
  Vector distances(c);
  for (Eigen::Index j = 0; j < c; ++j) distances(j) = (centroids.row(j).transpose() - point).norm();
  Vector u = Vector::Zero(c);
  for (Eigen::Index j = 0; j < c; ++j)
    if (distances(j) == 0.0) {
      u(j) = 1.0;
      return u;
    }
  // Weights d_j^(-2/(m-1)), evaluated in log space.
  const double exponent = -2.0 / (fuzzifier - 1.0);
  Vector logw = distances.array().log() * exponent;
  const double top = logw.maxCoeff();
  u = (logw.array() - top).exp();
  return u / u.sum();
}

inline FuzzyModel fuzzy_cmeans_fit(const FeatureTable& table, const FuzzyOptions& options) {
  const std::size_t n = table.rows();
  check_cluster_count(options.c, n, "fuzzy");
  if (!(options.fuzzifier > 1.0)) throw ConfigError("fuzzy: fuzzifier must be > 1");
  const auto& x = table.values();
  const auto c = static_cast<Eigen::Index>(options.c);

  Rng rng(options.seed);
  Matrix u(x.rows(), c);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < c; ++j) u(i, j) = uniform01(rng) + 1e-3;
    u.row(i) /= u.row(i).sum();
  }

  FuzzyModel model;
  model.c = options.c;
  model.fuzzifier = options.fuzzifier;
  model.seed = options.seed;
  Matrix centroids(c, x.cols());
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    const Matrix weights = u.array().pow(options.fuzzifier).matrix();
    for (Eigen::Index j = 0; j < c; ++j) {
      const double total = weights.col(j).sum();
      centroids.row(j) = (weights.col(j).transpose() * x) / total;
    }
    Matrix next(x.rows(), c);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      next.row(i) = fuzzy_memberships(x.row(i).transpose(), centroids, options.fuzzifier).transpose();
    const double change = (next - u).cwiseAbs().maxCoeff();
    u = std::move(next);
    model.iterations = it;
    if (change < options.tolerance) break;
  }
  model.membership = std::move(u);
  model.centroids = std::move(centroids);
  return model;
}

// ---------------------------------------------------------------------------
// Gaussian mixtures

enum class CovarianceType { full, tied, diagonal, spherical };

inline std::string to_string(CovarianceType type) {
  switch (type) {
    case CovarianceType::full: return "full";
    case CovarianceType::tied: return "tied";
    case CovarianceType::diagonal: return "diagonal";
    case CovarianceType::spherical: return "spherical";
  }
  return "?";
}

inline CovarianceType parse_covariance_type(std::string_view name) {
  if (name == "full") return CovarianceType::full;
  if (name == "tied") return CovarianceType::tied;
  if (name == "diagonal" || name == "diag") return CovarianceType::diagonal;
  if (name == "spherical") return CovarianceType::spherical;
  throw ConfigError("unknown covariance type: " + std::string(name));
}

/// Free parameters of a k-component mixture in d dimensions.
inline std::size_t gmm_parameter_count(CovarianceType type, std::size_t k, std::size_t d) {
  std::size_t covariance = 0;
  switch (type) {
    case CovarianceType::full: covariance = k * d * (d + 1) / 2; break;
    case CovarianceType::tied: covariance = d * (d + 1) / 2; break;
    case CovarianceType::diagonal: covariance = k * d; break;
    case CovarianceType::spherical: covariance = k; break;
  }
  return (k - 1) + k * d + covariance;
}

struct GmmOptions {
  std::size_t k = 2;
  CovarianceType covariance_type = CovarianceType::full;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 500;
  double tolerance = 1e-8;  // on the gain in mean per-row log-likelihood
  double reg_floor = 1e-6;  // added to every covariance diagonal
};

struct GmmModel {
  std::size_t k = 0;
  CovarianceType covariance_type = CovarianceType::full;
  std::vector<double> weights;
  Matrix means;                     // k x d
  std::vector<Matrix> covariances;  // k matrices, d x d (tied: k identical copies)
  std::vector<double> log_likelihood_trace;  // total log-likelihood per EM step
  bool converged = false;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  double reg_floor = 1e-6;
  LabelVector labels;

  std::size_t dims() const { return static_cast<std::size_t>(means.cols()); }
};

namespace detail {

struct GaussianTerms {
  std::vector<Eigen::LLT<Matrix>> factors;
  std::vector<double> log_norm;  // -0.5 (d log 2pi + log det)
};

inline GaussianTerms factorize(const GmmModel& model) {
  GaussianTerms terms;
  const double d = static_cast<double>(model.dims());
  for (const auto& cov : model.covariances) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericError("gmm: covariance is singular even after regularization");
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    terms.log_norm.push_back(-0.5 * (d * std::log(2.0 * M_PI) + log_det));
    terms.factors.push_back(std::move(llt));
  }
  return terms;
}

/// Per-row, per-component log(w_k N(x | mu_k, Sigma_k)).
inline Matrix weighted_log_density(const GmmModel& model, const Matrix& x) {
  const auto terms = factorize(model);
  const auto k = static_cast<Eigen::Index>(model.k);
  Matrix out(x.rows(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& llt = terms.factors[static_cast<std::size_t>(c)];
    Matrix centered = (x.rowwise() - model.means.row(c)).transpose();  // d x n
    llt.matrixL().solveInPlace(centered);
    const Vector mahalanobis = centered.colwise().squaredNorm().transpose();
    const double log_w = model.weights[static_cast<std::size_t>(c)] > 0
                             ? std::log(model.weights[static_cast<std::size_t>(c)])
                             : -kInf;
    out.col(c) = (-0.5 * mahalanobis.array() + terms.log_norm[static_cast<std::size_t>(c)] + log_w).matrix();
  }
  return out;
}

/// Responsibilities (written to `resp`) and total log-likelihood.
inline double expectation(const GmmModel& model, const Matrix& x, Matrix& resp) {
  resp = weighted_log_density(model, x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    const double top = resp.row(i).maxCoeff();
    const double lse = top + std::log((resp.row(i).array() - top).exp().sum());
    resp.row(i) = (resp.row(i).array() - lse).exp();
    total += lse;
  }
  if (!std::isfinite(total)) throw NumericError("gmm: non-finite log-likelihood");
  return total;
}

inline void maximization(GmmModel& model, const Matrix& x, const Matrix& resp) {
  const auto k = resp.cols();
  const auto d = x.cols();
  const double n = static_cast<double>(x.rows());
  const double eps = 10.0 * std::numeric_limits<double>::epsilon();
  Vector nk = resp.colwise().sum().transpose().array() + eps;

  model.means = (resp.transpose() * x).array().colwise() / nk.array();
  model.weights.assign(static_cast<std::size_t>(k), 0.0);
  const double weight_total = nk.sum();
  for (Eigen::Index c = 0; c < k; ++c) model.weights[static_cast<std::size_t>(c)] = nk(c) / weight_total;

  const Matrix identity = Matrix::Identity(d, d);
  model.covariances.assign(static_cast<std::size_t>(k), Matrix::Zero(d, d));
  switch (model.covariance_type) {
    case CovarianceType::full:
      for (Eigen::Index c = 0; c < k; ++c) {
        Matrix centered = x.rowwise() - model.means.row(c);
        Matrix scatter = centered.transpose() * (centered.array().colwise() * resp.col(c).array()).matrix();
        scatter = 0.5 * (scatter + scatter.transpose());
        model.covariances[static_cast<std::size_t>(c)] = scatter / nk(c) + model.reg_floor * identity;
      }
      break;
    case CovarianceType::tied: {
      Matrix scatter = Matrix::Zero(d, d);
      for (Eigen::Index c = 0; c < k; ++c) {
        Matrix centered = x.rowwise() - model.means.row(c);
        scatter += centered.transpose() * (centered.array().colwise() * resp.col(c).array()).matrix();
      }
      scatter = 0.5 * (scatter + scatter.transpose());
      const Matrix shared = scatter / n + model.reg_floor * identity;
      for (auto& cov : model.covariances) cov = shared;
      break;
    }
    case CovarianceType::diagonal:
    case CovarianceType::spherical:
      for (Eigen::Index c = 0; c < k; ++c) {
        Matrix centered = x.rowwise() - model.means.row(c);
        Vector variance = (centered.array().square().colwise() * resp.col(c).array()).colwise().sum().transpose() / nk(c);
        if (model.covariance_type == CovarianceType::spherical) variance.setConstant(variance.mean());
        model.covariances[static_cast<std::size_t>(c)] =
            (variance.array() + model.reg_floor).matrix().asDiagonal();
      }
      break;
  }
}

}  // namespace detail

/// EM from k-means++ seeded means. The trace holds the total log-likelihood
/// after initialization and after every M-step; iteration stops once the
/// mean per-row gain drops below `tolerance`.
inline GmmModel gmm_fit(const FeatureTable& table, const GmmOptions& options) {
  check_cluster_count(options.k, table.rows(), "gmm");
  if (!(options.reg_floor > 0.0)) throw ConfigError("gmm: reg_floor must be positive");
  const auto& x = table.values();
  const double n = static_cast<double>(x.rows());

  GmmModel model;
  model.k = options.k;
  model.covariance_type = options.covariance_type;
  model.seed = options.seed;
  model.reg_floor = options.reg_floor;

  Rng rng(options.seed);
  const Matrix seeds = seed_centroids(x, options.k, rng);
  Matrix resp = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(options.k));
  for (Eigen::Index i = 0; i < x.rows(); ++i) resp(i, nearest_centroid(x.row(i).transpose(), seeds).first) = 1.0;
  detail::maximization(model, x, resp);

  double previous = detail::expectation(model, x, resp);
  model.log_likelihood_trace.push_back(previous);
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    detail::maximization(model, x, resp);
    const double current = detail::expectation(model, x, resp);
    model.log_likelihood_trace.push_back(current);
    model.iterations = it;
    const double gain = (current - previous) / n;
    previous = current;
    if (gain < options.tolerance) {
      model.converged = true;
      break;
    }
  }

  model.labels.resize(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < resp.cols(); ++c)
      if (resp(i, c) > resp(i, best)) best = c;
    model.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return model;
}

/// Posterior component probabilities, rows sum to 1.
inline Matrix predict_proba(const GmmModel& model, const FeatureTable& table) {
  if (table.cols() != model.dims()) throw DataError("gmm: dimension mismatch");
  Matrix resp;
  detail::expectation(model, table.values(), resp);
  return resp;
}

inline double log_likelihood(const GmmModel& model, const FeatureTable& table) {
  if (table.cols() != model.dims()) throw DataError("gmm: dimension mismatch");
  Matrix resp;
  return detail::expectation(model, table.values(), resp);
}

// ---------------------------------------------------------------------------
// Assignment of new data

inline LabelVector assign(const KMeansModel& model, const FeatureTable& table) {
  if (static_cast<Eigen::Index>(table.cols()) != model.centroids.cols())
    throw DataError("assign: table has " + std::to_string(table.cols()) + " columns, model expects " +
                    std::to_string(model.centroids.cols()));
  return detail::assign_all(table.values(), model.centroids);
}

/// Argmax of log(w_k) + log N(x | mu_k, Sigma_k), ties to the lowest index.
inline LabelVector assign(const GmmModel& model, const FeatureTable& table) {
  if (table.cols() != model.dims())
    throw DataError("assign: table has " + std::to_string(table.cols()) + " columns, model expects " +
                    std::to_string(model.dims()));
  const Matrix scores = detail::weighted_log_density(model, table.values());
  LabelVector labels(table.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const KMeansModel& model) {
  return {{"kind", "kmeans"},
          {"k", model.k},
          {"seed", model.seed},
          {"iterations", model.iterations},
          {"inertia", model.inertia},
          {"centroids", matrix_to_json(model.centroids)}};
}

inline KMeansModel kmeans_from_json(const nlohmann::json& j) {
  KMeansModel model;
  model.k = j.at("k").get<std::size_t>();
  model.seed = j.value("seed", std::uint64_t{0});
  model.iterations = j.value("iterations", std::size_t{0});
  model.inertia = j.value("inertia", 0.0);
  model.centroids = matrix_from_json(j.at("centroids"));
  return model;
}

inline nlohmann::json to_json(const GmmModel& model) {
  nlohmann::json covs = nlohmann::json::array();
  for (const auto& cov : model.covariances) covs.push_back(matrix_to_json(cov));
  return {{"kind", "gmm"},
          {"k", model.k},
          {"covariance_type", to_string(model.covariance_type)},
          {"seed", model.seed},
          {"reg_floor", model.reg_floor},
          {"converged", model.converged},
          {"iterations", model.iterations},
          {"weights", model.weights},
          {"means", matrix_to_json(model.means)},
          {"covariances", covs},
          {"log_likelihood_trace", model.log_likelihood_trace}};
}

inline GmmModel gmm_from_json(const nlohmann::json& j) {
  GmmModel model;
  model.k = j.at("k").get<std::size_t>();
  model.covariance_type = parse_covariance_type(j.at("covariance_type").get<std::string>());
  model.seed = j.value("seed", std::uint64_t{0});
  model.reg_floor = j.value("reg_floor", 1e-6);
  model.converged = j.value("converged", false);
  model.weights = j.at("weights").get<std::vector<double>>();
  model.means = matrix_from_json(j.at("means"));
  for (const auto& cov : j.at("covariances")) model.covariances.push_back(matrix_from_json(cov));
  if (model.weights.size() != model.k || model.covariances.size() != model.k ||
      model.means.rows() != static_cast<Eigen::Index>(model.k))
    throw DataError("gmm json: component count mismatch");
  return model;
}

}  // namespace clustkit
