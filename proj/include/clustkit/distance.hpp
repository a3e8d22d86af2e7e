#pragma once

#include "clustkit/core.hpp"
#include "clustkit/dataset.hpp"

namespace clustkit {

/// Point metric. Minkowski carries its order `p` (>= 1).
struct Metric {
  enum class Kind { euclidean, sqeuclidean, cityblock, cosine, minkowski };
  Kind kind = Kind::euclidean;
  double p = 2.0;

  static Metric euclidean() { return {Kind::euclidean, 2.0}; }
  static Metric sqeuclidean() { return {Kind::sqeuclidean, 2.0}; }
  static Metric cityblock() { return {Kind::cityblock, 1.0}; }
  static Metric cosine() { return {Kind::cosine, 2.0}; }
  static Metric minkowski(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("minkowski order p must be >= 1");
    return {Kind::minkowski, p};
  }

  /// Accepts "euclidean", "sqeuclidean", "cityblock" (or "manhattan"),
  /// "cosine", "minkowski" (p = 2) and "minkowski:<p>".
  static Metric parse(std::string_view name) {
    if (name == "euclidean") return euclidean();
    if (name == "sqeuclidean") return sqeuclidean();
    if (name == "cityblock" || name == "manhattan") return cityblock();
    if (name == "cosine") return cosine();
    if (name == "minkowski") return minkowski(2.0);
    if (name.substr(0, 10) == "minkowski:") {
      const auto rest = name.substr(10);
      double p = 0.0;
      auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), p);
      if (ec != std::errc{} || ptr != rest.data() + rest.size())
        throw ConfigError("bad minkowski order in '" + std::string(name) + "'");
      return minkowski(p);
    }
    throw ConfigError("unknown metric: " + std::string(name));
  }

  std::string name() const {
    switch (kind) {
      case Kind::euclidean: return "euclidean";
      case Kind::sqeuclidean: return "sqeuclidean";
      case Kind::cityblock: return "cityblock";
      case Kind::cosine: return "cosine";
      case Kind::minkowski: return "minkowski:" + format_double(p);
    }
    return "?";
  }

  double operator()(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const {
    switch (kind) {
      case Kind::euclidean: return (a - b).norm();
      case Kind::sqeuclidean: return (a - b).squaredNorm();
      case Kind::cityblock: return (a - b).cwiseAbs().sum();
      case Kind::cosine: {
        const double na = a.norm();
        const double nb = b.norm();
        if (na == 0.0 || nb == 0.0) throw DataError("cosine distance undefined for zero vector");
        const double similarity = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
        return 1.0 - similarity;
      }
      case Kind::minkowski:
        return std::pow((a - b).cwiseAbs().array().pow(p).sum(), 1.0 / p);
    }
    return 0.0;
  }
};

/// Condensed upper-triangle distance matrix: entry (i, j), i < j, lives at
/// n*i - i*(i+1)/2 + (j - i - 1).
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t n, std::vector<double> condensed, std::string metric_name)
      : n_(n), condensed_(std::move(condensed)), metric_name_(std::move(metric_name)) {
    if (condensed_.size() != n_ * (n_ - 1) / 2) throw DataError("condensed distance size mismatch");
    for (double v : condensed_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw NumericError("distance entries must be finite and >= 0");
  }

  std::size_t size() const { return n_; }
  const std::vector<double>& condensed() const { return condensed_; }
  const std::string& metric_name() const { return metric_name_; }

  static std::size_t index(std::size_t n, std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return n * i - i * (i + 1) / 2 + (j - i - 1);
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return condensed_[index(n_, i, j)];
  }

  /// Distances from `i` to every point (0 for itself).
  std::vector<double> row(std::size_t i) const {
    std::vector<double> out(n_);
    for (std::size_t j = 0; j < n_; ++j) out[j] = (*this)(i, j);
    return out;
  }

 private:
  std::size_t n_;
  std::vector<double> condensed_;
  std::string metric_name_;
};

inline DistanceMatrix pairwise_distances(const Matrix& points, const Metric& metric = Metric::euclidean()) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2) throw DataError("pairwise_distances needs at least 2 points");
  if (metric.kind == Metric::Kind::cosine)
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      if (points.row(i).squaredNorm() == 0.0)
        throw DataError("cosine metric undefined: row " + std::to_string(i) + " is the zero vector");
  std::vector<double> condensed;
  condensed.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      condensed.push_back(metric(points.row(static_cast<Eigen::Index>(i)).transpose(),
                                 points.row(static_cast<Eigen::Index>(j)).transpose()));
  return DistanceMatrix(n, std::move(condensed), metric.name());
}

inline DistanceMatrix pairwise_distances(const FeatureTable& table, const Metric& metric = Metric::euclidean()) {
  return pairwise_distances(table.values(), metric);
}

}  // namespace clustkit
