#pragma once

// DBSCAN and OPTICS over brute-force neighborhoods.

#include "clustkit/core.hpp"
#include "clustkit/distance.hpp"

#include <deque>
#include <ostream>
#include <set>

namespace clustkit {

struct DensityParams {
  double eps = kInf;        // neighborhood radius; infinity is allowed for OPTICS
  std::size_t min_pts = 5;  // neighbors required for a core point, self included
  Metric metric = Metric::euclidean();

  void validate() const {
    if (min_pts < 2) throw ConfigError("min_pts must be >= 2");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  }
};

enum class PointKind { core, border, noise };

struct DbscanResult {
  LabelVector labels;
  std::vector<PointKind> kinds;
};

/// Core points within eps of each other share a cluster; a border point joins
/// the cluster of the first core point (by index) within eps; the rest are
/// noise. Neighborhoods are closed balls (distance <= eps).
inline DbscanResult dbscan(const DistanceMatrix& distances, const DensityParams& params) {
  params.validate();
  const std::size_t n = distances.size();
  DbscanResult out{LabelVector(n, kNoise), std::vector<PointKind>(n, PointKind::noise)};
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (distances(i, j) <= params.eps) ++count;
    core[i] = count >= params.min_pts;
  }

  int cluster = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (!core[start] || out.labels[start] != kNoise) continue;
    std::deque<std::size_t> queue{start};
    out.labels[start] = cluster;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      for (std::size_t q = 0; q < n; ++q)
        if (core[q] && out.labels[q] == kNoise && distances(p, q) <= params.eps) {
          out.labels[q] = cluster;
          queue.push_back(q);
        }
    }
    ++cluster;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      out.kinds[i] = PointKind::core;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (core[j] && distances(i, j) <= params.eps) {
        out.labels[i] = out.labels[j];
        out.kinds[i] = PointKind::border;
        break;
      }
  }
  return out;
}

inline DbscanResult dbscan(const FeatureTable& table, const DensityParams& params) {
  params.validate();
  return dbscan(pairwise_distances(table, params.metric), params);
}

/// Undefined core and reachability distances are stored as +infinity.
struct OpticsResult {
  std::vector<std::size_t> ordering;
  std::vector<double> core_distance;
  std::vector<double> reachability;
  std::vector<long> predecessor;  // point whose expansion set the reachability, -1 if none
  double eps = kInf;
  std::size_t min_pts = 2;
  std::string metric_name;
};

inline OpticsResult optics_order(const DistanceMatrix& distances, const DensityParams& params) {
  params.validate();
  const std::size_t n = distances.size();
  OpticsResult out;
  out.eps = params.eps;
  out.min_pts = params.min_pts;
  out.metric_name = distances.metric_name();
  out.core_distance.assign(n, kInf);
  out.reachability.assign(n, kInf);
  out.predecessor.assign(n, -1);
  out.ordering.reserve(n);

  if (params.min_pts <= n) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = distances.row(i);
      auto kth = row.begin() + static_cast<std::ptrdiff_t>(params.min_pts - 1);
      std::nth_element(row.begin(), kth, row.end());
      if (*kth <= params.eps) out.core_distance[i] = *kth;
    }
  }

  std::vector<bool> processed(n, false);
  std::set<std::pair<double, std::size_t>> seeds;
  auto expand = [&](std::size_t p) {
    const double core = out.core_distance[p];
    for (std::size_t o = 0; o < n; ++o) {
      if (processed[o]) continue;
      const double d = distances(p, o);
      if (d > params.eps) continue;
      const double reach = std::max(core, d);
      if (reach < out.reachability[o]) {
        if (out.reachability[o] < kInf) seeds.erase({out.reachability[o], o});
        out.reachability[o] = reach;
        out.predecessor[o] = static_cast<long>(p);
        seeds.insert({reach, o});
      }
    }
  };

  for (std::size_t start = 0; start < n; ++start) {
    if (processed[start]) continue;
    processed[start] = true;
    out.ordering.push_back(start);
    if (out.core_distance[start] == kInf) continue;
    expand(start);
    while (!seeds.empty()) {
      const std::size_t q = seeds.begin()->second;
      seeds.erase(seeds.begin());
      processed[q] = true;
      out.ordering.push_back(q);
      if (out.core_distance[q] < kInf) expand(q);
    }
  }
  return out;
}

inline OpticsResult optics_order(const FeatureTable& table, const DensityParams& params) {
  params.validate();
  return optics_order(pairwise_distances(table, params.metric), params);
}

/// Threshold cut of the reachability plot: walking the ordering, a point whose
/// reachability exceeds `threshold` opens a new cluster if its core distance
/// is within the threshold and is noise otherwise; every other point joins the
/// current cluster.
inline LabelVector extract_clusters(const OpticsResult& result, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("extraction threshold must be positive");
  if (threshold > result.eps)
    throw ConfigError("extraction threshold " + format_double(threshold) + " exceeds ordering eps " +
                      format_double(result.eps));
  LabelVector labels(result.ordering.size(), kNoise);
  int cluster = kNoise;
  for (std::size_t p : result.ordering) {
    if (result.reachability[p] > threshold) {
      if (result.core_distance[p] <= threshold) labels[p] = ++cluster;
    } else {
      labels[p] = cluster;
    }
  }
  return labels;
}

/// Deciles (10%..90%) of the finite reachability values, linear
/// interpolation, duplicates and non-positive values removed.
inline std::vector<double> reachability_deciles(const OpticsResult& result) {
  std::vector<double> finite;
  for (double r : result.reachability)
    if (std::isfinite(r)) finite.push_back(r);
  std::vector<double> out;
  if (finite.empty()) return out;
  std::sort(finite.begin(), finite.end());
  for (int q = 1; q <= 9; ++q) {
    const double pos = 0.1 * q * static_cast<double>(finite.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, finite.size() - 1);
    const double value = finite[lo] + (pos - static_cast<double>(lo)) * (finite[hi] - finite[lo]);
    if (value > 0.0 && (out.empty() || value > out.back())) out.push_back(value);
  }
  return out;
}

/// CSV with columns order_position, point_id, reachability, core_distance;
/// undefined distances are written as "inf".
inline void write_reachability_csv(std::ostream& out, const OpticsResult& result,
                                   const std::vector<std::string>& row_ids = {}) {
  out << "order_position,point_id,reachability,core_distance\n";
  for (std::size_t pos = 0; pos < result.ordering.size(); ++pos) {
    const std::size_t p = result.ordering[pos];
    const std::string id = p < row_ids.size() ? row_ids[p] : std::to_string(p);
    csv::write_row(out, {std::to_string(pos), id, format_double(result.reachability[p]),
                         format_double(result.core_distance[p])});
  }
}

}  // namespace clustkit
