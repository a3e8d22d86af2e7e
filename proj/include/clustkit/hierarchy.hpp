#pragma once

// Agglomerative clustering with Lance-Williams distance updates.

#include "clustkit/core.hpp"
#include "clustkit/distance.hpp"

#include <ostream>
#include <sstream>

namespace clustkit {

enum class Linkage { single, complete, average, ward };

inline std::string to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
    case Linkage::ward: return "ward";
  }
  return "?";
}

inline Linkage parse_linkage(std::string_view name) {
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  if (name == "average") return Linkage::average;
  if (name == "ward") return Linkage::ward;
  throw ConfigError("unknown linkage: " + std::string(name));
}

/// One merge step. Cluster ids follow the usual convention: original points
/// are 0..n-1 and the cluster formed at step s gets id n+s.
struct Merge {
  std::size_t a = 0;  // smaller id
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::size_t n = 0;
  std::vector<Merge> merges;  // n-1 entries
  std::string linkage_name;
  std::string metric_name;
  std::string height_convention;
};

/// Merges the closest pair of clusters until one remains. Among equally close
/// pairs the lexicographically smallest (slot, slot) pair wins, where a
/// cluster's slot is the smallest original index it contains.
///
/// Ward requires euclidean input; its heights are sqrt(2 * increase in
/// within-cluster sum of squares), i.e. the Lance-Williams recurrence run on
/// squared distances with the square root applied to each merge height.
inline Dendrogram agglomerate(const DistanceMatrix& distances, Linkage linkage) {
  const std::size_t n = distances.size();
  if (linkage == Linkage::ward && distances.metric_name() != "euclidean")
    throw ConfigError("ward linkage requires the euclidean metric, got " + distances.metric_name());

  std::vector<double> d = distances.condensed();
  if (linkage == Linkage::ward)
    for (auto& v : d) v *= v;
  auto at = [&](std::size_t i, std::size_t j) -> double& { return d[DistanceMatrix::index(n, i, j)]; };

  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> id(n);
  std::iota(id.begin(), id.end(), 0);
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_dist(n, kInf);

  auto refresh = [&](std::size_t i) {
    nn[i] = n;
    nn_dist[i] = kInf;
    for (std::size_t j = i + 1; j < n; ++j)
      if (active[j] && at(i, j) < nn_dist[i]) {
        nn_dist[i] = at(i, j);
        nn[i] = j;
      }
  };
  for (std::size_t i = 0; i + 1 < n; ++i) refresh(i);

  Dendrogram out;
  out.n = n;
  out.linkage_name = to_string(linkage);
  out.metric_name = distances.metric_name();
  out.height_convention = linkage == Linkage::ward
                              ? "sqrt(2 * increase in within-cluster sum of squares)"
                              : "linkage distance between the merged clusters";
  out.merges.reserve(n - 1);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t i = n;
    double best = kInf;
    for (std::size_t s = 0; s < n; ++s)
      if (active[s] && nn[s] < n && (i == n || nn_dist[s] < best)) {
        best = nn_dist[s];
        i = s;
      }
    const std::size_t j = nn[i];
    const double dij = at(i, j);
    const double ni = static_cast<double>(size[i]);
    const double nj = static_cast<double>(size[j]);

    Merge merge;
    merge.a = std::min(id[i], id[j]);
    merge.b = std::max(id[i], id[j]);
    merge.height = linkage == Linkage::ward ? std::sqrt(std::max(0.0, dij)) : dij;
    merge.size = size[i] + size[j];
    out.merges.push_back(merge);

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == i || k == j) continue;
      const double dik = at(i, k);
      const double djk = at(j, k);
      double updated = 0.0;
      switch (linkage) {
        case Linkage::single: updated = std::min(dik, djk); break;
        case Linkage::complete: updated = std::max(dik, djk); break;
        case Linkage::average: updated = (ni * dik + nj * djk) / (ni + nj); break;
        case Linkage::ward: {
          const double nk = static_cast<double>(size[k]);
          updated = std::max(0.0, ((ni + nk) * dik + (nj + nk) * djk - nk * dij) / (ni + nj + nk));
          break;
        }
      }
      at(i, k) = updated;
    }
    active[j] = false;
    size[i] += size[j];
    id[i] = n + step;
    nn[j] = n;
    nn_dist[j] = kInf;

    refresh(i);
    for (std::size_t k = 0; k < j; ++k) {
      if (!active[k] || k == i) continue;
      if (k < i) {
        if (nn[k] == i || nn[k] == j) {
          refresh(k);
        } else if (at(k, i) < nn_dist[k] || (at(k, i) == nn_dist[k] && i < nn[k])) {
          nn[k] = i;
          nn_dist[k] = at(k, i);
        }
      } else if (nn[k] == j) {
        refresh(k);
      }
    }
  }
  return out;
}

/// Undoes the last k-1 merges. Labels are numbered 0..k-1 by first row
/// appearance.
inline LabelVector cut(const Dendrogram& dendrogram, std::size_t k) {
  const std::size_t n = dendrogram.n;
  if (k < 1 || k > n) throw ConfigError("cut: k must lie in [1, " + std::to_string(n) + "]");
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t s = 0; s < n - k; ++s) {
    const auto& m = dendrogram.merges[s];
    parent[find(m.a)] = n + s;
    parent[find(m.b)] = n + s;
  }
  std::map<std::size_t, int> remap;
  LabelVector labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = remap.try_emplace(find(i), static_cast<int>(remap.size()));
    labels[i] = it->second;
  }
  return labels;
}

inline nlohmann::json to_json(const Dendrogram& dendrogram) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : dendrogram.merges) merges.push_back({m.a, m.b, m.height, m.size});
  return {{"n", dendrogram.n},
          {"linkage", dendrogram.linkage_name},
          {"metric", dendrogram.metric_name},
          {"height_convention", dendrogram.height_convention},
          {"merges", merges}};
}

inline Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram out;
  out.n = j.at("n").get<std::size_t>();
  out.linkage_name = j.value("linkage", "");
  out.metric_name = j.value("metric", "");
  out.height_convention = j.value("height_convention", "");
  for (const auto& m : j.at("merges"))
    out.merges.push_back({m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(), m.at(2).get<double>(),
                          m.at(3).get<std::size_t>()});
  if (out.n == 0 || out.merges.size() != out.n - 1) throw DataError("dendrogram json: wrong merge count");
  return out;
}

/// Indented text rendering, root first. Intended for small n.
inline std::string render_text(const Dendrogram& dendrogram, const std::vector<std::string>& row_names = {}) {
  std::ostringstream out;
  const std::size_t n = dendrogram.n;
  auto visit = [&](auto&& self, std::size_t node, std::size_t depth) -> void {
    out << std::string(depth * 2, ' ');
    if (node < n) {
      out << "- " << (node < row_names.size() ? row_names[node] : std::to_string(node)) << '\n';
      return;
    }
    const auto& m = dendrogram.merges[node - n];
    out << "+ [" << format_double(m.height) << "] size " << m.size << '\n';
    self(self, m.a, depth + 1);
    self(self, m.b, depth + 1);
  };
  if (n == 1)
    visit(visit, 0, 0);
  else
    visit(visit, 2 * n - 2, 0);
  return out.str();
}

}  // namespace clustkit
