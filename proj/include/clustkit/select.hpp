#pragma once

// Model selection: k sweeps for the prototype methods, the hierarchical
// linkage/metric/k grid, and the OPTICS min_samples/metric/threshold grid.
// Each report carries every scored row so its recommendation can be re-derived
// from the emitted scores with the named rule.

#include "clustkit/density.hpp"
#include "clustkit/hierarchy.hpp"
#include "clustkit/metrics.hpp"
#include "clustkit/prototype.hpp"

#include <ostream>
#include <set>

namespace clustkit {

struct SweepRow {
  nlohmann::ordered_json params;
  ScoreReport scores;
  bool eligible = true;
  LabelVector labels;  // not serialized
};

struct SweepReport {
  std::string method;
  std::vector<SweepRow> rows;
  std::size_t recommended = 0;
  std::string rule;  // which recommendation rule fired
  std::vector<std::string> flags;
  std::vector<std::string> skipped;  // grid cells not evaluated, with the reason

  const SweepRow& best() const { return rows.at(recommended); }
};

/// Raised when no grid cell survives the selection constraints. `table` holds
/// the full score table so callers can still report it.
class SelectionError : public DataError {
 public:
  SelectionError(const std::string& what, nlohmann::json table) : DataError(what), table(std::move(table)) {}
  nlohmann::json table;
};

struct Recommendation {
  std::size_t index = 0;
  std::string rule;
  std::vector<std::string> flags;
};

namespace detail {

inline double score_or(const SweepRow& row, const char* name, double fallback) {
  return row.scores.get(name).value_or(fallback);
}

inline void check_k_range(const std::vector<std::size_t>& k_range, std::size_t n, const char* what) {
  if (k_range.empty()) throw ConfigError(std::string(what) + ": empty k range");
  for (std::size_t i = 0; i < k_range.size(); ++i) {
    if (k_range[i] < 2 || k_range[i] + 1 > n)
      throw ConfigError(std::string(what) + ": k = " + std::to_string(k_range[i]) + " outside [2, " +
                        std::to_string(n - 1) + "]");
    if (i && k_range[i] <= k_range[i - 1]) throw ConfigError(std::string(what) + ": k range must increase");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Recommendation rules. Each reads only the emitted rows.

/// Knee of the distortion curve (rows ordered by k).
inline Recommendation recommend_knee(const std::vector<SweepRow>& rows) {
  std::vector<std::size_t> ks;
  std::vector<double> distortion;
  for (const auto& row : rows) {
    ks.push_back(row.params.at("k").get<std::size_t>());
    distortion.push_back(row.scores.values.at("distortion"));
  }
  const std::size_t knee = find_knee(ks, distortion);
  const auto it = std::find(ks.begin(), ks.end(), knee);
  return {static_cast<std::size_t>(it - ks.begin()), "distortion_knee", {}};
}

/// Best value of `primary` (max or min); rows within `tolerance` (relative to
/// the best's magnitude) go to a tiebreak on `secondary`. Rows lacking the
/// primary score are never chosen unless nothing has it.
inline Recommendation recommend_with_tiebreak(const std::vector<SweepRow>& rows, const char* primary,
                                              bool primary_max, const char* secondary, bool secondary_max,
                                              double tolerance, const std::string& rule) {
  const double worst = primary_max ? -kInf : kInf;
  const double worst2 = secondary_max ? -kInf : kInf;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].eligible || !rows[i].scores.get(primary)) continue;
    const double v = detail::score_or(rows[i], primary, worst);
    if (!best || (primary_max ? v > detail::score_or(rows[*best], primary, worst)
                              : v < detail::score_or(rows[*best], primary, worst)))
      best = i;
  }
  if (!best) return {0, rule, {"no_row_scored"}};
  const double top = detail::score_or(rows[*best], primary, worst);
  const double band = tolerance * std::abs(top);
  std::size_t chosen = *best;
  std::size_t contenders = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].eligible || !rows[i].scores.get(primary)) continue;
    const double v = detail::score_or(rows[i], primary, worst);
    if (std::abs(v - top) > band) continue;
    ++contenders;
    const double s = detail::score_or(rows[i], secondary, worst2);
    const double cs = detail::score_or(rows[chosen], secondary, worst2);
    if (secondary_max ? s > cs : s < cs) chosen = i;
  }
  Recommendation out{chosen, rule, {}};
  if (contenders > 1) out.flags.push_back("near_tie_resolved_by_" + std::string(secondary));
  return out;
}

/// Fuzzy c-means: silhouette argmax, near ties (1%) to the lowest Davies-Bouldin.
inline Recommendation recommend_fuzzy(const std::vector<SweepRow>& rows, double tolerance = 0.01) {
  return recommend_with_tiebreak(rows, "silhouette", true, "davies_bouldin", false, tolerance,
                                 "silhouette_argmax_db_tiebreak");
}

/// GMM: BIC argmin, candidates within 1% of the minimum go to the highest silhouette.
inline Recommendation recommend_gmm(const std::vector<SweepRow>& rows, double tolerance = 0.01) {
  return recommend_with_tiebreak(rows, "bic", false, "silhouette", true, tolerance, "bic_argmin_silhouette_tiebreak");
}

/// Hierarchical grid: the largest k whose silhouette exceeds `threshold`
/// (ties to the higher silhouette, then grid order); otherwise the silhouette
/// argmax with a fallback flag.
inline Recommendation recommend_hierarchical(const std::vector<SweepRow>& rows, double threshold) {
  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double s = detail::score_or(rows[i], "silhouette", -kInf);
    if (!(s > threshold)) continue;
    if (!chosen) {
      chosen = i;
      continue;
    }
    const auto k = rows[i].scores.k;
    const auto ck = rows[*chosen].scores.k;
    if (k > ck || (k == ck && s > detail::score_or(rows[*chosen], "silhouette", -kInf))) chosen = i;
  }
  if (chosen) return {*chosen, "largest_k_above_silhouette_threshold", {}};
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (detail::score_or(rows[i], "silhouette", -kInf) > detail::score_or(rows[best], "silhouette", -kInf)) best = i;
  return {best, "silhouette_argmax", {"fallback_no_config_above_threshold"}};
}

/// OPTICS grid: among eligible rows, highest silhouette, then highest CH,
/// then grid order. Returns nullopt when nothing is eligible.
inline std::optional<Recommendation> recommend_optics(const std::vector<SweepRow>& rows) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].eligible || !rows[i].scores.get("silhouette")) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double s = detail::score_or(rows[i], "silhouette", -kInf);
    const double bs = detail::score_or(rows[*best], "silhouette", -kInf);
    const double ch = detail::score_or(rows[i], "calinski_harabasz", -kInf);
    const double bch = detail::score_or(rows[*best], "calinski_harabasz", -kInf);
    if (s > bs || (s == bs && ch > bch)) best = i;
  }
  if (!best) return std::nullopt;
  return Recommendation{*best, "silhouette_then_calinski_harabasz", {}};
}

// ---------------------------------------------------------------------------
// k sweeps

enum class SweepMethod { kmeans, minibatch, fuzzy, gmm };

inline std::string to_string(SweepMethod method) {
  switch (method) {
    case SweepMethod::kmeans: return "kmeans";
    case SweepMethod::minibatch: return "minibatch";
    case SweepMethod::fuzzy: return "fuzzy";
    case SweepMethod::gmm: return "gmm";
  }
  return "?";
}

inline SweepMethod parse_sweep_method(std::string_view name) {
  if (name == "kmeans") return SweepMethod::kmeans;
  if (name == "minibatch") return SweepMethod::minibatch;
  if (name == "fuzzy") return SweepMethod::fuzzy;
  if (name == "gmm") return SweepMethod::gmm;
  throw ConfigError("unknown sweep method: " + std::string(name));
}

struct SweepOptions {
  std::uint64_t seed = 0;
  std::size_t restarts = 10;
  CovarianceType covariance = CovarianceType::full;
  double fuzzifier = 2.0;
  std::size_t batch_size = 0;  // mini-batch; 0 = default
  double tie_tolerance = 0.01;
};

/// Fits every k in `k_range` and scores it. k-means and mini-batch recommend
/// the distortion knee, fuzzy c-means uses recommend_fuzzy and GMM recommend_gmm.
inline SweepReport sweep_k(const FeatureTable& table, SweepMethod method, const std::vector<std::size_t>& k_range,
                           const SweepOptions& options = {}) {
  detail::check_k_range(k_range, table.rows(), "sweep_k");
  if ((method == SweepMethod::kmeans || method == SweepMethod::minibatch) && k_range.size() < 3)
    throw ConfigError("sweep_k: the distortion knee needs at least 3 values of k");
  const auto distances = pairwise_distances(table);

  SweepReport report;
  report.method = to_string(method);
  auto add = [&](std::size_t k, LabelVector labels) -> SweepRow& {
    SweepRow row;
    row.params["k"] = k;
    row.params["seed"] = options.seed;
    row.scores = score_labels(table, labels, Metric::euclidean(), &distances);
    row.labels = std::move(labels);
    report.rows.push_back(std::move(row));
    return report.rows.back();
  };

  switch (method) {
    case SweepMethod::kmeans:
      for (auto& model : distortion_models(table, k_range, options.seed, options.restarts)) {
        const double inertia = model.inertia;
        add(model.k, std::move(model.labels)).scores.values["distortion"] = inertia;
      }
      break;
    case SweepMethod::minibatch:
      for (std::size_t k : k_range) {
        MiniBatchConfig config;
        config.k = k;
        config.seed = options.seed;
        config.batch_size = options.batch_size;
        auto model = minibatch_kmeans_fit(table, config);
        add(k, std::move(model.labels)).scores.values["distortion"] = model.inertia;
      }
      break;
    case SweepMethod::fuzzy:
      for (std::size_t k : k_range) {
        FuzzyOptions fuzzy;
        fuzzy.c = k;
        fuzzy.fuzzifier = options.fuzzifier;
        fuzzy.seed = options.seed;
        const auto model = fuzzy_cmeans_fit(table, fuzzy);
        add(k, model.hardened()).params["fuzzifier"] = options.fuzzifier;
      }
      break;
    case SweepMethod::gmm:
      for (std::size_t k : k_range) {
        GmmOptions gmm;
        gmm.k = k;
        gmm.covariance_type = options.covariance;
        gmm.seed = options.seed;
        GmmModel model;
        try {
          model = gmm_fit(table, gmm);
        } catch (const NumericError& e) {
          report.skipped.push_back("k=" + std::to_string(k) + ": " + e.what());
          continue;
        }
        const auto ic = information_criteria(model, table);
        auto& row = add(k, std::move(model.labels));
        row.params["covariance_type"] = to_string(options.covariance);
        row.scores.values["bic"] = ic.bic;
        row.scores.values["aic"] = ic.aic;
        row.scores.values["log_likelihood"] = ic.log_likelihood;
        if (!model.converged) row.scores.flags.push_back("em_not_converged");
      }
      if (report.rows.empty()) throw NumericError("sweep_k: every GMM fit failed");
      break;
  }

  Recommendation rec;
  switch (method) {
    case SweepMethod::kmeans:
    case SweepMethod::minibatch: rec = recommend_knee(report.rows); break;
    case SweepMethod::fuzzy: rec = recommend_fuzzy(report.rows, options.tie_tolerance); break;
    case SweepMethod::gmm: rec = recommend_gmm(report.rows, options.tie_tolerance); break;
  }
  report.recommended = rec.index;
  report.rule = rec.rule;
  report.flags = rec.flags;
  return report;
}

// ---------------------------------------------------------------------------
// Hierarchical grid

/// Silhouette (under the clustering metric) for every (linkage, metric, k).
/// Ward with a non-euclidean metric is skipped and recorded in `skipped`.
inline SweepReport grid_hierarchical(const FeatureTable& table, const std::vector<Linkage>& linkages,
                                     const std::vector<Metric>& metrics, const std::vector<std::size_t>& k_range,
                                     double threshold = 0.5) {
  if (linkages.empty() || metrics.empty()) throw ConfigError("grid_hierarchical: empty grid");
  detail::check_k_range(k_range, table.rows(), "grid_hierarchical");
  SweepReport report;
  report.method = "hierarchical";
  for (const auto& metric : metrics) {
    const auto distances = pairwise_distances(table, metric);
    for (Linkage linkage : linkages) {
      if (linkage == Linkage::ward && metric.kind != Metric::Kind::euclidean) {
        report.skipped.push_back("ward/" + metric.name() + ": ward requires the euclidean metric");
        continue;
      }
      const auto dendrogram = agglomerate(distances, linkage);
      for (std::size_t k : k_range) {
        SweepRow row;
        row.params["linkage"] = to_string(linkage);
        row.params["metric"] = metric.name();
        row.params["k"] = k;
        row.labels = cut(dendrogram, k);
        row.scores = score_labels(table, row.labels, metric, &distances);
        report.rows.push_back(std::move(row));
      }
    }
  }
  if (report.rows.empty()) throw ConfigError("grid_hierarchical: every grid cell was skipped");
  const auto rec = recommend_hierarchical(report.rows, threshold);
  report.recommended = rec.index;
  report.rule = rec.rule;
  report.flags = rec.flags;
  return report;
}

// ---------------------------------------------------------------------------
// OPTICS grid

struct OpticsGrid {
  std::vector<std::size_t> min_samples;  // default 2..30, clipped to n
  std::vector<Metric> metrics{Metric::euclidean()};
  std::size_t min_clusters = 5;
  std::vector<double> thresholds;  // empty: deciles of each ordering's reachability
  std::string reduction = "none";  // descriptive, copied into the table
  std::size_t dims = 0;
};

/// Orders once per (min_samples, metric) with eps = infinity and extracts at
/// every threshold. Candidates with fewer than `min_clusters` clusters stay
/// in the table but are not eligible. Throws SelectionError if none is.
inline SweepReport grid_optics(const FeatureTable& table, OpticsGrid grid) {
  if (grid.metrics.empty()) throw ConfigError("grid_optics: no metrics");
  if (grid.min_samples.empty())
    for (std::size_t m = 2; m <= std::min<std::size_t>(30, table.rows()); ++m) grid.min_samples.push_back(m);
  for (std::size_t m : grid.min_samples)
    if (m < 2 || m > table.rows())
      throw ConfigError("grid_optics: min_samples " + std::to_string(m) + " outside [2, " +
                        std::to_string(table.rows()) + "]");
  for (double t : grid.thresholds)
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("grid_optics: thresholds must be positive and finite");
  if (grid.dims == 0) grid.dims = table.cols();

  SweepReport report;
  report.method = "optics";
  for (const auto& metric : grid.metrics) {
    const auto distances = pairwise_distances(table, metric);
    for (std::size_t m : grid.min_samples) {
      DensityParams params;
      params.min_pts = m;
      params.metric = metric;
      const auto ordering = optics_order(distances, params);
      const auto thresholds = grid.thresholds.empty() ? reachability_deciles(ordering) : grid.thresholds;
      if (thresholds.empty()) {
        report.skipped.push_back("min_samples=" + std::to_string(m) + "/" + metric.name() +
                                 ": no finite positive reachability");
        continue;
      }
      for (double t : thresholds) {
        SweepRow row;
        row.params["reduction"] = grid.reduction;
        row.params["dims"] = grid.dims;
        row.params["min_samples"] = m;
        row.params["metric"] = metric.name();
        row.params["threshold"] = t;
        row.labels = extract_clusters(ordering, t);
        row.scores = score_labels(table, row.labels, metric, &distances);
        row.eligible = row.scores.k >= grid.min_clusters && row.scores.get("silhouette").has_value();
        report.rows.push_back(std::move(row));
      }
    }
  }
  const auto rec = recommend_optics(report.rows);
  if (!rec) {
    nlohmann::json table_json = nlohmann::json::array();
    for (const auto& row : report.rows)
      table_json.push_back({{"params", row.params}, {"scores", to_json(row.scores)}, {"eligible", row.eligible}});
    throw SelectionError("grid_optics: no candidate has at least " + std::to_string(grid.min_clusters) +
                             " clusters",
                         std::move(table_json));
  }
  report.recommended = rec->index;
  report.rule = rec->rule;
  report.flags = rec->flags;
  return report;
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::ordered_json to_json(const SweepReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json r;
    r["params"] = row.params;
    r["scores"] = nlohmann::ordered_json::parse(to_json(row.scores).dump());
    r["eligible"] = row.eligible;
    rows.push_back(std::move(r));
  }
  nlohmann::ordered_json out;
  out["method"] = report.method;
  out["recommended"] = report.recommended;
  out["recommended_params"] = report.rows.at(report.recommended).params;
  out["rule"] = report.rule;
  out["flags"] = report.flags;
  out["skipped"] = report.skipped;
  out["rows"] = std::move(rows);
  return out;
}

/// One row per grid cell: parameter columns (first row's order), n_clusters,
/// noise, every score, eligible, recommended.
inline void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  std::vector<std::string> params;
  std::set<std::string> scores;
  for (const auto& row : report.rows) {
    for (const auto& item : row.params.items())
      if (std::find(params.begin(), params.end(), item.key()) == params.end()) params.push_back(item.key());
    for (const auto& [name, value] : row.scores.values) scores.insert(name);
  }
  std::vector<std::string> header = params;
  header.insert(header.end(), {"n_clusters", "noise"});
  header.insert(header.end(), scores.begin(), scores.end());
  header.insert(header.end(), {"eligible", "recommended"});
  csv::write_row(out, header);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    std::vector<std::string> cells;
    for (const auto& p : params) {
      if (!row.params.contains(p)) {
        cells.emplace_back();
        continue;
      }
      const auto& v = row.params.at(p);
      cells.push_back(v.is_string() ? v.get<std::string>() : v.is_number_float() ? format_double(v.get<double>()) : v.dump());
    }
    cells.push_back(std::to_string(row.scores.k));
    cells.push_back(std::to_string(row.scores.noise_count));
    for (const auto& s : scores) {
      const auto v = row.scores.get(s);
      cells.push_back(v ? format_double(*v) : "");
    }
    cells.push_back(row.eligible ? "true" : "false");
    cells.push_back(i == report.recommended ? "true" : "false");
    csv::write_row(out, cells);
  }
}

/// OPTICS grid in the Table-1 layout: reduction, dims, min_samples,
/// n_clusters, silhouette, CH, metric, then silhouette_metric, threshold,
/// noise, eligible, recommended.
inline void write_table1_csv(std::ostream& out, const SweepReport& report) {
  csv::write_row(out, {"reduction", "dims", "min_samples", "n_clusters", "silhouette", "CH", "metric",
                       "silhouette_metric", "threshold", "noise", "eligible", "recommended"});
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    const auto sil = row.scores.get("silhouette");
    const auto ch = row.scores.get("calinski_harabasz");
    csv::write_row(out, {row.params.value("reduction", std::string()), row.params.at("dims").dump(),
                         row.params.at("min_samples").dump(), std::to_string(row.scores.k),
                         sil ? format_double(*sil) : "", ch ? format_double(*ch) : "",
                         row.params.value("metric", std::string()), row.scores.silhouette_metric,
                         format_double(row.params.at("threshold").get<double>()),
                         std::to_string(row.scores.noise_count), row.eligible ? "true" : "false",
                         i == report.recommended ? "true" : "false"});
  }
}

}  // namespace clustkit
