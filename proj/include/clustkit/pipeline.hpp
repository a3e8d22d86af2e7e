#pragma once

// End-to-end runs driven by a JSON configuration: ingest, engineer,
// standardize, reduce, cluster or sweep, score, interpret, emit a bundle.

#include "clustkit/interpret.hpp"
#include "clustkit/select.hpp"
#include "clustkit/svg.hpp"
#include "clustkit/synthetic.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace clustkit {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

struct ReductionSpec {
  bool pca = false;
  PcaTarget target;
};

struct InterpretSpec {
  std::size_t trees = 200;
  std::size_t forest_max_depth = 1000;
  std::size_t tree_max_depth = 4;
  std::size_t min_leaf = 1;
  bool tree_raw_units = true;
};

struct RunConfig {
  nlohmann::ordered_json document;  // as given, after overrides; recorded in the manifest
  fs::path base_dir;                // relative input paths resolve against this
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string features;
  std::vector<std::string> schema;
  std::string cases;
  std::string deaths;
  std::string labels;
  SummaryAnchors case_anchors;
  SummaryAnchors death_anchors;
  bool standardize = true;
  ReductionSpec reduction;
  nlohmann::ordered_json method;  // exactly one of method / sweep / grid is an object
  nlohmann::ordered_json sweep;
  nlohmann::ordered_json grid;
  InterpretSpec interpret;

  fs::path resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

/// Command-line flags that override config fields.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<std::size_t> k;
};

namespace detail {

template <class T>
T get_or(const nlohmann::ordered_json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <class T>
T get_required(const nlohmann::ordered_json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + "." + key + " is required");
  return get_or<T>(j, key, T{}, where);
}

inline void check_keys(const nlohmann::ordered_json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) throw ConfigError("unknown key " + where + "." + item.key());
}

inline SummaryAnchors parse_anchors(const nlohmann::ordered_json& j, const std::string& where) {
  check_keys(j, {"growth", "new_counts", "cumulative"}, where);
  SummaryAnchors a;
  auto date = [&](const nlohmann::ordered_json& item, const char* key) {
    const auto text = get_required<std::string>(item, key, where);
    try {
      return parse_date(text);
    } catch (const DataError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  };
  for (const auto& w : j.value("growth", nlohmann::ordered_json::array()))
    a.growth.push_back({get_required<std::string>(w, "name", where), date(w, "start"), date(w, "end")});
  for (const auto& p : j.value("new_counts", nlohmann::ordered_json::array()))
    a.new_counts.push_back({get_required<std::string>(p, "name", where), date(p, "date")});
  for (const auto& p : j.value("cumulative", nlohmann::ordered_json::array()))
    a.cumulative.push_back({get_required<std::string>(p, "name", where), date(p, "date")});
  return a;
}

}  // namespace detail

inline nlohmann::ordered_json load_config_document(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

/// Applies flag overrides to the document. `--method` and `--k` target the
/// sweep block when one is present and no single method is configured.
inline void apply_overrides(nlohmann::ordered_json& doc, const Overrides& o) {
  if (o.seed) doc["seed"] = *o.seed;
  if (o.out) doc["output_dir"] = *o.out;
  const bool sweeping = !doc.contains("method") && doc.contains("sweep");
  if (o.method) {
    if (sweeping) {
      doc["sweep"]["method"] = *o.method;
    } else if (!doc.contains("method") || doc["method"].value("name", "") != *o.method) {
      // Hyperparameters of a different method do not carry over; k does.
      nlohmann::ordered_json method{{"name", *o.method}};
      const std::set<std::string> takes_k{"kmeans", "minibatch", "fuzzy", "gmm", "hierarchical"};
      if (takes_k.count(*o.method) && doc.contains("method") && doc["method"].contains("k"))
        method["k"] = doc["method"]["k"];
      doc.erase("grid");
      doc["method"] = std::move(method);
    }
  }
  if (o.k) {
    if (sweeping) throw ConfigError("--k does not apply to a sweep (set sweep.k_min / sweep.k_max)");
    doc["method"]["k"] = *o.k;
  }
}

inline RunConfig parse_run_config(const nlohmann::ordered_json& doc, const fs::path& base_dir = ".") {
  detail::check_keys(doc,
                     {"seed", "output_dir", "features", "schema", "cases", "deaths", "anchors", "labels",
                      "standardize", "reduction", "method", "sweep", "grid", "interpret", "description"},
                     "config");
  RunConfig c;
  c.document = doc;
  c.base_dir = base_dir;
  if (!doc.contains("seed")) throw ConfigError("config.seed is required");
  if (!doc.at("seed").is_number_integer() || doc.at("seed").get<long long>() < 0)
    throw ConfigError("config.seed must be a nonnegative integer");
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.output_dir = detail::get_or<std::string>(doc, "output_dir", "", "config");
  c.features = detail::get_required<std::string>(doc, "features", "config");
  c.schema = detail::get_or<std::vector<std::string>>(doc, "schema", {}, "config");
  c.cases = detail::get_or<std::string>(doc, "cases", "", "config");
  c.deaths = detail::get_or<std::string>(doc, "deaths", "", "config");
  c.labels = detail::get_or<std::string>(doc, "labels", "", "config");
  c.standardize = detail::get_or<bool>(doc, "standardize", true, "config");

  const bool series = !c.cases.empty() || !c.deaths.empty();
  if (series != doc.contains("anchors"))
    throw ConfigError(series ? "config.anchors is required when time series inputs are given"
                             : "config.anchors given without cases/deaths inputs");
  if (series) {
    const auto& a = doc.at("anchors");
    if (a.is_string()) {
      if (a.get<std::string>() != "default") throw ConfigError("config.anchors must be \"default\" or an object");
      c.case_anchors = default_case_anchors();
      c.death_anchors = default_death_anchors();
    } else {
      detail::check_keys(a, {"cases", "deaths"}, "anchors");
      if (a.contains("cases")) c.case_anchors = detail::parse_anchors(a.at("cases"), "anchors.cases");
      if (a.contains("deaths")) c.death_anchors = detail::parse_anchors(a.at("deaths"), "anchors.deaths");
    }
  }

  if (doc.contains("reduction")) {
    const auto& r = doc.at("reduction");
    detail::check_keys(r, {"kind", "components", "variance"}, "reduction");
    const auto kind = detail::get_required<std::string>(r, "kind", "reduction");
    if (kind == "pca") {
      c.reduction.pca = true;
      if (r.contains("components") == r.contains("variance"))
        throw ConfigError("reduction: give exactly one of components / variance");
      if (r.contains("components")) {
        const auto n = detail::get_required<std::size_t>(r, "components", "reduction");
        if (n < 1) throw ConfigError("reduction.components must be >= 1");
        c.reduction.target = PcaTarget::count(n);
      } else {
        const auto v = detail::get_required<double>(r, "variance", "reduction");
        if (!(v > 0.0 && v <= 1.0)) throw ConfigError("reduction.variance must lie in (0, 1]");
        c.reduction.target = PcaTarget::variance(v);
      }
    } else if (kind != "none") {
      throw ConfigError("reduction.kind must be none or pca");
    }
  }

  int blocks = 0;
  for (const char* key : {"method", "sweep", "grid"})
    if (doc.contains(key)) {
      if (!doc.at(key).is_object()) throw ConfigError(std::string("config.") + key + " must be an object");
      ++blocks;
    }
  if (blocks > 1) throw ConfigError("config: give only one of method / sweep / grid");
  if (doc.contains("method")) c.method = doc.at("method");
  if (doc.contains("sweep")) c.sweep = doc.at("sweep");
  if (doc.contains("grid")) c.grid = doc.at("grid");

  if (doc.contains("interpret")) {
    const auto& i = doc.at("interpret");
    detail::check_keys(i, {"trees", "forest_max_depth", "tree_max_depth", "min_leaf", "tree_units"}, "interpret");
    c.interpret.trees = detail::get_or<std::size_t>(i, "trees", 200, "interpret");
    c.interpret.forest_max_depth = detail::get_or<std::size_t>(i, "forest_max_depth", 1000, "interpret");
    c.interpret.tree_max_depth = detail::get_or<std::size_t>(i, "tree_max_depth", 4, "interpret");
    c.interpret.min_leaf = detail::get_or<std::size_t>(i, "min_leaf", 1, "interpret");
    const auto units = detail::get_or<std::string>(i, "tree_units", "raw", "interpret");
    if (units != "raw" && units != "processed") throw ConfigError("interpret.tree_units must be raw or processed");
    c.interpret.tree_raw_units = units == "raw";
  }
  return c;
}

// ---------------------------------------------------------------------------
// Stages

namespace detail {

/// Runs one stage, prefixing any toolkit error with the stage name.
template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  const std::string prefix = std::string("stage ") + name + ": ";
  try {
    return body();
  } catch (const SelectionError& e) {
    throw SelectionError(prefix + e.what(), e.table);
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const fs::filesystem_error& e) {
    throw DataError(prefix + e.what());
  }
}

inline void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " file not found: " + path.string());
}

}  // namespace detail

struct IngestResult {
  FeatureTable table;  // engineered features, raw units
  std::size_t clamped_new_counts = 0;
  std::size_t non_monotone_rows = 0;
  std::vector<fs::path> inputs;
};

inline IngestResult ingest(const RunConfig& config) {
  const auto features_path = config.resolve(config.features);
  detail::require_file(features_path, "features");
  IngestResult out{load_table(features_path.string(), config.schema), 0, 0, {features_path}};
  auto add_series = [&](const std::string& path, const SummaryAnchors& anchors, const char* what) {
    if (path.empty()) return;
    const auto resolved = config.resolve(path);
    detail::require_file(resolved, what);
    out.inputs.push_back(resolved);
    const auto summary = summarize_timeseries(load_timeseries(resolved.string()), anchors);
    out.clamped_new_counts += summary.clamped_new_counts;
    out.non_monotone_rows += summary.non_monotone_rows;
    out.table = out.table.join(summary.table);
  };
  add_series(config.cases, config.case_anchors, "cases");
  add_series(config.deaths, config.death_anchors, "deaths");
  return out;
}

struct Prepared {
  FeatureTable features;   // standardized (or raw when standardization is off)
  FeatureTable processed;  // what the clustering sees
  std::optional<StandardizationParams> standardization;
  std::optional<PcaModel> pca;
};

inline Prepared prepare(const FeatureTable& raw, const RunConfig& config) {
  Prepared out{raw, raw, std::nullopt, std::nullopt};
  if (config.standardize) {
    auto s = standardize(raw);
    out.features = s.table;
    out.standardization = std::move(s.params);
  }
  out.processed = out.features;
  if (config.reduction.pca) {
    auto p = pca_fit_transform(out.features, config.reduction.target);
    out.processed = std::move(p.table);
    out.pca = std::move(p.model);
  }
  return out;
}

/// Everything the clustering stage produced.
struct ClusterOutcome {
  std::string method;
  LabelVector labels;
  ScoreReport scores;
  std::optional<SweepReport> sweep;
  std::optional<OpticsResult> optics;
  nlohmann::ordered_json model;  // serialized model, if the method has one
  std::optional<Matrix> memberships;
};

namespace detail {

inline std::vector<std::size_t> k_span(const nlohmann::ordered_json& j, const char* lo, const char* hi,
                                       std::size_t lo_default, std::size_t hi_default, const std::string& where) {
  const auto a = get_or<std::size_t>(j, lo, lo_default, where);
  const auto b = get_or<std::size_t>(j, hi, hi_default, where);
  if (a > b) throw ConfigError(where + ": " + lo + " > " + hi);
  std::vector<std::size_t> out;
  for (std::size_t k = a; k <= b; ++k) out.push_back(k);
  return out;
}

inline std::vector<Metric> metric_list(const nlohmann::ordered_json& j, const std::string& where) {
  std::vector<Metric> out;
  for (const auto& name : get_or<std::vector<std::string>>(j, "metrics", {"euclidean"}, where))
    out.push_back(Metric::parse(name));
  if (out.empty()) throw ConfigError(where + ".metrics is empty");
  return out;
}

inline ClusterOutcome run_method(const FeatureTable& x, const nlohmann::ordered_json& m, std::uint64_t seed) {
  const std::string where = "method";
  const auto name = get_required<std::string>(m, "name", where);
  ClusterOutcome out;
  out.method = name;
  Metric score_metric = Metric::euclidean();
  std::optional<DistanceMatrix> distances;

  if (name == "kmeans") {
    check_keys(m, {"name", "k", "restarts", "uniform_init"}, where);
    KMeansOptions o;
    o.k = get_required<std::size_t>(m, "k", where);
    o.seed = seed;
    o.restarts = get_or<std::size_t>(m, "restarts", 10, where);
    o.uniform_init = get_or<bool>(m, "uniform_init", false, where);
    auto model = kmeans_fit(x, o);
    out.labels = model.labels;
    out.model = nlohmann::ordered_json::parse(to_json(model).dump());
    out.scores.values["distortion"] = model.inertia;
  } else if (name == "minibatch") {
    check_keys(m, {"name", "k", "batch_size", "max_iterations"}, where);
    MiniBatchConfig o;
    o.k = get_required<std::size_t>(m, "k", where);
    o.batch_size = get_or<std::size_t>(m, "batch_size", 0, where);
    o.max_iterations = get_or<std::size_t>(m, "max_iterations", 100, where);
    o.seed = seed;
    auto model = minibatch_kmeans_fit(x, o);
    out.labels = model.labels;
    out.model = nlohmann::ordered_json::parse(to_json(model).dump());
    out.scores.values["distortion"] = model.inertia;
  } else if (name == "fuzzy") {
    check_keys(m, {"name", "k", "fuzzifier"}, where);
    FuzzyOptions o;
    o.c = get_required<std::size_t>(m, "k", where);
    o.fuzzifier = get_or<double>(m, "fuzzifier", 2.0, where);
    o.seed = seed;
    auto model = fuzzy_cmeans_fit(x, o);
    out.labels = model.hardened();
    out.memberships = model.membership;
    out.model = {{"c", model.c}, {"fuzzifier", model.fuzzifier}, {"seed", model.seed},
                 {"iterations", model.iterations}, {"centroids", matrix_to_json(model.centroids)}};
  } else if (name == "gmm") {
    check_keys(m, {"name", "k", "covariance_type", "max_iterations", "reg_floor"}, where);
    GmmOptions o;
    o.k = get_required<std::size_t>(m, "k", where);
    o.covariance_type = parse_covariance_type(get_or<std::string>(m, "covariance_type", "full", where));
    o.max_iterations = get_or<std::size_t>(m, "max_iterations", 500, where);
    o.reg_floor = get_or<double>(m, "reg_floor", 1e-6, where);
    o.seed = seed;
    auto model = gmm_fit(x, o);
    out.labels = model.labels;
    out.model = nlohmann::ordered_json::parse(to_json(model).dump());
    const auto ic = information_criteria(model, x);
    out.scores.values["bic"] = ic.bic;
    out.scores.values["aic"] = ic.aic;
    out.scores.values["log_likelihood"] = ic.log_likelihood;
  } else if (name == "hierarchical") {
    check_keys(m, {"name", "k", "linkage", "metric"}, where);
    score_metric = Metric::parse(get_or<std::string>(m, "metric", "euclidean", where));
    distances = pairwise_distances(x, score_metric);
    const auto dendrogram = agglomerate(*distances, parse_linkage(get_or<std::string>(m, "linkage", "average", where)));
    out.labels = cut(dendrogram, get_required<std::size_t>(m, "k", where));
    out.model = nlohmann::ordered_json::parse(to_json(dendrogram).dump());
  } else if (name == "dbscan") {
    check_keys(m, {"name", "eps", "min_samples", "metric"}, where);
    DensityParams p;
    p.eps = get_required<double>(m, "eps", where);
    p.min_pts = get_or<std::size_t>(m, "min_samples", 5, where);
    p.metric = score_metric = Metric::parse(get_or<std::string>(m, "metric", "euclidean", where));
    distances = pairwise_distances(x, p.metric);
    out.labels = dbscan(*distances, p).labels;
  } else if (name == "optics") {
    check_keys(m, {"name", "min_samples", "metric", "threshold"}, where);
    DensityParams p;
    p.min_pts = get_or<std::size_t>(m, "min_samples", 5, where);
    p.metric = score_metric = Metric::parse(get_or<std::string>(m, "metric", "euclidean", where));
    distances = pairwise_distances(x, p.metric);
    out.optics = optics_order(*distances, p);
    out.labels = extract_clusters(*out.optics, get_required<double>(m, "threshold", where));
  } else {
    throw ConfigError("unknown method: " + name);
  }

  out.labels = compact_labels(out.labels);
  auto extra = std::move(out.scores.values);
  out.scores = score_labels(x, out.labels, score_metric, distances ? &*distances : nullptr);
  out.scores.values.merge(extra);
  return out;
}

inline ClusterOutcome run_sweep(const FeatureTable& x, const nlohmann::ordered_json& s, std::uint64_t seed) {
  check_keys(s, {"method", "k_min", "k_max", "restarts", "covariance_type", "fuzzifier", "batch_size", "tie_tolerance"},
             "sweep");
  SweepOptions o;
  o.seed = seed;
  o.restarts = get_or<std::size_t>(s, "restarts", 10, "sweep");
  o.covariance = parse_covariance_type(get_or<std::string>(s, "covariance_type", "full", "sweep"));
  o.fuzzifier = get_or<double>(s, "fuzzifier", 2.0, "sweep");
  o.batch_size = get_or<std::size_t>(s, "batch_size", 0, "sweep");
  o.tie_tolerance = get_or<double>(s, "tie_tolerance", 0.01, "sweep");
  const auto method = parse_sweep_method(get_required<std::string>(s, "method", "sweep"));
  auto report = sweep_k(x, method, k_span(s, "k_min", "k_max", 2, 12, "sweep"), o);
  ClusterOutcome out;
  out.method = "sweep:" + report.method;
  out.labels = report.best().labels;
  out.scores = report.best().scores;
  out.sweep = std::move(report);
  return out;
}

inline ClusterOutcome run_grid(const FeatureTable& x, const nlohmann::ordered_json& g, const RunConfig& config) {
  const auto kind = get_required<std::string>(g, "kind", "grid");
  ClusterOutcome out;
  if (kind == "hierarchical") {
    check_keys(g, {"kind", "linkages", "metrics", "k_min", "k_max", "threshold"}, "grid");
    std::vector<Linkage> linkages;
    for (const auto& l : get_or<std::vector<std::string>>(g, "linkages", {"single", "complete", "average", "ward"}, "grid"))
      linkages.push_back(parse_linkage(l));
    auto report = grid_hierarchical(x, linkages, metric_list(g, "grid"), k_span(g, "k_min", "k_max", 2, 30, "grid"),
                                    get_or<double>(g, "threshold", 0.5, "grid"));
    out.method = "grid:hierarchical";
    out.labels = report.best().labels;
    out.scores = report.best().scores;
    out.sweep = std::move(report);
  } else if (kind == "optics") {
    check_keys(g, {"kind", "min_samples_min", "min_samples_max", "metrics", "min_clusters", "thresholds"}, "grid");
    OpticsGrid grid;
    grid.min_samples = k_span(g, "min_samples_min", "min_samples_max", 2, std::min<std::size_t>(30, x.rows()), "grid");
    grid.metrics = metric_list(g, "grid");
    grid.min_clusters = get_or<std::size_t>(g, "min_clusters", 5, "grid");
    grid.thresholds = get_or<std::vector<double>>(g, "thresholds", {}, "grid");
    grid.reduction = config.reduction.pca ? "pca" : config.standardize ? "standardized" : "none";
    grid.dims = x.cols();
    auto report = grid_optics(x, grid);
    const auto& best = report.best();
    DensityParams p;
    p.min_pts = best.params.at("min_samples").get<std::size_t>();
    p.metric = Metric::parse(best.params.at("metric").get<std::string>());
    out.optics = optics_order(x, p);
    out.method = "grid:optics";
    out.labels = best.labels;
    out.scores = best.scores;
    out.sweep = std::move(report);
  } else {
    throw ConfigError("grid.kind must be hierarchical or optics");
  }
  return out;
}

}  // namespace detail

inline ClusterOutcome cluster_stage(const FeatureTable& processed, const RunConfig& config) {
  if (config.method.is_object()) return detail::run_method(processed, config.method, config.seed);
  if (config.sweep.is_object()) return detail::run_sweep(processed, config.sweep, config.seed);
  if (config.grid.is_object()) return detail::run_grid(processed, config.grid, config);
  throw ConfigError("config needs one of method / sweep / grid");
}

struct Interpretation {
  std::optional<ClusterProfile> profile;
  std::optional<ImportanceVector> importance;
  std::optional<DecisionTree> tree;
  std::vector<JenksScreenEntry> jenks;
  std::vector<std::string> notes;
};

inline Interpretation interpret_stage(const FeatureTable& raw, const FeatureTable& features, const LabelVector& labels,
                                      const RunConfig& config) {
  Interpretation out;
  const std::size_t k = count_clusters(labels);
  if (k < 1) {
    out.notes.push_back("no clusters found; interpretation skipped");
    return out;
  }
  out.profile = cluster_profile(features, labels);
  if (k < 2) {
    out.notes.push_back("a single cluster; importance, tree and Jenks screen skipped");
    return out;
  }
  std::vector<std::size_t> kept;
  LabelVector kept_labels;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) {
      kept.push_back(i);
      kept_labels.push_back(labels[i]);
    }
  if (kept.size() < labels.size())
    out.notes.push_back(std::to_string(labels.size() - kept.size()) + " noise rows excluded from interpretation");
  ForestOptions forest;
  forest.n_trees = config.interpret.trees;
  forest.seed = config.seed;
  forest.max_depth = config.interpret.forest_max_depth;
  forest.min_leaf = config.interpret.min_leaf;
  out.importance = forest_importance(features.select_rows(kept), kept_labels, forest);
  TreeOptions tree;
  tree.max_depth = config.interpret.tree_max_depth;
  tree.min_leaf = config.interpret.min_leaf;
  const auto& tree_table = config.interpret.tree_raw_units ? raw : features;
  out.tree = fit_tree(tree_table.select_rows(kept), kept_labels, tree);
  out.tree->units = config.interpret.tree_raw_units ? "raw feature units"
                    : config.standardize            ? "standardized feature units"
                                                    : "raw feature units";
  out.jenks = jenks_screen(raw, labels);
  return out;
}

// ---------------------------------------------------------------------------
// Bundle output

/// Writes files into a staging directory next to the target and moves it into
/// place on commit. An existing target is replaced only if it is empty or a
/// previous bundle (it has a manifest.json).
class BundleWriter {
 public:
  explicit BundleWriter(fs::path target) : target_(std::move(target)) {
    if (target_.empty()) throw ConfigError("output directory not set (config.output_dir or --out)");
    if (fs::exists(target_)) {
      if (!fs::is_directory(target_)) throw ConfigError("output path exists and is not a directory: " + target_.string());
      if (!fs::is_empty(target_) && !fs::exists(target_ / "manifest.json"))
        throw ConfigError("output directory exists and is not a clustkit bundle: " + target_.string());
    }
    staging_ = target_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }

  BundleWriter(const BundleWriter&) = delete;
  BundleWriter& operator=(const BundleWriter&) = delete;

  ~BundleWriter() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(staging_ / name, std::ios::binary);
    out << content;
    if (!out) throw DataError("cannot write " + (staging_ / name).string());
    files_.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a64", hex64(fnv1a(content))}});
  }

  void write_with(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ostringstream out;
    body(out);
    write(name, out.str());
  }

  /// Writes manifest.json (which lists every file written so far) and moves
  /// the bundle into place.
  void commit(nlohmann::ordered_json manifest) {
    manifest["files"] = files_;
    write("manifest.json", manifest.dump(2) + "\n");
    if (fs::exists(target_)) fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

  const fs::path& target() const { return target_; }

 private:
  fs::path target_;
  fs::path staging_;
  nlohmann::ordered_json files_ = nlohmann::ordered_json::array();
  bool committed_ = false;
};

namespace detail {

inline nlohmann::ordered_json input_fingerprints(const std::vector<fs::path>& inputs, const RunConfig& config) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& path : inputs) {
    const auto bytes = csv::read_file(path.string());
    out.push_back({{"path", fs::relative(path, config.base_dir).generic_string()},
                   {"bytes", bytes.size()},
                   {"fnv1a64", hex64(fnv1a(bytes))}});
  }
  return out;
}

inline nlohmann::ordered_json manifest_head(const RunConfig& config, const std::string& command,
                                           const std::vector<fs::path>& inputs) {
  nlohmann::ordered_json m;
  m["toolkit"] = "clustkit";
  m["version"] = std::string(kVersion);
  m["command"] = command;
  m["config"] = config.document;
  m["inputs"] = input_fingerprints(inputs, config);
  return m;
}

inline void write_labels_csv(std::ostream& out, const std::vector<std::string>& ids, const LabelVector& labels) {
  out << "row_id,cluster\n";
  for (std::size_t i = 0; i < labels.size(); ++i) csv::write_row(out, {ids[i], std::to_string(labels[i])});
}

inline void write_jenks_csv(std::ostream& out, const std::vector<JenksScreenEntry>& entries) {
  out << "feature,v_measure,classes\n";
  for (const auto& e : entries) csv::write_row(out, {e.feature, format_double(e.v_measure), std::to_string(e.classes)});
}

inline std::string fmt(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.4f", v);
  return buffer;
}

inline void emit_interpretation(BundleWriter& bundle, const Interpretation& interp) {
  if (interp.profile) bundle.write_with("profile.csv", [&](std::ostream& o) { write_profile_csv(o, *interp.profile); });
  if (interp.importance)
    bundle.write_with("importance.csv", [&](std::ostream& o) { write_importance_csv(o, *interp.importance); });
  if (interp.tree) {
    bundle.write("tree.txt", render_text(*interp.tree));
    bundle.write("tree.dot", render_dot(*interp.tree));
  }
  if (!interp.jenks.empty()) bundle.write_with("jenks.csv", [&](std::ostream& o) { write_jenks_csv(o, interp.jenks); });
}

inline void summarize_interpretation(std::ostream& md, const Interpretation& interp) {
  if (interp.profile) {
    md << "\n## Features that differ most between clusters\n\n| feature | spread of cluster means |\n|---|---|\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, interp.profile->ranking.size()); ++i) {
      const auto f = interp.profile->ranking[i];
      md << "| " << interp.profile->feature_names[f] << " | " << fmt(interp.profile->spread[f]) << " |\n";
    }
  }
  if (interp.importance) {
    std::vector<std::size_t> order(interp.importance->values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return interp.importance->values[a] > interp.importance->values[b];
    });
    md << "\n## Random-forest importance\n\n| feature | importance |\n|---|---|\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i)
      md << "| " << interp.importance->feature_names[order[i]] << " | " << fmt(interp.importance->values[order[i]])
         << " |\n";
  }
  if (!interp.jenks.empty()) {
    md << "\n## Jenks screen (v-measure against the clustering)\n\n| feature | v-measure |\n|---|---|\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, interp.jenks.size()); ++i)
      md << "| " << interp.jenks[i].feature << " | " << fmt(interp.jenks[i].v_measure) << " |\n";
  }
  if (interp.tree)
    md << "\n## Decision tree\n\nDepth " << interp.tree->depth() << ", " << interp.tree->nodes.size()
       << " nodes, thresholds in " << interp.tree->units << ". See tree.txt and tree.dot.\n";
  for (const auto& note : interp.notes) md << "\n- " << note << '\n';
}

inline std::string sweep_svg(const SweepReport& report) {
  if (report.method == "optics") return {};
  std::map<std::string, svg::Series> series;
  std::vector<std::string> order;
  const char* score = "silhouette";
  if (report.rule == "distortion_knee") score = "distortion";
  if (report.rule.rfind("bic", 0) == 0) score = "bic";
  for (const auto& row : report.rows) {
    std::string key = report.method == "hierarchical"
                          ? row.params.at("linkage").get<std::string>() + "/" + row.params.at("metric").get<std::string>()
                          : std::string(score);
    if (!series.count(key)) order.push_back(key);
    auto& s = series[key];
    s.name = key;
    s.x.push_back(static_cast<double>(row.params.at("k").get<std::size_t>()));
    s.y.push_back(row.scores.get(score).value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  std::vector<svg::Series> list;
  for (const auto& key : order) list.push_back(series[key]);
  return svg::line_chart(report.method + ": " + score + " by k", "k", score, list);
}

}  // namespace detail

struct RunResult {
  fs::path bundle;
  ClusterOutcome outcome;
  std::size_t rows = 0;
};

/// Full pipeline. Identical config, seed and inputs give byte-identical bundles.
inline RunResult run(const RunConfig& config, const std::string& command = "report") {
  auto bundle_ptr = detail::stage("emit", [&] { return std::make_unique<BundleWriter>(fs::path(config.output_dir)); });
  auto& bundle = *bundle_ptr;
  const auto ingested = detail::stage("ingest", [&] { return ingest(config); });
  const auto prepared = detail::stage("reduce", [&] { return prepare(ingested.table, config); });
  auto outcome = detail::stage("cluster", [&] { return cluster_stage(prepared.processed, config); });
  const auto interp = detail::stage("interpret", [&] {
    return interpret_stage(ingested.table, prepared.features, outcome.labels, config);
  });

  return detail::stage("emit", [&] {
    const auto& ids = prepared.processed.row_ids();
    bundle.write_with("labels.csv", [&](std::ostream& o) { detail::write_labels_csv(o, ids, outcome.labels); });
    bundle.write("scores.json", to_json(outcome.scores).dump(2) + "\n");
    bundle.write_with("features.csv", [&](std::ostream& o) { write_table(o, ingested.table); });
    bundle.write_with("features_processed.csv", [&](std::ostream& o) { write_table(o, prepared.processed); });
    if (prepared.standardization)
      bundle.write("standardization.json", to_json(*prepared.standardization).dump(2) + "\n");
    if (prepared.pca) bundle.write("pca.json", to_json(*prepared.pca).dump(2) + "\n");
    if (!outcome.model.is_null()) bundle.write("model.json", outcome.model.dump(2) + "\n");
    if (outcome.memberships)
      bundle.write_with("memberships.csv", [&](std::ostream& o) {
        std::vector<std::string> header{"row_id"};
        for (Eigen::Index c = 0; c < outcome.memberships->cols(); ++c) header.push_back("cluster_" + std::to_string(c));
        csv::write_row(o, header);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          std::vector<std::string> cells{ids[i]};
          for (Eigen::Index c = 0; c < outcome.memberships->cols(); ++c)
            cells.push_back(format_double((*outcome.memberships)(static_cast<Eigen::Index>(i), c)));
          csv::write_row(o, cells);
        }
      });
    if (outcome.optics) {
      bundle.write_with("reachability.csv", [&](std::ostream& o) { write_reachability_csv(o, *outcome.optics, ids); });
      std::vector<double> plot;
      for (std::size_t p : outcome.optics->ordering) plot.push_back(outcome.optics->reachability[p]);
      bundle.write("reachability.svg", svg::bar_chart("Reachability plot (min_samples " +
                                                          std::to_string(outcome.optics->min_pts) + ")",
                                                      "ordering", "reachability distance", plot));
    }
    if (outcome.sweep) {
      bundle.write("sweep.json", to_json(*outcome.sweep).dump(2) + "\n");
      bundle.write_with("sweep.csv", [&](std::ostream& o) {
        if (outcome.sweep->method == "optics")
          write_table1_csv(o, *outcome.sweep);
        else
          write_sweep_csv(o, *outcome.sweep);
      });
      const auto chart = detail::sweep_svg(*outcome.sweep);
      if (!chart.empty()) bundle.write("sweep.svg", chart);
    }
    detail::emit_interpretation(bundle, interp);

    std::ostringstream md;
    md << "# Clustering run\n\n";
    md << "- method: " << outcome.method << '\n';
    md << "- rows: " << ids.size() << ", features: " << ingested.table.cols() << ", clustered dims: "
       << prepared.processed.cols() << '\n';
    if (prepared.pca)
      md << "- PCA retained " << prepared.pca->retained() << " components\n";
    md << "- clusters: " << outcome.scores.k << ", noise rows: " << outcome.scores.noise_count << '\n';
    if (ingested.clamped_new_counts)
      md << "- negative daily differences clamped to 0: " << ingested.clamped_new_counts << '\n';
    if (ingested.non_monotone_rows) md << "- non-monotone cumulative rows: " << ingested.non_monotone_rows << '\n';
    md << "\n## Scores\n\n| index | value |\n|---|---|\n";
    for (const auto& [name, value] : outcome.scores.values) md << "| " << name << " | " << detail::fmt(value) << " |\n";
    for (const auto& flag : outcome.scores.flags) md << "\n- flag: " << flag << '\n';
    if (outcome.sweep) {
      const auto& s = *outcome.sweep;
      md << "\n## Selection\n\n" << s.rows.size() << " configurations scored; recommended " << s.best().params.dump()
         << " by rule `" << s.rule << "`.\n";
      for (const auto& flag : s.flags) md << "\n- flag: " << flag << '\n';
      for (const auto& skip : s.skipped) md << "\n- skipped: " << skip << '\n';
    }
    detail::summarize_interpretation(md, interp);
    bundle.write("summary.md", md.str());

    auto manifest = detail::manifest_head(config, command, ingested.inputs);
    manifest["rows"] = ids.size();
    manifest["clusters"] = outcome.scores.k;
    manifest["noise"] = outcome.scores.noise_count;
    bundle.commit(std::move(manifest));
    return RunResult{bundle.target(), std::move(outcome), ids.size()};
  });
}

/// Ingest, engineer, standardize and reduce only.
inline fs::path run_ingest(const RunConfig& config) {
  auto bundle_ptr = detail::stage("emit", [&] { return std::make_unique<BundleWriter>(fs::path(config.output_dir)); });
  auto& bundle = *bundle_ptr;
  const auto ingested = detail::stage("ingest", [&] { return ingest(config); });
  const auto prepared = detail::stage("reduce", [&] { return prepare(ingested.table, config); });
  return detail::stage("emit", [&] {
    bundle.write_with("features.csv", [&](std::ostream& o) { write_table(o, ingested.table); });
    bundle.write_with("features_processed.csv", [&](std::ostream& o) { write_table(o, prepared.processed); });
    if (prepared.standardization)
      bundle.write("standardization.json", to_json(*prepared.standardization).dump(2) + "\n");
    if (prepared.pca) bundle.write("pca.json", to_json(*prepared.pca).dump(2) + "\n");
    auto manifest = detail::manifest_head(config, "ingest", ingested.inputs);
    manifest["rows"] = ingested.table.rows();
    bundle.commit(std::move(manifest));
    return bundle.target();
  });
}

/// Reads a row_id,cluster table and aligns it to `row_ids`.
inline LabelVector read_labels(const fs::path& path, const std::vector<std::string>& row_ids) {
  const auto rows = csv::parse(csv::read_file(path.string()));
  if (rows.size() < 2) throw DataError(path.string() + ": no label rows");
  std::unordered_map<std::string, int> by_id;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw DataError(path.string() + ": row " + std::to_string(i + 1) + " needs 2 fields");
    const double v = csv::parse_finite(rows[i][1], path.string() + " row " + rows[i][0]);
    if (v != std::floor(v) || v < kNoise) throw DataError(path.string() + ": bad cluster id for row " + rows[i][0]);
    by_id[rows[i][0]] = static_cast<int>(v);
  }
  LabelVector labels;
  for (const auto& id : row_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError(path.string() + ": no label for row " + id);
    labels.push_back(it->second);
  }
  return labels;
}

/// Interpretation of an existing labeling (config.labels) against the configured features.
inline fs::path run_interpret(const RunConfig& config) {
  if (config.labels.empty()) throw ConfigError("config.labels is required for interpret");
  auto bundle_ptr = detail::stage("emit", [&] { return std::make_unique<BundleWriter>(fs::path(config.output_dir)); });
  auto& bundle = *bundle_ptr;
  const auto ingested = detail::stage("ingest", [&] { return ingest(config); });
  const auto prepared = detail::stage("reduce", [&] { return prepare(ingested.table, config); });
  const auto labels_path = config.resolve(config.labels);
  const auto labels = detail::stage("ingest", [&] {
    detail::require_file(labels_path, "labels");
    return read_labels(labels_path, ingested.table.row_ids());
  });
  const auto interp = detail::stage("interpret", [&] {
    return interpret_stage(ingested.table, prepared.features, labels, config);
  });
  return detail::stage("emit", [&] {
    detail::emit_interpretation(bundle, interp);
    std::ostringstream md;
    md << "# Cluster interpretation\n\n- rows: " << labels.size() << ", clusters: " << count_clusters(labels)
       << ", noise rows: " << count_noise(labels) << '\n';
    detail::summarize_interpretation(md, interp);
    bundle.write("summary.md", md.str());
    auto inputs = ingested.inputs;
    inputs.push_back(labels_path);
    bundle.commit(detail::manifest_head(config, "interpret", inputs));
    return bundle.target();
  });
}

}  // namespace clustkit
