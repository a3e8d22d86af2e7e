#pragma once

// Tabular ingest, feature engineering, standardization and PCA.

#include "clustkit/core.hpp"
#include "clustkit/csv.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace clustkit {

/// Row-keyed numeric matrix with named columns.
///
/// Invariants (checked on construction): at least one row, unique column
/// names, unique row ids aligned with matrix rows, every value finite.
class FeatureTable {
 public:
  FeatureTable(std::vector<std::string> row_ids, std::vector<std::string> column_names,
               Matrix values)
      : row_ids_(std::move(row_ids)),
        column_names_(std::move(column_names)),
        values_(std::move(values)) {
    if (row_ids_.empty()) throw DataError("feature table needs at least one row");
    if (static_cast<Eigen::Index>(row_ids_.size()) != values_.rows())
      throw DataError("row id count does not match matrix rows");
    if (static_cast<Eigen::Index>(column_names_.size()) != values_.cols())
      throw DataError("column name count does not match matrix columns");
    std::unordered_set<std::string> names;
    for (const auto& name : column_names_)
      if (!names.insert(name).second) throw DataError("duplicate column name: " + name);
    std::unordered_set<std::string> ids;
    for (const auto& id : row_ids_)
      if (!ids.insert(id).second) throw DataError("duplicate row id: " + id);
    for (Eigen::Index r = 0; r < values_.rows(); ++r)
      for (Eigen::Index c = 0; c < values_.cols(); ++c)
        if (!std::isfinite(values_(r, c)))
          throw DataError("non-finite value at row " + row_ids_[static_cast<std::size_t>(r)] +
                          ", column " + column_names_[static_cast<std::size_t>(c)]);
  }

  /// Convenience for anonymous point sets: rows are keyed "0", "1", ...
  static FeatureTable from_matrix(Matrix values) {
    std::vector<std::string> ids(static_cast<std::size_t>(values.rows()));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
    std::vector<std::string> names(static_cast<std::size_t>(values.cols()));
    for (std::size_t j = 0; j < names.size(); ++j) names[j] = "x" + std::to_string(j);
    return FeatureTable(std::move(ids), std::move(names), std::move(values));
  }

  std::size_t rows() const { return row_ids_.size(); }
  std::size_t cols() const { return column_names_.size(); }
  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const Matrix& values() const { return values_; }

  std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t j = 0; j < column_names_.size(); ++j)
      if (column_names_[j] == name) return j;
    return std::nullopt;
  }

  std::size_t column_index(std::string_view name) const {
    auto found = find_column(name);
    if (!found) throw DataError("unknown column: " + std::string(name));
    return *found;
  }

  std::vector<double> column(std::string_view name) const {
    const auto j = static_cast<Eigen::Index>(column_index(name));
    std::vector<double> out(rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = values_(static_cast<Eigen::Index>(i), j);
    return out;
  }

  FeatureTable select(const std::vector<std::string>& names) const {
    Matrix out(values_.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j)
      out.col(static_cast<Eigen::Index>(j)) = values_.col(static_cast<Eigen::Index>(column_index(names[j])));
    return FeatureTable(row_ids_, names, std::move(out));
  }

  FeatureTable select_rows(const std::vector<std::size_t>& indices) const {
    Matrix out(static_cast<Eigen::Index>(indices.size()), values_.cols());
    std::vector<std::string> ids;
    ids.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(indices[i]));
      ids.push_back(row_ids_[indices[i]]);
    }
    return FeatureTable(std::move(ids), column_names_, std::move(out));
  }

  /// Same row ids, replacement values and column names.
  FeatureTable with_values(std::vector<std::string> column_names, Matrix values) const {
    return FeatureTable(row_ids_, std::move(column_names), std::move(values));
  }

  /// Joins the columns of `other` (matched by row id) onto this table.
  FeatureTable join(const FeatureTable& other) const {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < other.rows(); ++i) index.emplace(other.row_ids()[i], i);
    Matrix out(values_.rows(), values_.cols() + other.values().cols());
    out.leftCols(values_.cols()) = values_;
    for (std::size_t i = 0; i < rows(); ++i) {
      auto it = index.find(row_ids_[i]);
      if (it == index.end()) throw DataError("row id missing from joined table: " + row_ids_[i]);
      out.row(static_cast<Eigen::Index>(i)).tail(other.values().cols()) =
          other.values().row(static_cast<Eigen::Index>(it->second));
    }
    auto names = column_names_;
    names.insert(names.end(), other.column_names().begin(), other.column_names().end());
    return FeatureTable(row_ids_, std::move(names), std::move(out));
  }

 private:
  std::vector<std::string> row_ids_;
  std::vector<std::string> column_names_;
  Matrix values_;
};

/// Parses CSV text whose first column is the row key. When `schema` is
/// non-empty only those columns are kept, in schema order; otherwise every
/// column after the key is numeric.
inline FeatureTable parse_table(std::string_view text, const std::vector<std::string>& schema = {},
                                const std::string& source = "<memory>") {
  auto rows = csv::parse(text);
  if (rows.empty()) throw DataError(source + ": missing header row");
  const auto& header = rows.front();
  if (header.size() < 2) throw DataError(source + ": header needs a key column and one value column");

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t j = 1; j < header.size(); ++j)
    if (!position.emplace(header[j], j).second)
      throw DataError(source + ": duplicate column name: " + header[j]);
  if (header[0].empty() || position.count(header[0]))
    throw DataError(source + ": duplicate or empty key column name: " + header[0]);

  std::vector<std::string> names;
  std::vector<std::size_t> source_cols;
  if (schema.empty()) {
    names.assign(header.begin() + 1, header.end());
    for (std::size_t j = 1; j < header.size(); ++j) source_cols.push_back(j);
  } else {
    for (const auto& name : schema) {
      auto it = position.find(name);
      if (it == position.end()) throw DataError(source + ": missing schema column: " + name);
      names.push_back(name);
      source_cols.push_back(it->second);
    }
  }

  const std::size_t n = rows.size() - 1;
  if (n == 0) throw DataError(source + ": no data rows");
  Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i + 1];
    if (row.size() != header.size())
      throw DataError(source + ": row " + std::to_string(i + 2) + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(header.size()));
    ids.push_back(row[0]);
    for (std::size_t j = 0; j < source_cols.size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = csv::parse_finite(
          row[source_cols[j]], source + " row " + row[0] + ", column " + names[j]);
  }
  return FeatureTable(std::move(ids), std::move(names), std::move(values));
}

inline FeatureTable load_table(const std::string& path, const std::vector<std::string>& schema = {}) {
  return parse_table(csv::read_file(path), schema, path);
}

inline void write_table(std::ostream& out, const FeatureTable& table,
                        const std::string& key_header = "row_id") {
  csv::Row header{key_header};
  header.insert(header.end(), table.column_names().begin(), table.column_names().end());
  csv::write_row(out, header);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    csv::Row row{table.row_ids()[i]};
    for (std::size_t j = 0; j < table.cols(); ++j)
      row.push_back(format_double(table.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    csv::write_row(out, row);
  }
}

// ---------------------------------------------------------------------------
// Time series

using Date = std::chrono::sys_days;

inline Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  auto bad = [&] { return DataError("invalid ISO-8601 date: '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    if (ec != std::errc{} || ptr != text.data() + pos + len) throw bad();
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  return Date{ymd};
}

inline std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buffer;
}

/// Cumulative counts per row and date. Dates strictly increasing, counts
/// nonnegative; non-monotone series are allowed (reporting corrections).
class TimeSeriesTable {
 public:
  TimeSeriesTable(std::vector<std::string> row_ids, std::vector<Date> dates, Matrix cumulative)
      : row_ids_(std::move(row_ids)), dates_(std::move(dates)), cumulative_(std::move(cumulative)) {
    if (row_ids_.empty()) throw DataError("time series needs at least one row");
    if (static_cast<Eigen::Index>(row_ids_.size()) != cumulative_.rows() ||
        static_cast<Eigen::Index>(dates_.size()) != cumulative_.cols())
      throw DataError("time series shape mismatch");
    for (std::size_t t = 1; t < dates_.size(); ++t)
      if (dates_[t] <= dates_[t - 1])
        throw DataError("time series dates not strictly increasing at " + format_date(dates_[t]));
    std::unordered_set<std::string> ids;
    for (const auto& id : row_ids_)
      if (!ids.insert(id).second) throw DataError("duplicate row id: " + id);
    for (Eigen::Index r = 0; r < cumulative_.rows(); ++r)
      for (Eigen::Index c = 0; c < cumulative_.cols(); ++c)
        if (!std::isfinite(cumulative_(r, c)) || cumulative_(r, c) < 0)
          throw DataError("cumulative count must be finite and nonnegative at row " +
                          row_ids_[static_cast<std::size_t>(r)] + ", date " +
                          format_date(dates_[static_cast<std::size_t>(c)]));
  }

  std::size_t rows() const { return row_ids_.size(); }
  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const std::vector<Date>& dates() const { return dates_; }
  const Matrix& cumulative() const { return cumulative_; }

 private:
  std::vector<std::string> row_ids_;
  std::vector<Date> dates_;
  Matrix cumulative_;
};

inline TimeSeriesTable parse_timeseries(std::string_view text, const std::string& source = "<memory>") {
  auto rows = csv::parse(text);
  if (rows.empty()) throw DataError(source + ": missing header row");
  const auto& header = rows.front();
  std::vector<Date> dates;
  for (std::size_t j = 1; j < header.size(); ++j) dates.push_back(parse_date(header[j]));
  const std::size_t n = rows.size() - 1;
  if (n == 0) throw DataError(source + ": no data rows");
  Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dates.size()));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i + 1];
    if (row.size() != header.size())
      throw DataError(source + ": row " + std::to_string(i + 2) + " has wrong field count");
    ids.push_back(row[0]);
    for (std::size_t j = 1; j < row.size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) =
          csv::parse_finite(row[j], source + " row " + row[0] + ", date " + header[j]);
  }
  return TimeSeriesTable(std::move(ids), std::move(dates), std::move(values));
}

inline TimeSeriesTable load_timeseries(const std::string& path) {
  return parse_timeseries(csv::read_file(path), path);
}

/// Named dates at which a cumulative series is summarized.
struct SummaryAnchors {
  struct Window {
    std::string name;
    Date start;
    Date end;
  };
  struct Point {
    std::string name;
    Date date;
  };
  std::vector<Window> growth;       // average daily change over [start, end]
  std::vector<Point> new_counts;    // cum[d] - cum[previous date]
  std::vector<Point> cumulative;    // cum[d]
};

struct TimeSeriesSummary {
  FeatureTable table;
  std::size_t clamped_new_counts = 0;  // negative daily differences set to 0
  std::size_t non_monotone_rows = 0;
  std::string growth_rate_definition =
      "(cum[end] - cum[start]) / calendar days between the resolved dates";
};

namespace detail {

/// Index of the last observation on or before `anchor`.
inline std::size_t resolve_anchor(const std::vector<Date>& dates, Date anchor, const std::string& name) {
  if (anchor < dates.front() || anchor > dates.back())
    throw DataError("anchor '" + name + "' (" + format_date(anchor) + ") outside series range " +
                    format_date(dates.front()) + ".." + format_date(dates.back()));
  auto it = std::upper_bound(dates.begin(), dates.end(), anchor);
  return static_cast<std::size_t>(std::distance(dates.begin(), it)) - 1;
}

}  // namespace detail

inline TimeSeriesSummary summarize_timeseries(const TimeSeriesTable& series, const SummaryAnchors& anchors) {
  const auto& dates = series.dates();
  if (dates.size() < 2) throw DataError("time series needs at least 2 dates");
  const auto& cum = series.cumulative();
  const auto n = cum.rows();

  std::vector<std::string> names;
  std::vector<Vector> columns;
  std::size_t clamped = 0;

  for (const auto& window : anchors.growth) {
    const auto a = detail::resolve_anchor(dates, window.start, window.name);
    const auto b = detail::resolve_anchor(dates, window.end, window.name);
    const auto days = (dates[b] - dates[a]).count();
    if (days <= 0) throw DataError("growth window '" + window.name + "' spans no days");
    Vector col(n);
    for (Eigen::Index i = 0; i < n; ++i)
      col(i) = (cum(i, static_cast<Eigen::Index>(b)) - cum(i, static_cast<Eigen::Index>(a))) /
               static_cast<double>(days);
    names.push_back(window.name);
    columns.push_back(std::move(col));
  }
  for (const auto& point : anchors.new_counts) {
    const auto t = static_cast<Eigen::Index>(detail::resolve_anchor(dates, point.date, point.name));
    Vector col(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double diff = t == 0 ? 0.0 : cum(i, t) - cum(i, t - 1);
      if (diff < 0) {
        diff = 0.0;
        ++clamped;
      }
      col(i) = diff;
    }
    names.push_back(point.name);
    columns.push_back(std::move(col));
  }
  for (const auto& point : anchors.cumulative) {
    const auto t = static_cast<Eigen::Index>(detail::resolve_anchor(dates, point.date, point.name));
    names.push_back(point.name);
    columns.push_back(cum.col(t));
  }

  std::size_t non_monotone = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 1; t < cum.cols(); ++t)
      if (cum(i, t) < cum(i, t - 1)) {
        ++non_monotone;
        break;
      }

  if (columns.empty()) throw DataError("no summary anchors given");
  Matrix values(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) values.col(static_cast<Eigen::Index>(j)) = columns[j];
  return {FeatureTable(series.row_ids(), std::move(names), std::move(values)), clamped, non_monotone};
}

// ---------------------------------------------------------------------------
// Rankings

/// Percentile rank in [0, 1]: (position - 1) / (n - 1) with tied values
/// sharing the average of their positions. Larger values rank closer to 1.
inline std::vector<double> percentile_rank(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) throw DataError("percentile_rank needs at least 2 values");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && values[order[end]] == values[order[start]]) ++end;
    // positions start+1 .. end, averaged
    const double average_position = 0.5 * static_cast<double>(start + 1 + end);
    const double rank = (average_position - 1.0) / static_cast<double>(n - 1);
    for (std::size_t i = start; i < end; ++i) ranks[order[i]] = rank;
    start = end;
  }
  return ranks;
}

/// Sums per-column percentile ranks (inverted where `invert[j]` is set, for
/// columns where lower raw values mean greater vulnerability) and re-ranks
/// the sums.
inline std::vector<double> composite_ranking(const FeatureTable& table,
                                             const std::vector<std::string>& component_columns,
                                             const std::vector<bool>& invert = {}) {
  if (component_columns.empty()) throw DataError("composite_ranking needs at least one column");
  if (!invert.empty() && invert.size() != component_columns.size())
    throw DataError("composite_ranking: invert flags must match component columns");
  std::vector<double> sums(table.rows(), 0.0);
  for (std::size_t j = 0; j < component_columns.size(); ++j) {
    auto values = table.column(component_columns[j]);
    if (!invert.empty() && invert[j])
      for (auto& v : values) v = -v;
    const auto ranks = percentile_rank(values);
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += ranks[i];
  }
  return percentile_rank(sums);
}

// ---------------------------------------------------------------------------
// Standardization

struct StandardizationParams {
  std::vector<std::string> column_names;
  std::vector<double> means;
  std::vector<double> scales;  // population standard deviation, 1 for constant columns

  FeatureTable apply(const FeatureTable& table) const {
    if (table.cols() != means.size()) throw DataError("standardization: column count mismatch");
    Matrix out = table.values();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const auto c = static_cast<std::size_t>(j);
      out.col(j) = (out.col(j).array() - means[c]) / scales[c];
    }
    return table.with_values(table.column_names(), std::move(out));
  }

  FeatureTable invert(const FeatureTable& table) const {
    if (table.cols() != means.size()) throw DataError("standardization: column count mismatch");
    Matrix out = table.values();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const auto c = static_cast<std::size_t>(j);
      out.col(j) = out.col(j).array() * scales[c] + means[c];
    }
    return table.with_values(table.column_names(), std::move(out));
  }
};

struct Standardized {
  FeatureTable table;
  StandardizationParams params;
};

inline Standardized standardize(const FeatureTable& table) {
  if (table.rows() < 2) throw DataError("standardize needs at least 2 rows");
  const auto& x = table.values();
  const double n = static_cast<double>(x.rows());
  StandardizationParams params{table.column_names(), {}, {}};
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto column = x.col(j);
    const bool constant = (column.array() == column(0)).all();
    const double mean = column.sum() / n;
    if (constant) {
      params.means.push_back(mean);
      params.scales.push_back(1.0);
      out.col(j).setZero();
      continue;
    }
    const double variance = (column.array() - mean).square().sum() / n;
    const double scale = std::sqrt(variance);
    params.means.push_back(mean);
    params.scales.push_back(scale);
    out.col(j) = (column.array() - mean) / scale;
  }
  return {table.with_values(table.column_names(), std::move(out)), std::move(params)};
}

inline nlohmann::json to_json(const StandardizationParams& params) {
  return {{"columns", params.column_names}, {"means", params.means}, {"scales", params.scales}};
}

inline StandardizationParams standardization_from_json(const nlohmann::json& j) {
  StandardizationParams params;
  params.column_names = j.value("columns", std::vector<std::string>{});
  params.means = j.at("means").get<std::vector<double>>();
  params.scales = j.at("scales").get<std::vector<double>>();
  if (params.means.size() != params.scales.size()) throw DataError("standardization json: size mismatch");
  return params;
}

// ---------------------------------------------------------------------------
// PCA

/// Either a fixed component count or a minimum cumulative explained-variance
/// ratio in (0, 1].
struct PcaTarget {
  enum class Kind { components, variance_ratio };
  Kind kind = Kind::variance_ratio;
  std::size_t components = 0;
  double variance_ratio = 0.95;

  static PcaTarget count(std::size_t n) { return {Kind::components, n, 0.0}; }
  static PcaTarget variance(double ratio) { return {Kind::variance_ratio, 0, ratio}; }
};

struct PcaModel {
  Matrix components;                              // retained x original dims, orthonormal rows
  std::vector<double> explained_variance_ratio;   // every component, descending
  std::vector<double> eigenvalues;                // sample covariance spectrum, descending
  Vector means;
  std::vector<std::string> input_columns;

  std::size_t retained() const { return static_cast<std::size_t>(components.rows()); }

  std::vector<std::string> output_columns() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < retained(); ++i) names.push_back("pc" + std::to_string(i + 1));
    return names;
  }

  FeatureTable transform(const FeatureTable& table) const {
    if (table.cols() != static_cast<std::size_t>(means.size()))
      throw DataError("pca: dimension mismatch");
    Matrix centered = table.values().rowwise() - means.transpose();
    Matrix projected = centered * components.transpose();
    return table.with_values(output_columns(), std::move(projected));
  }

  /// Maps scores back to the input space.
  Matrix reconstruct(const Matrix& scores) const {
    Matrix out = scores * components;
    out.rowwise() += means.transpose();
    return out;
  }
};

struct PcaResult {
  FeatureTable table;
  PcaModel model;
};

inline PcaResult pca_fit_transform(const FeatureTable& table, const PcaTarget& target) {
  if (table.rows() < 2) throw DataError("pca needs more than one row");
  const auto d = static_cast<Eigen::Index>(table.cols());
  if (target.kind == PcaTarget::Kind::variance_ratio &&
      !(target.variance_ratio > 0.0 && target.variance_ratio <= 1.0))
    throw ConfigError("pca target ratio must lie in (0, 1]");
  if (target.kind == PcaTarget::Kind::components &&
      (target.components < 1 || target.components > static_cast<std::size_t>(d)))
    throw ConfigError("pca component count must lie in [1, " + std::to_string(d) + "]");

  const auto& x = table.values();
  PcaModel model;
  model.input_columns = table.column_names();
  model.means = x.colwise().mean().transpose();
  Matrix centered = x.rowwise() - model.means.transpose();
  Matrix covariance = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  if (!covariance.allFinite()) throw NumericError("pca: non-finite covariance");

  Eigen::SelfAdjointEigenSolver<Matrix> solver(covariance);
  if (solver.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  Matrix vectors(d, d);
  model.eigenvalues.resize(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = d - 1 - i;
    model.eigenvalues[static_cast<std::size_t>(i)] = std::max(0.0, solver.eigenvalues()(src));
    Vector v = solver.eigenvectors().col(src);
    Eigen::Index pivot = 0;
    for (Eigen::Index k = 1; k < d; ++k)
      if (std::abs(v(k)) > std::abs(v(pivot))) pivot = k;
    if (v(pivot) < 0) v = -v;
    vectors.row(i) = v.transpose();
  }
  const double total = std::accumulate(model.eigenvalues.begin(), model.eigenvalues.end(), 0.0);
  if (!(total > 0.0)) throw NumericError("pca: data has zero total variance");
  for (double ev : model.eigenvalues) model.explained_variance_ratio.push_back(ev / total);

  std::size_t keep = target.components;
  if (target.kind == PcaTarget::Kind::variance_ratio) {
    double cumulative = 0.0;
    keep = static_cast<std::size_t>(d);
    for (std::size_t i = 0; i < model.explained_variance_ratio.size(); ++i) {
      cumulative += model.explained_variance_ratio[i];
      if (cumulative >= target.variance_ratio - 1e-12) {
        keep = i + 1;
        break;
      }
    }
  }
  model.components = vectors.topRows(static_cast<Eigen::Index>(keep));
  auto transformed = model.transform(table);
  return {std::move(transformed), std::move(model)};
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("ragged matrix in json");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline nlohmann::json to_json(const PcaModel& model) {
  return {{"columns", model.input_columns},
          {"components", matrix_to_json(model.components)},
          {"ratios", model.explained_variance_ratio},
          {"means", std::vector<double>(model.means.data(), model.means.data() + model.means.size())}};
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel model;
  model.input_columns = j.value("columns", std::vector<std::string>{});
  model.components = matrix_from_json(j.at("components"));
  model.explained_variance_ratio = j.at("ratios").get<std::vector<double>>();
  const auto means = j.at("means").get<std::vector<double>>();
  model.means = Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
  return model;
}

}  // namespace clustkit
