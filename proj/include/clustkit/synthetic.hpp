#pragma once

// Synthetic county-style data: demographic and policy columns, the four
// composite vulnerability rankings, and cumulative case/death series with
// three planted regimes (early peak, late peak, flat).

#include "clustkit/dataset.hpp"

#include <filesystem>
#include <fstream>

namespace clustkit {

struct SyntheticData {
  FeatureTable features;
  TimeSeriesTable cases;
  TimeSeriesTable deaths;
  LabelVector planted;  // 0 early peak, 1 late peak, 2 flat
};

inline constexpr const char* kRegimeNames[] = {"early_peak", "late_peak", "flat"};

/// Column order of the generated feature file.
inline std::vector<std::string> synthetic_feature_columns() {
  return {"area",         "population",        "rank_socioeconomic", "rank_household",   "rank_minority",
          "rank_housing", "rurality",          "icu_beds",           "nursing_home_pop", "testing_locations",
          "mobility_score", "state_closure",   "school_closure"};
}

/// Anchors for the generated series (first case date to data-collection date).
inline SummaryAnchors default_case_anchors() {
  SummaryAnchors a;
  a.growth = {{"case_growth_first_peak", parse_date("2020-01-22"), parse_date("2020-04-12")},
              {"case_growth_last_month", parse_date("2020-07-08"), parse_date("2020-08-08")}};
  a.new_counts = {{"new_cases_apr12", parse_date("2020-04-12")}, {"new_cases_jul23", parse_date("2020-07-23")}};
  a.cumulative = {{"cumulative_cases_aug8", parse_date("2020-08-08")}};
  return a;
}

inline SummaryAnchors default_death_anchors() {
  SummaryAnchors a;
  a.new_counts = {{"new_deaths_apr12", parse_date("2020-04-12")}, {"new_deaths_jul23", parse_date("2020-07-23")}};
  a.cumulative = {{"cumulative_deaths_aug8", parse_date("2020-08-08")}};
  return a;
}

namespace detail {

inline double draw(Rng& rng, double mean, double sd, double lo = -kInf, double hi = kInf) {
  return std::clamp(mean + sd * standard_normal(rng), lo, hi);
}

/// Daily counts around `expected` with Poisson-like spread, never negative.
inline double noisy_count(Rng& rng, double expected) {
  if (expected <= 0.0) return 0.0;
  return std::max(0.0, std::round(expected + std::sqrt(expected) * standard_normal(rng)));
}

}  // namespace detail

inline SyntheticData generate_synthetic(std::size_t rows, std::uint64_t seed) {
  if (rows < 10) throw ConfigError("generate_synthetic: rows must be >= 10");
  Rng rng(seed);
  const std::size_t n = rows;

  std::vector<std::string> ids(n);
  LabelVector regime(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = std::to_string(1001 + 2 * i);
    if (ids[i].size() < 5) ids[i].insert(0, 5 - ids[i].size(), '0');
    regime[i] = static_cast<int>(uniform_index(rng, 3));
  }

  // Per-regime means and spreads: early peak, late peak, flat.
  constexpr double pop_mean[] = {400e3, 150e3, 25e3}, pop_sd[] = {60e3, 22e3, 4e3};
  constexpr double area_mean[] = {500, 1100, 1800}, area_sd[] = {90, 180, 280};
  constexpr double rural_mean[] = {0.15, 0.45, 0.75};
  constexpr double test_mean[] = {9, 4, 1}, test_sd[] = {1.5, 1.0, 0.6};
  constexpr double mobility_mean[] = {0.65, 0.42, 0.2};
  constexpr double icu_per_10k[] = {3.0, 2.0, 0.8};
  constexpr double nursing_rate[] = {0.006, 0.005, 0.007};
  constexpr int state_code[] = {3, 2, 1}, school_code[] = {2, 1, 0};
  constexpr double attack[] = {0.015, 0.02, 0.004};
  constexpr double fatality[] = {0.05, 0.02, 0.015};

  // Raw vulnerability components per theme: {name, regime means, sd, invert}.
  struct Component {
    const char* name;
    double mean[3];
    double sd;
    bool invert;
  };
  const std::vector<std::vector<Component>> themes = {
      {{"poverty", {12, 16, 20}, 3, false},
       {"unemployment", {5, 7, 9}, 1.5, false},
       {"per_capita_income", {38000, 30000, 25000}, 4000, true},
       {"no_diploma", {10, 13, 16}, 2.5, false}},
      {{"aged_65", {14, 17, 21}, 2, false},
       {"aged_17", {22, 23, 22}, 2, false},
       {"disability", {11, 14, 17}, 2, false},
       {"single_parent", {9, 8, 7}, 1.5, false}},
      {{"minority", {45, 30, 12}, 8, false}, {"limited_english", {6, 3, 1}, 1.2, false}},
      {{"multi_unit", {20, 8, 2}, 4, false},
       {"mobile_homes", {3, 9, 16}, 3, false},
       {"crowding", {4, 3, 2}, 0.8, false},
       {"no_vehicle", {12, 6, 5}, 2, false},
       {"group_quarters", {3, 3, 4}, 1, false}},
  };

  Matrix features(static_cast<Eigen::Index>(n), 13);
  std::vector<double> population(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = regime[i];
    const auto row = static_cast<Eigen::Index>(i);
    population[i] = std::round(detail::draw(rng, pop_mean[r], pop_sd[r], 1000.0));
    features(row, 0) = std::round(detail::draw(rng, area_mean[r], area_sd[r], 20.0));
    features(row, 1) = population[i];
    features(row, 6) = detail::draw(rng, rural_mean[r], 0.06, 0.0, 1.0);
    features(row, 7) = std::round(std::max(0.0, population[i] / 1e4 * detail::draw(rng, icu_per_10k[r], 0.3, 0.0)));
    features(row, 8) = std::round(population[i] * detail::draw(rng, nursing_rate[r], 0.0006, 0.0));
    features(row, 9) = std::round(detail::draw(rng, test_mean[r], test_sd[r], 0.0));
    features(row, 10) = detail::draw(rng, mobility_mean[r], 0.07, 0.0, 1.0);
    auto jitter = [&](int base, int top) {
      const double u = uniform01(rng);
      const int shift = u < 0.08 ? -1 : u > 0.92 ? 1 : 0;
      return static_cast<double>(std::clamp(base + shift, 0, top));
    };
    features(row, 11) = jitter(state_code[r], 3);
    features(row, 12) = jitter(school_code[r], 2);
  }

  for (std::size_t t = 0; t < themes.size(); ++t) {
    const auto& theme = themes[t];
    Matrix raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(theme.size()));
    std::vector<std::string> names;
    std::vector<bool> invert;
    for (std::size_t c = 0; c < theme.size(); ++c) {
      names.push_back(theme[c].name);
      invert.push_back(theme[c].invert);
      for (std::size_t i = 0; i < n; ++i)
        raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            detail::draw(rng, theme[c].mean[regime[i]], theme[c].sd, 0.0);
    }
    const auto ranking = composite_ranking(FeatureTable(ids, names, std::move(raw)), names, invert);
    for (std::size_t i = 0; i < n; ++i) features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 + t)) = ranking[i];
  }

  // Daily series from 2020-01-22 through 2020-08-08.
  const Date first = parse_date("2020-01-22");
  const Date last = parse_date("2020-08-08");
  const auto days = static_cast<std::size_t>((last - first).count()) + 1;
  std::vector<Date> dates(days);
  for (std::size_t t = 0; t < days; ++t) dates[t] = first + std::chrono::days(static_cast<int>(t));
  const double early_center = static_cast<double>((parse_date("2020-04-10") - first).count());
  const double late_center = static_cast<double>((parse_date("2020-07-20") - first).count());
  auto bump = [](double t, double center, double width) {
    const double z = (t - center) / width;
    return std::exp(-0.5 * z * z);
  };

  Matrix cases(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(days));
  Matrix deaths(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(days));
  std::vector<double> shape(days), daily(days);
  constexpr std::size_t lag = 12;
  for (std::size_t i = 0; i < n; ++i) {
    const int r = regime[i];
    for (std::size_t t = 0; t < days; ++t) {
      const double x = static_cast<double>(t);
      switch (r) {
        case 0: shape[t] = bump(x, early_center, 14.0) + 0.12 * bump(x, late_center, 20.0); break;
        case 1: shape[t] = 0.08 * bump(x, early_center, 14.0) + bump(x, late_center, 14.0); break;
        default: shape[t] = t >= 40 ? 1.0 : 0.0; break;
      }
    }
    const double total_shape = std::accumulate(shape.begin(), shape.end(), 0.0);
    const double expected_total = population[i] * detail::draw(rng, attack[r], 0.1 * attack[r], 0.0);
    const double cfr = detail::draw(rng, fatality[r], 0.1 * fatality[r], 0.0);
    double cum_cases = 0.0, cum_deaths = 0.0;
    for (std::size_t t = 0; t < days; ++t) {
      daily[t] = detail::noisy_count(rng, expected_total * shape[t] / total_shape);
      cum_cases += daily[t];
      const double expected_deaths = t >= lag ? daily[t - lag] * cfr : 0.0;
      cum_deaths += detail::noisy_count(rng, expected_deaths);
      cases(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = cum_cases;
      deaths(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = cum_deaths;
    }
  }

  return {FeatureTable(ids, synthetic_feature_columns(), std::move(features)), TimeSeriesTable(ids, dates, std::move(cases)),
          TimeSeriesTable(ids, dates, std::move(deaths)), std::move(regime)};
}

inline void write_timeseries(std::ostream& out, const TimeSeriesTable& series, const std::string& key_header = "fips") {
  std::vector<std::string> header{key_header};
  for (const auto& d : series.dates()) header.push_back(format_date(d));
  csv::write_row(out, header);
  for (std::size_t i = 0; i < series.rows(); ++i) {
    std::vector<std::string> cells{series.row_ids()[i]};
    for (Eigen::Index t = 0; t < series.cumulative().cols(); ++t)
      cells.push_back(format_double(series.cumulative()(static_cast<Eigen::Index>(i), t)));
    csv::write_row(out, cells);
  }
}

/// Writes features.csv, cases.csv, deaths.csv and planted.csv into `dir`.
inline void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("features.csv");
    write_table(out, data.features, "fips");
  }
  {
    auto out = open("cases.csv");
    write_timeseries(out, data.cases);
  }
  {
    auto out = open("deaths.csv");
    write_timeseries(out, data.deaths);
  }
  {
    auto out = open("planted.csv");
    out << "fips,regime\n";
    for (std::size_t i = 0; i < data.planted.size(); ++i)
      csv::write_row(out, {data.features.row_ids()[i], kRegimeNames[data.planted[i]]});
  }
}

}  // namespace clustkit
