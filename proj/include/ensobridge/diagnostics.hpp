#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ensobridge/fieldkit.hpp"

namespace ensobridge::diagnostics {

struct NinoRegionSet {
  static constexpr fieldkit::Box nino3{210, 270, -5, 5};
  static constexpr fieldkit::Box nino34{190, 240, -5, 5};
  static constexpr fieldkit::Box nino4{160, 210, -5, 5};
};

std::vector<double> nino_index(const fieldkit::GriddedSeries& sst, const fieldkit::Box& region,
                               std::string_view variable = "SST");

enum class EventKind { EP_ElNino, CP_ElNino, EP_LaNina, CP_LaNina };
const char* to_string(EventKind k);

struct EventRecord {
  EventKind kind;
  bool extreme = false;
  bool multi_year = false;
  int djf_year = 0;  // year of the December; the season is (djf_year, djf_year + 1)
  double nino3_djf = 0, nino4_djf = 0;
  double nino3_peak = 0, nino4_peak = 0;  // extremum over April..following March
  bool operator==(const EventRecord&) const = default;
};

std::vector<EventRecord> classify_events(const std::vector<fieldkit::YearMonth>& time,
                                         std::span<const double> nino3, std::span<const double> nino4,
                                         std::vector<std::string>* notices = nullptr);

std::vector<double> acf(std::span<const double> series, int max_lag);

struct Spectrum {
  std::vector<double> freq;  // cycles per month
  std::vector<double> power;
};
Spectrum power_spectrum(std::span<const double> series, int segment_len);
double dominant_period_years(const Spectrum& s);

std::vector<double> seasonal_variance(const std::vector<fieldkit::YearMonth>& time,
                                      std::span<const double> series);

// Per-cell temporal standard deviation, [lat][lon] flattened.
std::vector<double> std_map(const fieldkit::GriddedSeries& fields, std::string_view variable);
// Meridional mean over the band: rows are longitudes, columns are months.
Eigen::MatrixXd hovmoller(const fieldkit::GriddedSeries& fields, std::string_view variable,
                          double lat_lo, double lat_hi);

double mean(std::span<const double> x);
double stddev(std::span<const double> x);  // sample (n - 1)
double skewness(std::span<const double> x);
double silverman_bandwidth(std::span<const double> x);
std::vector<double> pdf_grid(std::span<const double> a, std::span<const double> b = {}, int n = 1024);
std::vector<double> pdf_estimate(std::span<const double> series, std::span<const double> grid);
double trapezoid(std::span<const double> y, std::span<const double> grid);
double distribution_distance(std::span<const double> p, std::span<const double> q,
                             std::span<const double> grid);

struct Band {
  std::vector<double> lower, upper;
};
// members: one row per member, one column per point.
Band ensemble_band(const Eigen::MatrixXd& members, double level = 0.95);
double quantile(std::vector<double> values, double q);

struct StatsReport {
  std::vector<double> pdf_grid, pdf;
  std::vector<double> acf;
  Spectrum spectrum;
  std::vector<double> seasonal_variance;
  double mean = 0, std = 0, skewness = 0;
  std::optional<Band> band;
};

struct StatsOptions {
  int max_lag = 36;
  int segment_len = 120;
  int pdf_points = 512;
};

// The series is mean-centred before PDF, ACF and spectrum.
StatsReport stats_report(const std::vector<fieldkit::YearMonth>& time, std::span<const double> series,
                         std::span<const double> grid, const StatsOptions& opt = {});

nlohmann::json to_json(const StatsReport& r);
nlohmann::json to_json(const EventRecord& e);
nlohmann::json to_json(const std::vector<EventRecord>& events);

}  // namespace ensobridge::diagnostics
