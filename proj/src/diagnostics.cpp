#include "ensobridge/diagnostics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "ensobridge/core.hpp"

namespace ensobridge::diagnostics {

using fieldkit::YearMonth;
using nlohmann::json;

std::vector<double> nino_index(const fieldkit::GriddedSeries& sst, const fieldkit::Box& region,
                               std::string_view variable) {
  return fieldkit::region_mean(sst, variable, region);
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::EP_ElNino: return "EP_ElNino";
    case EventKind::CP_ElNino: return "CP_ElNino";
    case EventKind::EP_LaNina: return "EP_LaNina";
    case EventKind::CP_LaNina: return "CP_LaNina";
  }
  return "?";
}

namespace {
bool warm(EventKind k) { return k == EventKind::EP_ElNino || k == EventKind::CP_ElNino; }
}  // namespace

std::vector<EventRecord> classify_events(const std::vector<YearMonth>& time,
                                         std::span<const double> n3, std::span<const double> n4,
                                         std::vector<std::string>* notices) {
  if (time.size() != n3.size() || time.size() != n4.size())
    throw DataError("index series and time axis differ in length");
  std::map<int, std::size_t> at;  // year*12 + month-1 -> row
  for (std::size_t k = 0; k < time.size(); ++k) at[time[k].year * 12 + time[k].month - 1] = k;
  auto row = [&](int year, int month) -> std::optional<std::size_t> {
    auto it = at.find(year * 12 + month - 1);
    if (it == at.end()) return std::nullopt;
    return it->second;
  };

  std::vector<EventRecord> events;
  if (time.empty()) return events;
  const int y0 = time.front().year - 1, y1 = time.back().year;
  for (int y = y0; y <= y1; ++y) {
    const auto d = row(y, 12), j = row(y + 1, 1), f = row(y + 1, 2);
    if (!d || !j || !f) {
      if ((d || j || f) && notices)
        notices->push_back("DJF " + std::to_string(y) + "/" + std::to_string(y + 1) + " incomplete, skipped");
      continue;
    }
    const double m3 = (n3[*d] + n3[*j] + n3[*f]) / 3.0;
    const double m4 = (n4[*d] + n4[*j] + n4[*f]) / 3.0;
    std::optional<EventKind> kind;
    if (m3 > 0.5 && m3 >= m4) kind = EventKind::EP_ElNino;
    else if (m4 > 0.5 && m4 > m3) kind = EventKind::CP_ElNino;
    else if (m3 < -0.5 && m3 <= m4) kind = EventKind::EP_LaNina;
    else if (m4 < -0.5 && m4 < m3) kind = EventKind::CP_LaNina;
    if (!kind) continue;

    EventRecord e{*kind};
    e.djf_year = y;
    e.nino3_djf = m3;
    e.nino4_djf = m4;
    const bool is_warm = warm(*kind);
    e.nino3_peak = m3;
    e.nino4_peak = m4;
    int seen = 0;
    for (int k = 0; k < 12; ++k) {
      const int mm = 4 + k;  // April .. next March
      const auto r = row(mm <= 12 ? y : y + 1, mm <= 12 ? mm : mm - 12);
      if (!r) continue;
      ++seen;
      e.nino3_peak = is_warm ? std::max(e.nino3_peak, n3[*r]) : std::min(e.nino3_peak, n3[*r]);
      e.nino4_peak = is_warm ? std::max(e.nino4_peak, n4[*r]) : std::min(e.nino4_peak, n4[*r]);
    }
    if (seen < 12 && notices)
      notices->push_back("April-March window for DJF " + std::to_string(y) + " is partial");
    e.extreme = *kind == EventKind::EP_ElNino && e.nino3_peak > 2.5;
    events.push_back(e);
  }
  for (std::size_t k = 0; k + 1 < events.size(); ++k) {
    if (events[k + 1].djf_year == events[k].djf_year + 1 && warm(events[k].kind) == warm(events[k + 1].kind))
      events[k].multi_year = events[k + 1].multi_year = true;
  }
  return events;
}

double mean(std::span<const double> x) {
  if (x.empty()) throw DataError("mean of an empty series");
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  if (x.size() < 2) throw DataError("standard deviation needs two samples");
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double skewness(std::span<const double> x) {
  const double m = mean(x);
  double m2 = 0, m3 = 0;
  for (double v : x) {
    m2 += (v - m) * (v - m);
    m3 += (v - m) * (v - m) * (v - m);
  }
  m2 /= static_cast<double>(x.size());
  m3 /= static_cast<double>(x.size());
  if (m2 <= 0) throw DataError("skewness of a constant series");
  return m3 / std::pow(m2, 1.5);
}

std::vector<double> acf(std::span<const double> x, int max_lag) {
  if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= x.size())
    throw DataError("ACF lag must be smaller than the series length");
  const double m = mean(x);
  double c0 = 0;
  for (double v : x) c0 += (v - m) * (v - m);
  if (c0 <= 0) throw DataError("ACF of a constant series");
  std::vector<double> out(max_lag + 1);
  out[0] = 1.0;
  for (int k = 1; k <= max_lag; ++k) {
    double c = 0;
    for (std::size_t t = 0; t + k < x.size(); ++t) c += (x[t] - m) * (x[t + k] - m);
    out[k] = c / c0;
  }
  return out;
}

namespace {
std::mutex g_fftw_plan_mutex;
}

Spectrum power_spectrum(std::span<const double> x, int L) {
  if (L < 4 || static_cast<std::size_t>(L) > x.size()) throw DataError("segment length must be in [4, series length]");
  const int step = L / 2;
  const int nseg = static_cast<int>((x.size() - L) / step) + 1;
  std::vector<double> w(L), buf(L);
  double w2 = 0;
  for (int n = 0; n < L; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / L));
    w2 += w[n] * w[n];
  }
  const int nf = L / 2 + 1;
  fftw_complex* out = fftw_alloc_complex(nf);
  fftw_plan plan;
  {
    std::lock_guard lock(g_fftw_plan_mutex);
    plan = fftw_plan_dft_r2c_1d(L, buf.data(), out, FFTW_ESTIMATE);
  }
  Spectrum s;
  s.power.assign(nf, 0.0);
  for (int k = 0; k < nf; ++k) s.freq.push_back(static_cast<double>(k) / L);
  for (int g = 0; g < nseg; ++g) {
    const auto seg = x.subspan(static_cast<std::size_t>(g) * step, L);
    const double m = mean(seg);
    for (int n = 0; n < L; ++n) buf[n] = (seg[n] - m) * w[n];
    fftw_execute_dft_r2c(plan, buf.data(), out);
    for (int k = 0; k < nf; ++k) {
      double p = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / w2;
      if (k > 0 && !(L % 2 == 0 && k == L / 2)) p *= 2.0;
      s.power[k] += p / nseg;
    }
  }
  {
    std::lock_guard lock(g_fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(out);
  return s;
}

double dominant_period_years(const Spectrum& s) {
  std::size_t best = 1;
  for (std::size_t k = 1; k < s.power.size(); ++k)
    if (s.power[k] > s.power[best]) best = k;
  return 1.0 / s.freq[best] / 12.0;
}

std::vector<double> seasonal_variance(const std::vector<YearMonth>& time, std::span<const double> x) {
  if (time.size() != x.size()) throw DataError("time axis and series differ in length");
  std::array<std::vector<double>, 12> by_month;
  for (std::size_t k = 0; k < x.size(); ++k) by_month[time[k].month - 1].push_back(x[k]);
  std::vector<double> out(12);
  for (int m = 0; m < 12; ++m) {
    if (by_month[m].size() < 2) throw DataError("fewer than two samples for calendar month " + std::to_string(m + 1));
    const double sd = stddev(by_month[m]);
    out[m] = sd * sd;
  }
  return out;
}

std::vector<double> std_map(const fieldkit::GriddedSeries& fields, std::string_view variable) {
  if (fields.n_time() == 0) throw DataError("std map of an empty series");
  const auto v = fields.var_index(variable);
  const std::size_t n = fields.grid().cells();
  std::vector<double> m(n, 0.0), s(n, 0.0);
  for (std::size_t t = 0; t < fields.n_time(); ++t) {
    auto f = fields.field(t, v);
    for (std::size_t c = 0; c < n; ++c) m[c] += f[c];
  }
  for (auto& x : m) x /= static_cast<double>(fields.n_time());
  for (std::size_t t = 0; t < fields.n_time(); ++t) {
    auto f = fields.field(t, v);
    for (std::size_t c = 0; c < n; ++c) s[c] += (f[c] - m[c]) * (f[c] - m[c]);
  }
  const double denom = fields.n_time() > 1 ? static_cast<double>(fields.n_time() - 1) : 1.0;
  for (auto& x : s) x = std::sqrt(x / denom);
  return s;
}

Eigen::MatrixXd hovmoller(const fieldkit::GriddedSeries& fields, std::string_view variable,
                          double lat_lo, double lat_hi) {
  const auto v = fields.var_index(variable);
  const auto& g = fields.grid();
  std::vector<int> rows;
  for (int j = 0; j < g.n_lat; ++j)
    if (g.lat_center(j) >= lat_lo - 1e-9 && g.lat_center(j) <= lat_hi + 1e-9) rows.push_back(j);
  if (rows.empty()) throw DataError("latitude band contains no cell centers");
  Eigen::MatrixXd out(g.n_lon, static_cast<Eigen::Index>(fields.n_time()));
  for (std::size_t t = 0; t < fields.n_time(); ++t) {
    auto f = fields.field(t, v);
    for (int i = 0; i < g.n_lon; ++i) {
      double s = 0;
      for (int j : rows) s += f[static_cast<std::size_t>(j) * g.n_lon + i];
      out(i, static_cast<Eigen::Index>(t)) = s / static_cast<double>(rows.size());
    }
  }
  return out;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DataError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double silverman_bandwidth(std::span<const double> x) {
  const double sd = stddev(x);
  std::vector<double> v(x.begin(), x.end());
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0)) throw DataError("density estimate of a degenerate series");
  return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

std::vector<double> pdf_grid(std::span<const double> a, std::span<const double> b, int n) {
  double lo = *std::min_element(a.begin(), a.end()), hi = *std::max_element(a.begin(), a.end());
  double h = silverman_bandwidth(a);
  if (!b.empty()) {
    lo = std::min(lo, *std::min_element(b.begin(), b.end()));
    hi = std::max(hi, *std::max_element(b.begin(), b.end()));
    h = std::max(h, silverman_bandwidth(b));
  }
  lo -= 7 * h;
  hi += 7 * h;
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = lo + (hi - lo) * k / (n - 1);
  return g;
}

std::vector<double> pdf_estimate(std::span<const double> x, std::span<const double> grid) {
  if (x.size() < 100) throw DataError("density estimate needs at least 100 samples");
  const double h = silverman_bandwidth(x);
  const double norm = 1.0 / (static_cast<double>(x.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double s = 0;
    for (double v : x) {
      const double z = (grid[k] - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    out[k] = s * norm;
  }
  return out;
}

double trapezoid(std::span<const double> y, std::span<const double> grid) {
  if (y.size() != grid.size()) throw DataError("integrand and grid differ in length");
  double s = 0;
  for (std::size_t k = 1; k < y.size(); ++k) s += 0.5 * (y[k] + y[k - 1]) * (grid[k] - grid[k - 1]);
  return s;
}

double distribution_distance(std::span<const double> p, std::span<const double> q,
                             std::span<const double> grid) {
  if (p.size() != q.size()) throw DataError("densities differ in length");
  std::vector<double> d(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) d[k] = std::abs(p[k] - q[k]);
  return trapezoid(d, grid);
}

Band ensemble_band(const Eigen::MatrixXd& members, double level) {
  if (members.rows() < 20) throw DataError("ensemble band needs at least 20 members");
  const double a = (1.0 - level) / 2.0;
  Band b;
  std::vector<double> col(static_cast<std::size_t>(members.rows()));
  for (Eigen::Index c = 0; c < members.cols(); ++c) {
    for (Eigen::Index r = 0; r < members.rows(); ++r) col[r] = members(r, c);
    b.lower.push_back(quantile(col, a));
    b.upper.push_back(quantile(col, 1.0 - a));
  }
  return b;
}

StatsReport stats_report(const std::vector<YearMonth>& time, std::span<const double> series,
                         std::span<const double> grid, const StatsOptions& opt) {
  StatsReport r;
  r.mean = mean(series);
  r.std = stddev(series);
  r.skewness = skewness(series);
  std::vector<double> c(series.begin(), series.end());
  for (auto& v : c) v -= r.mean;
  r.pdf_grid.assign(grid.begin(), grid.end());
  r.pdf = pdf_estimate(c, grid);
  r.acf = acf(c, std::min<int>(opt.max_lag, static_cast<int>(c.size()) - 1));
  r.spectrum = power_spectrum(c, std::min<int>(opt.segment_len, static_cast<int>(c.size())));
  r.seasonal_variance = seasonal_variance(time, c);
  return r;
}

json to_json(const StatsReport& r) {
  std::vector<double> period;
  for (double f : r.spectrum.freq) period.push_back(f > 0 ? 1.0 / f / 12.0 : 0.0);
  json j = {{"mean", r.mean},
            {"std", r.std},
            {"skewness", r.skewness},
            {"pdf", {{"grid", r.pdf_grid}, {"density", r.pdf}}},
            {"acf", r.acf},
            {"spectrum", {{"freq_cpm", r.spectrum.freq}, {"power", r.spectrum.power}, {"period_years", period}}},
            {"seasonal_variance", r.seasonal_variance}};
  if (r.band) j["band"] = {{"lower", r.band->lower}, {"upper", r.band->upper}};
  return j;
}

json to_json(const EventRecord& e) {
  return {{"kind", to_string(e.kind)},       {"extreme", e.extreme},
          {"multi_year", e.multi_year},      {"djf_season", {e.djf_year, e.djf_year + 1}},
          {"nino3_djf", e.nino3_djf},        {"nino4_djf", e.nino4_djf},
          {"nino3_peak", e.nino3_peak},      {"nino4_peak", e.nino4_peak}};
}

json to_json(const std::vector<EventRecord>& events) {
  json a = json::array();
  for (const auto& e : events) a.push_back(to_json(e));
  return a;
}

}  // namespace ensobridge::diagnostics
