#include "ensobridge/fieldkit.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ensobridge/core.hpp"

namespace ensobridge::fieldkit {

namespace fs = std::filesystem;
using nlohmann::json;

Grid build_grid(double lon_min, double lon_max, double lat_min, double lat_max, double resolution) {
  if (!(resolution > 0)) throw ConfigError("grid resolution must be positive");
  if (!(lon_max > lon_min) || !(lat_max > lat_min))
    throw ConfigError("grid ranges must be non-degenerate");
  auto count = [&](double span) {
    return std::max(1, static_cast<int>(std::ceil(span / resolution - 1e-9)));
  };
  return Grid{lon_min, lon_max, lat_min, lat_max, count(lon_max - lon_min),
              count(lat_max - lat_min), resolution};
}

Grid line_grid(double lon_first, double lon_last, int n) {
  if (n < 2 || !(lon_last > lon_first)) throw ConfigError("line grid needs n >= 2 and a positive span");
  const double d = (lon_last - lon_first) / (n - 1);
  return Grid{lon_first - d / 2, lon_last + d / 2, -0.5, 0.5, n, 1, d};
}

std::vector<YearMonth> monthly_axis(YearMonth start, std::size_t n) {
  std::vector<YearMonth> out(n);
  int idx = start.year * 12 + (start.month - 1);
  for (auto& ym : out) {
    ym = {idx / 12, idx % 12 + 1};
    ++idx;
  }
  return out;
}

GriddedSeries::GriddedSeries(Grid grid, std::vector<std::string> variables,
                             std::vector<std::string> units, std::vector<YearMonth> time)
    : grid_(grid), variables_(std::move(variables)), units_(std::move(units)), time_(std::move(time)) {
  if (units_.size() != variables_.size()) throw DataError("units and variables differ in length");
  data_.assign(time_.size() * snapshot_size(), 0.0);
}

std::size_t GriddedSeries::var_index(std::string_view name) const {
  for (std::size_t v = 0; v < variables_.size(); ++v)
    if (variables_[v] == name) return v;
  throw DataError("variable '" + std::string(name) + "' not present");
}

bool GriddedSeries::has_var(std::string_view name) const {
  return std::find(variables_.begin(), variables_.end(), name) != variables_.end();
}

void GriddedSeries::check_finite() const {
  for (std::size_t k = 0; k < data_.size(); ++k)
    if (!std::isfinite(data_[k]))
      throw DataError("non-finite value at flat index " + std::to_string(k));
}

std::pair<GriddedSeries, Climatology> compute_anomaly(const GriddedSeries& raw) {
  if (raw.n_time() < 12) throw DataError("anomaly needs at least 12 months");
  const std::size_t n = raw.snapshot_size();
  Climatology clim;
  clim.monthly.assign(12, std::vector<double>(n, 0.0));
  std::array<int, 12> count{};
  for (std::size_t t = 0; t < raw.n_time(); ++t) {
    const int m = raw.time()[t].month - 1;
    auto s = raw.snapshot(t);
    auto& c = clim.monthly[m];
    for (std::size_t k = 0; k < n; ++k) c[k] += s[k];
    ++count[m];
  }
  for (int m = 0; m < 12; ++m)
    for (auto& v : clim.monthly[m]) v /= count[m];
  GriddedSeries out = raw;
  for (std::size_t t = 0; t < out.n_time(); ++t) {
    const auto& c = clim.monthly[out.time()[t].month - 1];
    auto s = out.snapshot(t);
    for (std::size_t k = 0; k < n; ++k) s[k] -= c[k];
  }
  return {std::move(out), std::move(clim)};
}

NormalizationParams fit_normalization(const GriddedSeries& series) {
  if (series.n_time() == 0) throw DataError("cannot fit normalization on an empty series");
  NormalizationParams p;
  p.variables = series.variables();
  p.scale.assign(series.n_vars(), 0.0);
  for (std::size_t t = 0; t < series.n_time(); ++t)
    for (std::size_t v = 0; v < series.n_vars(); ++v)
      for (double x : series.field(t, v)) {
        if (!std::isfinite(x)) throw DataError("non-finite value in normalization input");
        p.scale[v] = std::max(p.scale[v], std::abs(x));
      }
  for (auto& s : p.scale) s = s > 0 ? 1.2 * s : 1.0;
  return p;
}

namespace {
GriddedSeries rescale(const GriddedSeries& series, const NormalizationParams& p, bool forward) {
  GriddedSeries out = series;
  std::vector<double> factor(series.n_vars());
  for (std::size_t v = 0; v < series.n_vars(); ++v) {
    auto it = std::find(p.variables.begin(), p.variables.end(), series.variables()[v]);
    if (it == p.variables.end())
      throw DataError("normalization has no scale for " + series.variables()[v]);
    factor[v] = p.scale[it - p.variables.begin()];
  }
  for (std::size_t t = 0; t < out.n_time(); ++t)
    for (std::size_t v = 0; v < out.n_vars(); ++v)
      for (double& x : out.field(t, v)) x = forward ? x / factor[v] : x * factor[v];
  return out;
}
}  // namespace

GriddedSeries normalize(const GriddedSeries& series, const NormalizationParams& p) {
  return rescale(series, p, true);
}

GriddedSeries denormalize(const GriddedSeries& series, const NormalizationParams& p) {
  return rescale(series, p, false);
}

std::vector<double> region_mean(const GriddedSeries& series, std::string_view variable,
                                const Box& box) {
  const auto& g = series.grid();
  const std::size_t v = series.var_index(variable);
  std::vector<std::size_t> cells;
  for (int j = 0; j < g.n_lat; ++j) {
    const double lat = g.lat_center(j);
    if (lat < box.lat_lo - 1e-9 || lat > box.lat_hi + 1e-9) continue;
    for (int i = 0; i < g.n_lon; ++i) {
      const double lon = g.lon_center(i);
      if (lon >= box.lon_lo - 1e-9 && lon <= box.lon_hi + 1e-9)
        cells.push_back(static_cast<std::size_t>(j) * g.n_lon + i);
    }
  }
  if (cells.empty()) throw DataError("region does not contain any cell center");
  std::vector<double> out(series.n_time());
  for (std::size_t t = 0; t < series.n_time(); ++t) {
    auto f = series.field(t, v);
    double s = 0;
    for (auto c : cells) s += f[c];
    out[t] = s / static_cast<double>(cells.size());
  }
  return out;
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw DataError("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(md[k]);
  return os.str();
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::vector<unsigned char> to_le_bytes(std::span<const double> values) {
  std::vector<unsigned char> out(values.size() * 8);
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(values[k]);
    for (int b = 0; b < 8; ++b) out[8 * k + b] = static_cast<unsigned char>(u >> (8 * b));
  }
  return out;
}

std::vector<double> from_le_bytes(std::span<const unsigned char> bytes) {
  if (bytes.size() % 8) throw DataError("binary block length is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= std::uint64_t(bytes[8 * k + b]) << (8 * b);
    out[k] = std::bit_cast<double>(u);
  }
  return out;
}

void write_file(const fs::path& file, std::span<const unsigned char> bytes) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot open " + file.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("write failed: " + file.string());
}

std::vector<unsigned char> read_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

json to_json(const Grid& g) {
  return {{"lon_min", g.lon_min}, {"lon_max", g.lon_max}, {"lat_min", g.lat_min},
          {"lat_max", g.lat_max}, {"n_lon", g.n_lon},     {"n_lat", g.n_lat},
          {"resolution", g.resolution}};
}

Grid grid_from_json(const json& j) {
  return Grid{j.at("lon_min"), j.at("lon_max"), j.at("lat_min"), j.at("lat_max"),
              j.at("n_lon"),   j.at("n_lat"),   j.at("resolution")};
}

json to_json(const NormalizationParams& p) {
  return {{"variables", p.variables}, {"scale", p.scale}};
}

NormalizationParams normalization_from_json(const json& j) {
  return {j.at("variables").get<std::vector<std::string>>(), j.at("scale").get<std::vector<double>>()};
}

void write_dataset(const fs::path& dir, const GriddedSeries& series, const DatasetMeta& meta) {
  series.check_finite();
  fs::create_directories(dir);
  json m;
  m["format"] = "ensobridge-dataset";
  m["endianness"] = "little";
  m["dtype"] = "f64";
  m["layout"] = "time,lat,lon";
  m["grid"] = to_json(series.grid());
  json time = json::array();
  for (const auto& ym : series.time()) time.push_back({ym.year, ym.month});
  m["time"] = time;
  json vars = json::array();
  const std::size_t cells = series.grid().cells();
  for (std::size_t v = 0; v < series.n_vars(); ++v) {
    std::vector<double> block(series.n_time() * cells);
    for (std::size_t t = 0; t < series.n_time(); ++t) {
      auto f = series.field(t, v);
      std::copy(f.begin(), f.end(), block.begin() + t * cells);
    }
    const auto bytes = to_le_bytes(block);
    const std::string file = series.variables()[v] + ".f64";
    write_file(dir / file, bytes);
    vars.push_back({{"name", series.variables()[v]},
                    {"units", series.units()[v]},
                    {"file", file},
                    {"sha256", sha256_hex(bytes)}});
  }
  m["variables"] = vars;
  m["normalization"] = meta.normalization ? to_json(*meta.normalization) : json(nullptr);
  m["extra"] = meta.extra;
  const std::string text = m.dump(1);
  write_file(dir / "manifest.json", std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

GriddedSeries read_dataset(const fs::path& dir, DatasetMeta* meta) {
  if (!fs::exists(dir / "manifest.json"))
    throw DataError("no dataset at " + dir.string() + " (missing manifest.json)");
  json m;
  try {
    const auto raw = read_file(dir / "manifest.json");
    m = json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw DataError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (m.value("endianness", "") != "little" || m.value("dtype", "") != "f64")
    throw DataError("unsupported dataset encoding in " + dir.string());
  std::vector<YearMonth> time;
  for (const auto& t : m.at("time")) time.push_back({t.at(0).get<int>(), t.at(1).get<int>()});
  std::vector<std::string> names, units;
  for (const auto& v : m.at("variables")) {
    names.push_back(v.at("name"));
    units.push_back(v.at("units"));
  }
  GriddedSeries series(grid_from_json(m.at("grid")), names, units, std::move(time));
  const std::size_t cells = series.grid().cells();
  for (std::size_t v = 0; v < names.size(); ++v) {
    const auto& entry = m.at("variables")[v];
    const auto bytes = read_file(dir / entry.at("file").get<std::string>());
    if (sha256_hex(bytes) != entry.at("sha256").get<std::string>())
      throw DataError("content hash mismatch for " + (dir / entry.at("file").get<std::string>()).string());
    const auto block = from_le_bytes(bytes);
    if (block.size() != series.n_time() * cells)
      throw DataError("block size mismatch for variable " + names[v]);
    for (std::size_t t = 0; t < series.n_time(); ++t) {
      auto f = series.field(t, v);
      std::copy(block.begin() + t * cells, block.begin() + (t + 1) * cells, f.begin());
    }
  }
  if (meta) {
    meta->normalization.reset();
    if (!m.at("normalization").is_null()) meta->normalization = normalization_from_json(m.at("normalization"));
    meta->extra = m.value("extra", json::object());
  }
  return series;
}

void write_series_csv(const fs::path& file, const std::vector<YearMonth>& time,
                      std::span<const double> values) {
  if (time.size() != values.size()) throw DataError("time axis and values differ in length");
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file);
  if (!os) throw DataError("cannot open " + file.string());
  os << "year,month,value\n" << std::setprecision(17);
  for (std::size_t k = 0; k < values.size(); ++k)
    os << time[k].year << ',' << time[k].month << ',' << values[k] << '\n';
}

}  // namespace ensobridge::fieldkit

namespace ensobridge::fieldkit {

namespace {

std::string content_hash(nlohmann::json manifest) {
  manifest.erase("content_hash");
  return sha256_hex(manifest.dump());
}

}  // namespace

std::string write_block_artifact(const fs::path& dir, json manifest, const Blocks& blocks) {
  fs::create_directories(dir);
  json list = json::array();
  for (const auto& [name, values] : blocks) {
    const auto bytes = to_le_bytes(values);
    const std::string file = name + ".f64";
    write_file(dir / file, bytes);
    list.push_back({{"name", name}, {"file", file}, {"count", values.size()}, {"sha256", sha256_hex(bytes)}});
  }
  manifest["blocks"] = list;
  manifest["endianness"] = "little";
  manifest["dtype"] = "f64";
  const std::string hash = content_hash(manifest);
  manifest["content_hash"] = hash;
  const std::string text = manifest.dump(1);
  write_file(dir / "manifest.json", std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
  return hash;
}

json read_block_artifact(const fs::path& dir, Blocks& blocks) {
  if (!fs::exists(dir / "manifest.json"))
    throw DataError("no artifact at " + dir.string() + " (missing manifest.json)");
  json manifest;
  try {
    const auto raw = read_file(dir / "manifest.json");
    manifest = json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw DataError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("content_hash", "") != content_hash(manifest))
    throw DataError("content hash mismatch for artifact " + dir.string());
  blocks.clear();
  for (const auto& b : manifest.at("blocks")) {
    const auto bytes = read_file(dir / b.at("file").get<std::string>());
    if (sha256_hex(bytes) != b.at("sha256").get<std::string>())
      throw DataError("block hash mismatch for " + (dir / b.at("file").get<std::string>()).string());
    auto values = from_le_bytes(bytes);
    if (values.size() != b.at("count").get<std::size_t>()) throw DataError("block length mismatch in " + dir.string());
    blocks.emplace_back(b.at("name").get<std::string>(), std::move(values));
  }
  return manifest;
}

const std::vector<double>& find_block(const Blocks& blocks, const std::string& name) {
  for (const auto& [n, v] : blocks)
    if (n == name) return v;
  throw DataError("artifact has no block named " + name);
}

}  // namespace ensobridge::fieldkit
