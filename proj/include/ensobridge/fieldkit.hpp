#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ensobridge::fieldkit {

struct Grid {
  double lon_min = 0, lon_max = 0, lat_min = 0, lat_max = 0;
  int n_lon = 0, n_lat = 0;
  double resolution = 0;

  double dlon() const { return (lon_max - lon_min) / n_lon; }
  double dlat() const { return (lat_max - lat_min) / n_lat; }
  double lon_center(int i) const { return lon_min + (i + 0.5) * dlon(); }
  double lat_center(int j) const { return lat_min + (j + 0.5) * dlat(); }
  std::size_t cells() const { return static_cast<std::size_t>(n_lon) * n_lat; }
  bool operator==(const Grid&) const = default;
};

// Counts are ceil(span/resolution) up to round-off; the cells then tile the
// requested span exactly.
Grid build_grid(double lon_min, double lon_max, double lat_min, double lat_max, double resolution);

// A single-row grid whose cell centers sit on the given evenly spaced
// longitudes; used for equatorial trajectories and observation streams.
Grid line_grid(double lon_first, double lon_last, int n);

struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12
  bool operator==(const YearMonth&) const = default;
};

std::vector<YearMonth> monthly_axis(YearMonth start, std::size_t n);

class GriddedSeries {
 public:
  GriddedSeries() = default;
  GriddedSeries(Grid grid, std::vector<std::string> variables, std::vector<std::string> units,
                std::vector<YearMonth> time);

  const Grid& grid() const { return grid_; }
  const std::vector<std::string>& variables() const { return variables_; }
  const std::vector<std::string>& units() const { return units_; }
  const std::vector<YearMonth>& time() const { return time_; }
  std::size_t n_time() const { return time_.size(); }
  std::size_t n_vars() const { return variables_.size(); }
  std::size_t snapshot_size() const { return n_vars() * grid_.cells(); }

  std::size_t var_index(std::string_view name) const;  // throws DataError
  bool has_var(std::string_view name) const;

  double& at(std::size_t t, std::size_t v, int j, int i) {
    return data_[((t * n_vars() + v) * grid_.n_lat + j) * grid_.n_lon + i];
  }
  double at(std::size_t t, std::size_t v, int j, int i) const {
    return data_[((t * n_vars() + v) * grid_.n_lat + j) * grid_.n_lon + i];
  }
  std::span<double> snapshot(std::size_t t) {
    return {data_.data() + t * snapshot_size(), snapshot_size()};
  }
  std::span<const double> snapshot(std::size_t t) const {
    return {data_.data() + t * snapshot_size(), snapshot_size()};
  }
  std::span<double> field(std::size_t t, std::size_t v) {
    return {data_.data() + (t * n_vars() + v) * grid_.cells(), grid_.cells()};
  }
  std::span<const double> field(std::size_t t, std::size_t v) const {
    return {data_.data() + (t * n_vars() + v) * grid_.cells(), grid_.cells()};
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Throws DataError on non-finite entries.
  void check_finite() const;
  bool operator==(const GriddedSeries&) const = default;

 private:
  Grid grid_;
  std::vector<std::string> variables_;
  std::vector<std::string> units_;
  std::vector<YearMonth> time_;
  std::vector<double> data_;
};

// Twelve snapshots, index 0 = January.
struct Climatology {
  std::vector<std::vector<double>> monthly;
};

std::pair<GriddedSeries, Climatology> compute_anomaly(const GriddedSeries& raw);

struct NormalizationParams {
  std::vector<std::string> variables;
  std::vector<double> scale;
  bool operator==(const NormalizationParams&) const = default;
};

NormalizationParams fit_normalization(const GriddedSeries& series);
GriddedSeries normalize(const GriddedSeries& series, const NormalizationParams& p);
GriddedSeries denormalize(const GriddedSeries& series, const NormalizationParams& p);

struct Box {
  double lon_lo, lon_hi, lat_lo, lat_hi;
};

std::vector<double> region_mean(const GriddedSeries& series, std::string_view variable,
                                const Box& box);

// Dataset container: manifest.json plus one little-endian f64 file per
// variable in [time, lat, lon] order. Each block's SHA-256 is recorded and
// checked on load.
struct DatasetMeta {
  std::optional<NormalizationParams> normalization;
  nlohmann::json extra = nlohmann::json::object();
};

void write_dataset(const std::filesystem::path& dir, const GriddedSeries& series,
                   const DatasetMeta& meta = {});
GriddedSeries read_dataset(const std::filesystem::path& dir, DatasetMeta* meta = nullptr);

void write_series_csv(const std::filesystem::path& file, const std::vector<YearMonth>& time,
                      std::span<const double> values);

// Shared binary helpers.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);
std::vector<unsigned char> to_le_bytes(std::span<const double> values);
std::vector<double> from_le_bytes(std::span<const unsigned char> bytes);
void write_file(const std::filesystem::path& file, std::span<const unsigned char> bytes);
std::vector<unsigned char> read_file(const std::filesystem::path& file);

nlohmann::json to_json(const Grid& g);
Grid grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormalizationParams& p);
NormalizationParams normalization_from_json(const nlohmann::json& j);

}  // namespace ensobridge::fieldkit

namespace ensobridge::fieldkit {

// Generic artifact: manifest.json plus named raw f64 blocks. The manifest
// records each block's SHA-256 and a content hash over the whole artifact;
// both are verified on read.
using Blocks = std::vector<std::pair<std::string, std::vector<double>>>;

std::string write_block_artifact(const std::filesystem::path& dir, nlohmann::json manifest,
                                 const Blocks& blocks);
nlohmann::json read_block_artifact(const std::filesystem::path& dir, Blocks& blocks);
const std::vector<double>& find_block(const Blocks& blocks, const std::string& name);

}  // namespace ensobridge::fieldkit
