#include "ensobridge/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ensobridge/diagnostics.hpp"
#include "ensobridge/fieldkit.hpp"
#include "ensobridge/latentcodec.hpp"

namespace ensobridge::pipeline {

using nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using fieldkit::GriddedSeries;

// ------------------------------------------------------------ config --
namespace {

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }
std::string fmt(assim::InnovationTaper v) { return assim::to_string(v); }

template <class T>
T parse(const std::string& key, const std::string& s);

template <>
double parse<double>(const std::string& key, const std::string& s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}
template <>
int parse<int>(const std::string& key, const std::string& s) {
  int v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return v;
}
template <>
std::uint64_t parse<std::uint64_t>(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  return v;
}
template <>
bool parse<bool>(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}
template <>
assim::InnovationTaper parse<assim::InnovationTaper>(const std::string& key, const std::string& s) {
  try {
    return assim::innovation_taper_from_string(s);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}
template <>
std::string parse<std::string>(const std::string&, const std::string& s) {
  return s;
}

struct Option {
  std::string key, help;
  std::function<std::string(RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  bool experiment = true;  // part of the provenance fragment
};

template <class F>
Option option(std::string key, std::string help, F ref, bool experiment = true) {
  using T = std::remove_reference_t<decltype(ref(std::declval<RunConfig&>()))>;
  return {key, std::move(help), [ref](RunConfig& c) { return fmt(ref(c)); },
          [ref, key](RunConfig& c, const std::string& s) { ref(c) = parse<T>(key, s); }, experiment};
}

const std::vector<Option>& schema() {
  static const std::vector<Option> opts = {
      option("run.seed", "base seed; every stage seed derives from it", [](RunConfig& c) -> auto& { return c.seed; }),
      option("run.out", "artifact root directory", [](RunConfig& c) -> auto& { return c.out; }, false),
      option("run.threads", "worker threads", [](RunConfig& c) -> auto& { return c.threads; }, false),
      option("grid.lon_min", "western edge, degrees east", [](RunConfig& c) -> auto& { return c.grid.lon_min; }),
      option("grid.lon_max", "eastern edge, degrees east", [](RunConfig& c) -> auto& { return c.grid.lon_max; }),
      option("grid.lat_min", "southern edge, degrees", [](RunConfig& c) -> auto& { return c.grid.lat_min; }),
      option("grid.lat_max", "northern edge, degrees", [](RunConfig& c) -> auto& { return c.grid.lat_max; }),
      option("grid.resolution", "cell size, degrees", [](RunConfig& c) -> auto& { return c.grid.resolution; }),
      option("generate.model", "pseudo-observation model: cf23 or cfy22", [](RunConfig& c) -> auto& { return c.generate.model; }),
      option("generate.om_years", "length of the biased operational-model dataset", [](RunConfig& c) -> auto& { return c.generate.om_years; }),
      option("generate.rea_years", "length of the reference dataset and pseudo-obs stream", [](RunConfig& c) -> auto& { return c.generate.rea_years; }),
      option("generate.spinup_years", "discarded spin-up per simulation", [](RunConfig& c) -> auto& { return c.generate.spinup_years; }),
      option("generate.om_start_year", "first year of the OM dataset", [](RunConfig& c) -> auto& { return c.generate.om_start_year; }),
      option("generate.rea_start_year", "first year of the reference dataset", [](RunConfig& c) -> auto& { return c.generate.rea_start_year; }),
      option("generate.calibration_years", "run length for c2 centering", [](RunConfig& c) -> auto& { return c.generate.calibration_years; }),
      option("generate.calibration_iterations", "c2 fixed-point iterations", [](RunConfig& c) -> auto& { return c.generate.calibration_iterations; }),
      option("generate.eta1_bias", "OM scaling of eta1 (thermocline feedback)", [](RunConfig& c) -> auto& { return c.generate.eta1_bias; }),
      option("generate.eta2_bias", "OM scaling of eta2 (zonal advective feedback)", [](RunConfig& c) -> auto& { return c.generate.eta2_bias; }),
      option("generate.noise_level", "twin noise as a fraction of each variable's std", [](RunConfig& c) -> auto& { return c.generate.noise_level; }),
      option("generate.noise_length", "twin noise smoothing radius in cells", [](RunConfig& c) -> auto& { return c.generate.noise_length; }),
      option("generate.obs_variables", "CF23 observables, comma separated (SST, H)", [](RunConfig& c) -> auto& { return c.generate.obs_variables; }),
      option("generate.obs_stride", "observe every k-th CF23 node", [](RunConfig& c) -> auto& { return c.generate.obs_stride; }),
      option("codec.kind", "pod or nonlinear", [](RunConfig& c) -> auto& { return c.codec.kind; }),
      option("codec.energy", "POD energy threshold for the latent size", [](RunConfig& c) -> auto& { return c.codec.energy; }),
      option("codec.max_latent", "upper bound on the latent size", [](RunConfig& c) -> auto& { return c.codec.max_latent; }),
      option("codec.latent", "explicit latent size (0 = by energy)", [](RunConfig& c) -> auto& { return c.codec.latent; }),
      option("codec.lambda", "correlation weight: auto or a number", [](RunConfig& c) -> auto& { return c.codec.lambda; }),
      option("codec.lambda_ratio", "auto target for lambda|L_corr| / L_recon", [](RunConfig& c) -> auto& { return c.codec.lambda_ratio; }),
      option("codec.encoder_hidden", "nonlinear encoder hidden widths", [](RunConfig& c) -> auto& { return c.codec.encoder_hidden; }),
      option("codec.decoder_hidden", "nonlinear decoder hidden widths", [](RunConfig& c) -> auto& { return c.codec.decoder_hidden; }),
      option("codec.epochs", "nonlinear codec epochs", [](RunConfig& c) -> auto& { return c.codec.epochs; }),
      option("codec.batch", "nonlinear codec batch size", [](RunConfig& c) -> auto& { return c.codec.batch; }),
      option("codec.learning_rate", "momentum GD step", [](RunConfig& c) -> auto& { return c.codec.learning_rate; }),
      option("codec.momentum", "momentum coefficient", [](RunConfig& c) -> auto& { return c.codec.momentum; }),
      option("surrogate.context", "months of context", [](RunConfig& c) -> auto& { return c.surrogate.context; }),
      option("surrogate.hidden", "LSTM width (0 = augmented size)", [](RunConfig& c) -> auto& { return c.surrogate.hidden; }),
      option("surrogate.layers", "LSTM layers", [](RunConfig& c) -> auto& { return c.surrogate.layers; }),
      option("surrogate.batch", "mini-batch size", [](RunConfig& c) -> auto& { return c.surrogate.batch_size; }),
      option("surrogate.learning_rate", "Adam step", [](RunConfig& c) -> auto& { return c.surrogate.learning_rate; }),
      option("surrogate.max_epochs", "epoch limit", [](RunConfig& c) -> auto& { return c.surrogate.max_epochs; }),
      option("surrogate.patience", "early-stopping patience", [](RunConfig& c) -> auto& { return c.surrogate.patience; }),
      option("surrogate.val_fraction", "chronologically final hold-out", [](RunConfig& c) -> auto& { return c.surrogate.val_fraction; }),
      option("curriculum.p0", "initial reanalysis probability", [](RunConfig& c) -> auto& { return c.curriculum.p0; }),
      option("curriculum.p_max", "final reanalysis probability", [](RunConfig& c) -> auto& { return c.curriculum.p_max; }),
      option("curriculum.e_f", "epochs of the linear ramp", [](RunConfig& c) -> auto& { return c.curriculum.e_f; }),
      option("assim.enabled", "false runs the free surrogate", [](RunConfig& c) -> auto& { return c.assim.enabled; }),
      option("assim.members", "ensemble size", [](RunConfig& c) -> auto& { return c.assim.members; }),
      option("assim.alpha", "multiplicative inflation", [](RunConfig& c) -> auto& { return c.assim.alpha; }),
      option("assim.radius", "Gaspari-Cohn radius in block-normalized units", [](RunConfig& c) -> auto& { return c.assim.localization_radius; }),
      option("assim.gain_cap", "spectral-norm cap on the gain", [](RunConfig& c) -> auto& { return c.assim.gain_cap; }),
      option("assim.cond_threshold", "condition number that triggers the nugget", [](RunConfig& c) -> auto& { return c.assim.cond_threshold; }),
      option("assim.svd_rel_cutoff", "discard singular values below this fraction of the largest", [](RunConfig& c) -> auto& { return c.assim.svd_rel_cutoff; }),
      option("assim.r_fraction", "R as a fraction of mean squared observation", [](RunConfig& c) -> auto& { return c.assim.r_fraction; }),
      option("assim.innovation_taper", "taper of H P H^T: none, obs or split", [](RunConfig& c) -> auto& { return c.assim.innovation_taper; }),
      option("assim.perturb_obs", "perturb observations per member", [](RunConfig& c) -> auto& { return c.assim.perturb_obs; }),
      option("scenario.regime", "free, 0, 1 or all", [](RunConfig& c) -> auto& { return c.scenario.regime; }),
      option("scenario.years", "length of each scenario pseudo-obs run", [](RunConfig& c) -> auto& { return c.scenario.years; }),
  };
  return opts;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) out.push_back(parse<int>(key, item));
  return out;
}

}  // namespace

void set_option(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& o : schema())
    if (o.key == key) {
      o.set(cfg, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig load_config(const fs::path& file, RunConfig base) {
  if (!fs::exists(file)) throw ConfigError("config file not found: " + file.string());
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(file.string(), pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  for (const auto& [section, body] : pt) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must live in a [section]");
    for (const auto& [name, value] : body) set_option(base, section + "." + name, value.get_value<std::string>());
  }
  base.validate();
  return base;
}

std::string format_config(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  std::ostringstream os;
  std::string section;
  for (const auto& o : schema()) {
    const auto dot = o.key.find('.');
    const auto sec = o.key.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    os << "; " << o.help << '\n' << o.key.substr(dot + 1) << " = " << o.get(cfg) << '\n';
  }
  return os.str();
}

namespace {

json config_fragment(const RunConfig& cfg_in, bool experiment_only) {
  RunConfig cfg = cfg_in;
  json j = json::object();
  for (const auto& o : schema()) {
    if (experiment_only && !o.experiment) continue;
    const auto dot = o.key.find('.');
    j[o.key.substr(0, dot)][o.key.substr(dot + 1)] = o.get(cfg);
  }
  return j;
}

}  // namespace

json config_json(const RunConfig& cfg) { return config_fragment(cfg, false); }

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("run.threads must be >= 1");
  if (out.empty()) throw ConfigError("run.out must not be empty");
  if (!(grid.resolution > 0) || !(grid.lon_max > grid.lon_min) || !(grid.lat_max > grid.lat_min))
    throw ConfigError("grid: ranges must be non-degenerate and resolution > 0");
  if (generate.model != "cf23" && generate.model != "cfy22") throw ConfigError("generate.model must be cf23 or cfy22");
  if (!(generate.om_years >= 2) || !(generate.rea_years >= 2)) throw ConfigError("generate.om_years and rea_years must be >= 2");
  if (generate.spinup_years < 0 || !(generate.calibration_years > 0) || generate.calibration_iterations < 0)
    throw ConfigError("generate: spin-up >= 0, calibration years > 0 and iterations >= 0 required");
  if (!(generate.eta1_bias > 0) || !(generate.eta2_bias > 0)) throw ConfigError("generate: bias scalings must be > 0");
  if (generate.noise_level < 0 || !(generate.noise_length >= 0)) throw ConfigError("generate: noise settings must be >= 0");
  if (generate.obs_stride < 1) throw ConfigError("generate.obs_stride must be >= 1");
  const auto vars = split_list(generate.obs_variables);
  if (vars.empty()) throw ConfigError("generate.obs_variables is empty");
  for (const auto& v : vars)
    if (v != "SST" && v != "H") throw ConfigError("generate.obs_variables: '" + v + "' is not SST or H");
  if (codec.kind != "pod" && codec.kind != "nonlinear") throw ConfigError("codec.kind must be pod or nonlinear");
  if (!(codec.energy > 0 && codec.energy <= 1)) throw ConfigError("codec.energy must be in (0, 1]");
  if (codec.max_latent < 1 || codec.latent < 0) throw ConfigError("codec.max_latent >= 1 and codec.latent >= 0 required");
  if (codec.lambda != "auto") {
    const double l = parse<double>("codec.lambda", codec.lambda);
    if (l < 0) throw ConfigError("codec.lambda must be >= 0 or auto");
  }
  int_list("codec.encoder_hidden", codec.encoder_hidden);
  int_list("codec.decoder_hidden", codec.decoder_hidden);
  surrogate.validate();
  curriculum.validate();
  assim.validate();
  if (scenario.regime != "free" && scenario.regime != "0" && scenario.regime != "1" && scenario.regime != "all")
    throw ConfigError("scenario.regime must be free, 0, 1 or all");
  if (!(scenario.years >= 2)) throw ConfigError("scenario.years must be >= 2");
}

std::uint64_t RunConfig::stage_seed(const std::string& stage) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : stage) h = (h ^ ch) * 1099511628211ULL;
  return hash_keys(seed, h);
}

// ------------------------------------------------------------ helpers --
namespace {

std::string file_hash(const fs::path& p) { return fieldkit::sha256_hex(fieldkit::read_file(p)); }

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  fieldkit::write_file(file, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

idealized::TwinConfig twin_config(const RunConfig& cfg) {
  auto t = idealized::TwinConfig::defaults();
  t.noise_level = cfg.generate.noise_level;
  t.noise_length = cfg.generate.noise_length;
  return t;
}

const idealized::MeridionalProfile& profile_for(const idealized::TwinConfig& t, const std::string& var) {
  for (const auto& p : t.profiles)
    if (p.variable == var) return p;
  throw DataError("twin has no variable '" + var + "'");
}

idealized::PseudoObsSpec obs_spec(const RunConfig& cfg, int n_x) {
  if (cfg.generate.model == "cfy22") return idealized::PseudoObsSpec::cfy22_default();
  idealized::PseudoObsSpec s;
  s.variables = split_list(cfg.generate.obs_variables);
  for (int j = 0; j < n_x; j += cfg.generate.obs_stride) s.positions.push_back(j);
  return s;
}

json spec_json(const idealized::PseudoObsSpec& s, const std::vector<double>& lon) {
  return {{"model", s.model == idealized::ModelKind::CF23 ? "cf23" : "cfy22"},
          {"variables", s.variables},
          {"positions", s.positions},
          {"lon", lon}};
}

struct ObsInfo {
  idealized::PseudoObsSpec spec;
  std::vector<double> lon;
  GriddedSeries series;
  json extra;
  MatrixXd values;  // n_time x n_o, physical anomalies
};

ObsInfo read_obs(const fs::path& dir) {
  fieldkit::DatasetMeta meta;
  ObsInfo o;
  o.series = fieldkit::read_dataset(dir, &meta);
  o.extra = meta.extra;
  if (!meta.extra.contains("obs")) throw DataError(dir.string() + " is not an observation dataset");
  const auto& j = meta.extra.at("obs");
  o.spec.model = j.at("model") == "cfy22" ? idealized::ModelKind::CFY22 : idealized::ModelKind::CF23;
  o.spec.variables = j.at("variables").get<std::vector<std::string>>();
  o.spec.positions = j.at("positions").get<std::vector<int>>();
  o.lon = j.at("lon").get<std::vector<double>>();
  o.values = idealized::obs_from_series(o.series, o.spec).values;
  return o;
}

// Scales pseudo-obs from model units to the twin's physical units.
idealized::ObsStream to_physical(idealized::ObsStream obs, const idealized::TwinConfig& twin) {
  if (obs.variables.size() && (obs.variables[0] == "T_C" || obs.variables[0] == "T_E")) return obs;
  const auto nb = static_cast<Eigen::Index>(obs.block_length());
  for (std::size_t v = 0; v < obs.variables.size(); ++v)
    obs.values.middleCols(static_cast<Eigen::Index>(v) * nb, nb) *= profile_for(twin, obs.variables[v]).scale;
  return obs;
}

std::vector<std::string> obs_units(const idealized::ObsStream& obs, const idealized::TwinConfig& twin) {
  std::vector<std::string> u;
  for (const auto& v : obs.variables) u.push_back(v == "T_C" || v == "T_E" ? "degC" : profile_for(twin, v).units);
  return u;
}

std::string write_obs(const fs::path& dir, const idealized::ObsStream& phys, const idealized::PseudoObsSpec& spec,
                      const idealized::TwinConfig& twin, json extra) {
  const auto anom = idealized::obs_anomaly(phys);
  extra["obs"] = spec_json(spec, anom.lon);
  fieldkit::DatasetMeta meta;
  meta.extra = std::move(extra);
  fieldkit::write_dataset(dir, idealized::obs_to_series(anom, obs_units(anom, twin)), meta);
  return file_hash(dir / "manifest.json");
}

GriddedSeries anomaly(const GriddedSeries& raw) { return fieldkit::compute_anomaly(raw).first; }

// Per-channel scale: 1.2 max |y| over each variable block of both sets.
VectorXd obs_scale(const MatrixXd& a, const MatrixXd& b, std::size_t n_vars) {
  const Eigen::Index n_o = a.cols();
  const Eigen::Index nb = n_o / static_cast<Eigen::Index>(n_vars);
  VectorXd s(n_o);
  for (std::size_t v = 0; v < n_vars; ++v) {
    const auto c0 = static_cast<Eigen::Index>(v) * nb;
    double m = a.middleCols(c0, nb).cwiseAbs().maxCoeff();
    if (b.size()) m = std::max(m, b.middleCols(c0, nb).cwiseAbs().maxCoeff());
    s.segment(c0, nb).setConstant(m > 0 ? 1.2 * m : 1.0);
  }
  return s;
}

struct TrainingSet {
  GriddedSeries om, rea;
  fieldkit::NormalizationParams norm;
  ObsInfo obs;
  MatrixXd X_om, X_rea, Y_om, Y_rea;  // columns are months; Y normalized
  VectorXd scale;
};

MatrixXd normalized_obs(const MatrixXd& phys, const VectorXd& scale) {
  return (phys.array().rowwise() / scale.transpose().array()).matrix().transpose();
}

TrainingSet load_training(const ArtifactStore& store, const VectorXd* scale = nullptr) {
  TrainingSet s;
  fieldkit::DatasetMeta meta;
  s.om = fieldkit::read_dataset(store.om(), &meta);
  if (!meta.normalization) throw DataError(store.om().string() + " carries no normalization");
  s.norm = *meta.normalization;
  s.rea = fieldkit::read_dataset(store.rea());
  s.obs = read_obs(store.obs());
  s.X_om = latent::series_matrix(fieldkit::normalize(s.om, s.norm));
  s.X_rea = latent::series_matrix(fieldkit::normalize(s.rea, s.norm));
  const MatrixXd y_om = idealized::observe_fields(s.om, s.obs.spec, s.obs.lon);
  const MatrixXd y_rea = idealized::observe_fields(s.rea, s.obs.spec, s.obs.lon);
  s.scale = scale ? *scale : obs_scale(y_om, y_rea, s.obs.spec.variables.size());
  s.Y_om = normalized_obs(y_om, s.scale);
  s.Y_rea = normalized_obs(y_rea, s.scale);
  return s;
}

struct CodecBundle {
  latent::Codec codec;
  VectorXd scale;
  std::string hash;
};

CodecBundle load_codec_bundle(const ArtifactStore& store) {
  CodecBundle b;
  json m;
  b.codec = latent::load_codec(store.codec(), &m);
  const auto sc = m.at("extra").at("obs_scale").get<std::vector<double>>();
  b.scale = Eigen::Map<const VectorXd>(sc.data(), static_cast<Eigen::Index>(sc.size()));
  b.hash = m.at("content_hash");
  return b;
}

MatrixXd augmented(const latent::Codec& c, const MatrixXd& X, const MatrixXd& Y) {
  MatrixXd A(c.n_l + c.n_o, X.cols());
  A.topRows(c.n_l) = c.encode(X);
  A.bottomRows(c.n_o) = Y;
  return A;
}

GriddedSeries fields_from_matrix(const MatrixXd& X, const GriddedSeries& like, std::vector<fieldkit::YearMonth> time) {
  GriddedSeries s(like.grid(), like.variables(), like.units(), std::move(time));
  const auto D = static_cast<Eigen::Index>(s.snapshot_size());
  if (X.rows() != D) throw DataError("decoded field size does not match the grid");
  for (std::size_t t = 0; t < s.n_time(); ++t) {
    auto snap = s.snapshot(t);
    Eigen::Map<VectorXd>(snap.data(), D) = X.col(static_cast<Eigen::Index>(t));
  }
  return s;
}

std::vector<double> centered(std::vector<double> x) {
  const double m = diagnostics::mean(x);
  for (auto& v : x) v -= m;
  return x;
}

void write_csv_table(const fs::path& file, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& cols) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << '\n';
  const std::size_t n = cols.empty() ? 0 : cols[0].size();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k][r];
    os << '\n';
  }
  write_text(file, os.str());
}

}  // namespace

// ----------------------------------------------------------- generate --
GenerateResult cmd_generate(const RunConfig& cfg) {
  cfg.validate();
  set_thread_count(cfg.threads);
  const ArtifactStore store{cfg.out};
  const auto& g = cfg.generate;
  const json fragment = config_fragment(cfg, true);
  auto ref = idealized::calibrate_c2(idealized::Cf23Params::defaults(), g.calibration_years,
                                     cfg.stage_seed("calibrate-reference"), g.calibration_iterations);
  auto biased = idealized::calibrate_c2(idealized::apply_bias(idealized::Cf23Params::defaults(), {g.eta1_bias, g.eta2_bias}),
                                        g.calibration_years, cfg.stage_seed("calibrate-om"), g.calibration_iterations);
  idealized::SimulationOptions om_opt;
  om_opt.years = g.om_years;
  om_opt.seed = cfg.stage_seed("om");
  om_opt.start = {g.om_start_year, 1};
  om_opt.spinup_years = g.spinup_years;
  idealized::SimulationOptions rea_opt = om_opt;
  rea_opt.years = g.rea_years;
  rea_opt.seed = cfg.stage_seed("reference");
  rea_opt.start = {g.rea_start_year, 1};

  const auto traj_om = idealized::simulate_cf23(biased, om_opt);
  const auto traj_rea = idealized::simulate_cf23(ref, rea_opt);
  const auto grid = fieldkit::build_grid(cfg.grid.lon_min, cfg.grid.lon_max, cfg.grid.lat_min, cfg.grid.lat_max,
                                         cfg.grid.resolution);
  const auto twin = twin_config(cfg);
  const auto om = anomaly(idealized::twin_generate(traj_om, twin, grid, cfg.stage_seed("om-twin")));
  const auto rea = anomaly(idealized::twin_generate(traj_rea, twin, grid, cfg.stage_seed("reference-twin")));
  auto norm = fieldkit::fit_normalization(om);
  const auto norm_rea = fieldkit::fit_normalization(rea);
  for (std::size_t v = 0; v < norm.scale.size(); ++v) norm.scale[v] = std::max(norm.scale[v], norm_rea.scale[v]);

  GenerateResult r;
  fieldkit::DatasetMeta meta;
  meta.normalization = norm;
  meta.extra = {{"role", "om"}, {"config", fragment}, {"cf23", idealized::to_json(biased)}};
  fieldkit::write_dataset(store.om(), om, meta);
  r.om_hash = file_hash(store.om() / "manifest.json");
  meta.extra = {{"role", "reference"}, {"config", fragment}, {"cf23", idealized::to_json(ref)}};
  fieldkit::write_dataset(store.rea(), rea, meta);
  r.rea_hash = file_hash(store.rea() / "manifest.json");

  const json obs_extra = {{"role", "pseudo-obs"}, {"config", fragment}, {"cf23_reference", idealized::to_json(ref)}};
  if (g.model == "cfy22") {
    idealized::SimulationOptions o = rea_opt;
    o.seed = cfg.stage_seed("cfy22");
    const auto traj = idealized::simulate_cfy22(idealized::Cfy22Params{}, o);
    const auto spec = obs_spec(cfg, 0);
    r.obs_hash = write_obs(store.obs(), idealized::generate_pseudo_obs(traj, spec), spec, twin, obs_extra);
  } else {
    const auto spec = obs_spec(cfg, ref.n_x);
    r.obs_hash = write_obs(store.obs(), to_physical(idealized::generate_pseudo_obs(traj_rea, spec), twin), spec,
                           twin, obs_extra);
  }
  return r;
}

// -------------------------------------------------------- train-codec --
json cmd_train_codec(const RunConfig& cfg) {
  cfg.validate();
  set_thread_count(cfg.threads);
  const ArtifactStore store{cfg.out};
  const auto s = load_training(store);
  const auto& cc = cfg.codec;
  MatrixXd X(s.X_om.rows(), s.X_om.cols() + s.X_rea.cols());
  X << s.X_om, s.X_rea;
  latent::Codec codec;
  if (cc.kind == "pod") {
    codec = latent::pod_fit(X, cc.energy, cc.latent > 0 ? cc.latent : cc.max_latent);
    if (cc.latent > 0 && codec.n_l != cc.latent)
      codec = latent::pod_fit(X, 1.0, cc.latent);
  } else {
    int n_l = cc.latent;
    if (n_l == 0) n_l = latent::pod_fit(X, cc.energy, cc.max_latent).n_l;
    latent::CodecArch arch;
    arch.encoder_hidden = int_list("codec.encoder_hidden", cc.encoder_hidden);
    arch.decoder_hidden = int_list("codec.decoder_hidden", cc.decoder_hidden);
    latent::CodecLossConfig lc;
    lc.auto_lambda = cc.lambda == "auto";
    lc.lambda = lc.auto_lambda ? 0.0 : parse<double>("codec.lambda", cc.lambda);
    lc.lambda_ratio = cc.lambda_ratio;
    lc.batch_size = cc.batch;
    lc.learning_rate = cc.learning_rate;
    lc.momentum = cc.momentum;
    lc.epochs = cc.epochs;
    codec = latent::train_codec({s.X_om, s.Y_om, s.X_rea, s.Y_rea}, n_l, arch, lc, cfg.curriculum,
                                cfg.stage_seed("codec"));
  }
  codec.n_o = static_cast<int>(s.Y_om.rows());
  codec.channels = static_cast<int>(s.om.n_vars());
  codec.height = s.om.grid().n_lat;
  codec.width = s.om.grid().n_lon;
  codec.normalization = s.norm;

  // Scores on the OM data; a POD codec gets a single history row.
  const MatrixXd Z = codec.encode(s.X_om);
  MatrixXd A(codec.n_l + codec.n_o, Z.cols());
  A << Z, s.Y_om;
  const auto parts = latent::composite_loss(s.X_om, codec.decode(A), Z, s.Y_om, 0.0);
  const double mean_abs_c = latent::correlation_matrix(Z, s.Y_om).cwiseAbs().mean();
  if (codec.kind == latent::CodecKind::POD)
    codec.history = json::array({{{"epoch", 0}, {"L", parts.recon}, {"L_recon", parts.recon}, {"L_corr", parts.corr}}});

  const std::vector<double> scale(s.scale.data(), s.scale.data() + s.scale.size());
  latent::save_codec(store.codec(), codec,
                     {{"obs_scale", scale}, {"config", config_fragment(cfg, true)}, {"obs", s.obs.extra.at("obs")}});
  std::ostringstream os;
  os.precision(17);
  os << "epoch,L,L_recon,L_corr\n";
  for (const auto& h : codec.history)
    if (!h.value("rejected", false))
      os << h.at("epoch").get<int>() << ',' << h.at("L").get<double>() << ',' << h.at("L_recon").get<double>() << ','
         << h.at("L_corr").get<double>() << '\n';
  write_text(store.codec() / "history.csv", os.str());
  json m;
  {
    const auto raw = fieldkit::read_file(store.codec() / "manifest.json");
    m = json::parse(raw.begin(), raw.end());
  }
  return {{"kind", cc.kind}, {"n_l", codec.n_l}, {"n_o", codec.n_o}, {"recon_mse", parts.recon},
          {"mean_abs_corr", mean_abs_c}, {"content_hash", m.at("content_hash")}};
}

// ---------------------------------------------------- train-surrogate --
json cmd_train_surrogate(const RunConfig& cfg) {
  cfg.validate();
  set_thread_count(cfg.threads);
  const ArtifactStore store{cfg.out};
  const auto cb = load_codec_bundle(store);
  const auto s = load_training(store, &cb.scale);
  if (s.Y_om.rows() != cb.codec.n_o) throw DataError("codec and observation stream disagree on n_o");
  surrogate::SequenceSet om{{augmented(cb.codec, s.X_om, s.Y_om)}};
  surrogate::SequenceSet rea{{augmented(cb.codec, s.X_rea, s.Y_rea)}};
  const auto res = surrogate::train_surrogate(om, rea, cfg.curriculum, cfg.surrogate, cfg.stage_seed("surrogate"));
  const json extra = {{"n_l", cb.codec.n_l}, {"n_o", cb.codec.n_o}, {"codec_hash", cb.hash},
                      {"best_epoch", res.best_epoch}, {"history", res.history},
                      {"config", config_fragment(cfg, true)}};
  surrogate::save_surrogate(store.surrogate(), res.weights, extra);
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train,val,p_rea\n";
  for (const auto& h : res.history)
    if (!h.value("rejected", false))
      os << h.at("epoch").get<int>() << ',' << h.at("train").get<double>() << ',' << h.at("val").get<double>() << ','
         << h.at("p_rea").get<double>() << '\n';
  write_text(store.surrogate() / "history.csv", os.str());

  // Held-out one-step skill against persistence.
  const auto [tr, va] = surrogate::split_windows(om, cfg.surrogate.context, cfg.surrogate.val_fraction);
  const double mse = surrogate::lstm_loss(res.weights, va);
  const double persist = (va.context.back() - va.target).squaredNorm() / static_cast<double>(va.target.size());
  json m;
  {
    const auto raw = fieldkit::read_file(store.surrogate() / "manifest.json");
    m = json::parse(raw.begin(), raw.end());
  }
  return {{"epochs", res.history.size()}, {"best_epoch", res.best_epoch}, {"val_mse", mse},
          {"persistence_mse", persist}, {"dim", res.weights.dim}, {"content_hash", m.at("content_hash")}};
}

// --------------------------------------------------------- assimilate --
fs::path cmd_assimilate(const RunConfig& cfg, const std::string& name, const std::optional<fs::path>& obs_dir) {
  cfg.validate();
  set_thread_count(cfg.threads);
  const ArtifactStore store{cfg.out};
  const auto cb = load_codec_bundle(store);
  const auto& codec = cb.codec;
  json smeta;
  const auto w = surrogate::load_surrogate(store.surrogate(), &smeta);
  if (w.dim != codec.n_l + codec.n_o) throw DataError("surrogate and codec disagree on the augmented size");
  if (smeta.at("extra").value("codec_hash", "") != cb.hash)
    throw DataError("surrogate was trained against a different codec; rerun train-surrogate");
  const auto obs = read_obs(obs_dir.value_or(store.obs()));
  if (obs.values.cols() != codec.n_o) throw DataError("observation stream width differs from the codec's n_o");
  const MatrixXd Y = normalized_obs(obs.values, cb.scale).transpose();  // n_time x n_o
  const int ctx = cfg.surrogate.context;
  const Eigen::Index T = Y.rows();
  if (T <= ctx) throw DataError("observation stream is shorter than the surrogate context");

  // Climatological initial ensemble: each member starts from consecutive
  // OM months at a keyed offset.
  fieldkit::DatasetMeta om_meta;
  const auto om = fieldkit::read_dataset(store.om(), &om_meta);
  const MatrixXd y_om = normalized_obs(idealized::observe_fields(om, obs.spec, obs.lon), cb.scale);
  const MatrixXd A_om = augmented(codec, latent::series_matrix(fieldkit::normalize(om, codec.normalization)), y_om);
  const int N = cfg.assim.members;
  const auto seed = cfg.stage_seed("assimilate");
  std::vector<MatrixXd> context(static_cast<std::size_t>(ctx), MatrixXd(w.dim, N));
  for (int i = 0; i < N; ++i) {
    const auto start = static_cast<Eigen::Index>(hash_keys(seed, 0x1417, static_cast<std::uint64_t>(i)) %
                                                 static_cast<std::uint64_t>(A_om.cols() - ctx));
    for (int k = 0; k < ctx; ++k) context[static_cast<std::size_t>(k)].col(i) = A_om.col(start + k);
  }

  assim::ObservationModel model;
  model.n_o = codec.n_o;
  model.R = assim::observation_error(Y, cfg.assim.r_fraction, cfg.assim.r_floor);
  const int nb = static_cast<int>(obs.spec.positions.size());
  std::vector<int> pos, len;
  for (std::size_t v = 0; v < obs.spec.variables.size(); ++v)
    for (int b = 0; b < nb; ++b) {
      pos.push_back(b);
      len.push_back(nb);
    }
  model.L = assim::build_localization(codec.n_l, pos, len, cfg.assim.localization_radius);
  assim::AssimConfig ac = cfg.assim;
  ac.seed = seed;
  ac.members = N;
  const auto res = assim::run_cycle(w, context, Y.bottomRows(T - ctx), model, ac, {true});

  // Decode: mean field from the mean analysis, spread from decoded members.
  const std::vector<fieldkit::YearMonth> time(obs.series.time().begin() + ctx, obs.series.time().end());
  const auto cycles = static_cast<Eigen::Index>(time.size());
  const MatrixXd mean_fields = codec.decode(res.mean);
  MatrixXd spread_fields(mean_fields.rows(), cycles);
  parallel_for(static_cast<std::size_t>(cycles), [&](std::size_t t) {
    const MatrixXd f = codec.decode(res.members[t]);
    const VectorXd m = f.rowwise().mean();
    spread_fields.col(static_cast<Eigen::Index>(t)) =
        ((f.colwise() - m).rowwise().squaredNorm() / static_cast<double>(N - 1)).cwiseSqrt();
  });
  const auto mean_series = fieldkit::denormalize(fields_from_matrix(mean_fields, om, time), codec.normalization);
  auto spread_series = fields_from_matrix(spread_fields, om, time);
  for (std::size_t t = 0; t < spread_series.n_time(); ++t)
    for (std::size_t v = 0; v < spread_series.n_vars(); ++v)
      for (auto& x : spread_series.field(t, v)) x *= codec.normalization.scale[v];

  const fs::path dir = store.run(name);
  fs::create_directories(dir);
  const json fragment = config_fragment(cfg, true);
  fieldkit::DatasetMeta meta;
  meta.extra = {{"role", "decoded-mean"}, {"run", name}};
  fieldkit::write_dataset(dir / "mean", mean_series, meta);
  meta.extra = {{"role", "decoded-spread"}, {"run", name}};
  fieldkit::write_dataset(dir / "spread", spread_series, meta);
  fieldkit::write_block_artifact(
      dir / "analysis",
      {{"format", "ensobridge-analysis"}, {"dim", w.dim}, {"cycles", cycles}, {"storage", "column-major"}},
      {{"mean", std::vector<double>(res.mean.data(), res.mean.data() + res.mean.size())},
       {"spread", std::vector<double>(res.spread.data(), res.spread.data() + res.spread.size())}});
  write_text(dir / "cycle_log.csv", assim::cycle_log_csv(res.log));

  const auto n3 = diagnostics::nino_index(mean_series, diagnostics::NinoRegionSet::nino3);
  const auto n4 = diagnostics::nino_index(mean_series, diagnostics::NinoRegionSet::nino4);
  fieldkit::write_series_csv(dir / "nino3.csv", time, n3);
  fieldkit::write_series_csv(dir / "nino4.csv", time, n4);
  json stats;
  for (const auto& [label, series] : {std::pair{"nino3", &n3}, std::pair{"nino4", &n4}}) {
    const auto c = centered(*series);
    stats[label] = diagnostics::to_json(diagnostics::stats_report(time, *series, diagnostics::pdf_grid(c, {}, 512)));
  }
  write_text(dir / "stats.json", stats.dump(1));
  json run = {{"name", name},
              {"cycles", cycles},
              {"members", N},
              {"assimilation", cfg.assim.enabled},
              {"codec_hash", cb.hash},
              {"surrogate_hash", smeta.at("content_hash")},
              {"obs_hash", file_hash(obs_dir.value_or(store.obs()) / "manifest.json")},
              {"mean_hash", file_hash(dir / "mean" / "manifest.json")},
              {"config", fragment}};
  write_text(dir / "run.json", run.dump(1));
  return dir;
}

// ----------------------------------------------------------- scenario --
json cmd_scenario(const RunConfig& cfg, const std::string& regime) {
  cfg.validate();
  set_thread_count(cfg.threads);
  const ArtifactStore store{cfg.out};
  std::vector<std::string> regimes;
  if (regime == "all") regimes = {"0", "free", "1"};
  else if (regime == "0" || regime == "1" || regime == "free") regimes = {regime};
  else throw ConfigError("scenario regime must be free, 0, 1 or all");

  fieldkit::DatasetMeta meta;
  fieldkit::read_dataset(store.obs(), &meta);
  const auto twin = twin_config(cfg);
  json summary = json::object();
  for (const auto& r : regimes) {
    idealized::SimulationOptions o;
    o.years = cfg.scenario.years;
    o.seed = cfg.stage_seed("scenario");
    o.start = {cfg.generate.rea_start_year, 1};
    o.spinup_years = cfg.generate.spinup_years;
    if (r != "free") o.fixed_I = r == "0" ? 0.0 : 1.0;
    const fs::path obs_dir = store.datasets() / ("obs_scenario_" + r);
    const json extra = {{"role", "scenario-pseudo-obs"}, {"regime", r}, {"config", config_fragment(cfg, true)}};
    if (cfg.generate.model == "cfy22") {
      const auto traj = idealized::simulate_cfy22(idealized::Cfy22Params{}, o);
      const auto spec = obs_spec(cfg, 0);
      write_obs(obs_dir, idealized::generate_pseudo_obs(traj, spec), spec, twin, extra);
    } else {
      const auto ref = idealized::cf23_from_json(meta.extra.at("cf23_reference"));
      const auto traj = idealized::simulate_cf23(ref, o);
      const auto spec = obs_spec(cfg, ref.n_x);
      write_obs(obs_dir, to_physical(idealized::generate_pseudo_obs(traj, spec), twin), spec, twin, extra);
    }
    const auto dir = cmd_assimilate(cfg, "scenario_" + r, obs_dir);
    const auto fields = fieldkit::read_dataset(dir / "mean");
    json maps = json::object();
    const auto& g = fields.grid();
    std::vector<double> lat, lon;
    for (int j = 0; j < g.n_lat; ++j)
      for (int i = 0; i < g.n_lon; ++i) {
        lat.push_back(g.lat_center(j));
        lon.push_back(g.lon_center(i));
      }
    std::vector<std::vector<double>> cols{lat, lon};
    std::vector<std::string> header{"lat", "lon"};
    for (const auto& v : fields.variables()) {
      const auto m = diagnostics::std_map(fields, v);
      maps[v] = m;
      cols.push_back(m);
      header.push_back(v);
    }
    write_csv_table(dir / "std_maps.csv", header, cols);
    const double s3 = diagnostics::stddev(diagnostics::nino_index(fields, diagnostics::NinoRegionSet::nino3));
    const double s4 = diagnostics::stddev(diagnostics::nino_index(fields, diagnostics::NinoRegionSet::nino4));
    const json entry = {{"nino3_std", s3}, {"nino4_std", s4}, {"ratio", s3 / s4}};
    write_text(dir / "std_maps.json", json{{"regime", r}, {"grid", fieldkit::to_json(g)}, {"std", maps}, {"summary", entry}}.dump(1));
    summary[r] = entry;
  }
  write_text(store.root / "runs" / ("scenario_summary_" + regime + ".json"), summary.dump(1));
  return summary;
}

// ----------------------------------------------------------- diagnose --
json cmd_diagnose(const fs::path& run_dir, const fs::path& reference_dir, const std::optional<fs::path>& baseline_dir,
                  const std::optional<fs::path>& out_dir) {
  const auto run = fieldkit::read_dataset(run_dir / "mean");
  const auto ref_full = fieldkit::read_dataset(reference_dir);
  if (!(run.grid() == ref_full.grid())) throw DataError("run and reference grids differ");

  // Compare over the run's months when the reference covers them.
  std::map<std::pair<int, int>, std::size_t> where;
  for (std::size_t t = 0; t < ref_full.n_time(); ++t) where[{ref_full.time()[t].year, ref_full.time()[t].month}] = t;
  bool aligned = true;
  for (const auto& ym : run.time()) aligned = aligned && where.count({ym.year, ym.month});
  GriddedSeries ref = ref_full;
  if (aligned) {
    ref = GriddedSeries(ref_full.grid(), ref_full.variables(), ref_full.units(), run.time());
    for (std::size_t t = 0; t < run.n_time(); ++t) {
      auto src = ref_full.snapshot(where[{run.time()[t].year, run.time()[t].month}]);
      std::copy(src.begin(), src.end(), ref.snapshot(t).begin());
    }
  }

  using diagnostics::NinoRegionSet;
  struct Scored {
    std::vector<double> n3, n4, profile;
    std::vector<fieldkit::YearMonth> time;
  };
  const auto& g = run.grid();
  std::vector<double> lons;
  for (int i = 0; i < g.n_lon; ++i) lons.push_back(g.lon_center(i));
  auto score = [&](const GriddedSeries& s) {
    Scored r;
    r.n3 = diagnostics::nino_index(s, NinoRegionSet::nino3);
    r.n4 = diagnostics::nino_index(s, NinoRegionSet::nino4);
    r.time = s.time();
    const MatrixXd hov = diagnostics::hovmoller(s, "SST", -2.5, 2.5);
    for (Eigen::Index i = 0; i < hov.rows(); ++i) {
      std::vector<double> row(hov.cols());
      for (Eigen::Index t = 0; t < hov.cols(); ++t) row[t] = hov(i, t);
      r.profile.push_back(diagnostics::stddev(row));
    }
    return r;
  };
  auto compare = [&](const Scored& a, const Scored& b) {
    json d;
    for (const auto& [label, x, y] : {std::tuple{"nino3_pdf_l1", &a.n3, &b.n3}, std::tuple{"nino4_pdf_l1", &a.n4, &b.n4}}) {
      const auto cx = centered(*x), cy = centered(*y);
      const auto grid = diagnostics::pdf_grid(cx, cy, 1024);
      d[label] = diagnostics::distribution_distance(diagnostics::pdf_estimate(cx, grid), diagnostics::pdf_estimate(cy, grid), grid);
    }
    double sq = 0;
    for (std::size_t i = 0; i < a.profile.size(); ++i) sq += (a.profile[i] - b.profile[i]) * (a.profile[i] - b.profile[i]);
    d["std_profile_rmse"] = std::sqrt(sq / static_cast<double>(a.profile.size()));
    return d;
  };
  auto stats = [&](const Scored& s) {
    json j;
    for (const auto& [label, x] : {std::pair{"nino3", &s.n3}, std::pair{"nino4", &s.n4}}) {
      const auto c = centered(*x);
      j[label] = diagnostics::to_json(diagnostics::stats_report(s.time, *x, diagnostics::pdf_grid(c, {}, 512)));
    }
    return j;
  };
  auto events = [&](const Scored& s, json& notices) {
    std::vector<std::string> n;
    const auto ev = diagnostics::classify_events(s.time, s.n3, s.n4, &n);
    notices = n;
    return diagnostics::to_json(ev);
  };

  const Scored sr = score(run), sf = score(ref);
  json report;
  report["format"] = "ensobridge-report";
  report["version"] = 1;
  report["run"] = {{"name", run_dir.filename().string()}, {"mean_hash", file_hash(run_dir / "mean" / "manifest.json")},
                   {"months", run.n_time()}};
  report["reference"] = {{"name", reference_dir.filename().string()},
                         {"hash", file_hash(reference_dir / "manifest.json")}, {"aligned", aligned}};
  report["distances"] = compare(sr, sf);
  json run_notices, ref_notices;
  report["events"] = {{"run", events(sr, run_notices)}, {"reference", events(sf, ref_notices)}};
  report["notices"] = {{"run", run_notices}, {"reference", ref_notices}};
  report["stats"] = {{"run", stats(sr)}, {"reference", stats(sf)}};
  report["std_profile"] = {{"lon", lons}, {"run", sr.profile}, {"reference", sf.profile}};
  std::optional<Scored> sb;
  if (baseline_dir) {
    const auto base = fieldkit::read_dataset(*baseline_dir);
    if (!(base.grid() == g)) throw DataError("baseline grid differs from the run grid");
    sb = score(base);
    const json db = compare(*sb, sf);
    report["baseline"] = {{"name", baseline_dir->filename().string()},
                          {"hash", file_hash(*baseline_dir / "manifest.json")},
                          {"distances", db}};
    report["std_profile"]["baseline"] = sb->profile;
    json imp;
    for (const auto& k : {"nino3_pdf_l1", "nino4_pdf_l1", "std_profile_rmse"}) {
      const double b = db.at(k), r = report["distances"].at(k);
      imp[k] = b > 0 ? 1.0 - r / b : 0.0;
    }
    report["improvement"] = imp;
  }

  const fs::path out = out_dir.value_or(run_dir / "report");
  fs::create_directories(out);
  write_text(out / "report.json", report.dump(1));
  fieldkit::write_series_csv(out / "nino3.csv", sr.time, sr.n3);
  fieldkit::write_series_csv(out / "nino4.csv", sr.time, sr.n4);
  std::vector<std::vector<double>> cols{lons, sr.profile, sf.profile};
  std::vector<std::string> header{"lon", "run", "reference"};
  if (sb) {
    cols.push_back(sb->profile);
    header.push_back("baseline");
  }
  write_csv_table(out / "std_profile.csv", header, cols);
  const MatrixXd hov = diagnostics::hovmoller(run, "SST", -5, 5);
  fieldkit::write_block_artifact(out / "hovmoller",
                                 {{"format", "ensobridge-hovmoller"}, {"variable", "SST"}, {"lat_band", {-5, 5}},
                                  {"rows", "lon"}, {"cols", "time"}, {"shape", {hov.rows(), hov.cols()}},
                                  {"storage", "column-major"}, {"lon", lons}},
                                 {{"sst", std::vector<double>(hov.data(), hov.data() + hov.size())}});
  return report;
}

}  // namespace ensobridge::pipeline
