#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ensobridge/fieldkit.hpp"

namespace ensobridge::idealized {

// ---------------------------------------------------------------- CFY22 --
// Six-equation conceptual model in nondimensional units: one model time unit
// is `time_unit` years and T_C, T_E are scaled by `temp_unit` internally.
// The state carries temperatures in degrees C and time in years.
struct Cfy22Params {
  double r = 0.25, alpha1 = 0.0225, alpha2 = 0.075, b0 = 2.5, mu = 0.5, gamma = 0.75;
  double sigma_adv = 0.2, C_u = 0.03;
  // c1(T_C, t) = (c1_quad (T + c1_shift)^2 + c1_base)(1 + c1_season sin(2 pi t + phase))
  double c1_quad = 15.0, c1_shift = 0.1, c1_base = 0.8, c1_season = 0.45;
  // c2(t) = c2_base (1 + c2_season sin(2 pi t + phase))
  double c2_base = 1.35, c2_season = 0.45;
  double beta_u = -0.2, beta_h = -0.4, beta_C = 0.8, beta_E = 0.8;
  double sigma_u = 0.04, sigma_h = 0.02, sigma_C = 0.04, sigma_E = 0.04;
  double d_tau = 2.0, sigma_tau0 = 0.2;
  double lambda = 1.0 / 30.0, m = 0.5, sigma_I0 = 0.18257418583505536;  // sqrt(1/30)
  double time_unit = 1.0 / 6.0, temp_unit = 7.5, phase = 0.2617993877991494;

  // Optional overrides of the default functional forms. Arguments are in
  // model units (T scaled by temp_unit); t is in years.
  std::function<double(double T_C, double t)> c1_of_TC;
  std::function<double(double t)> c2_of_t;
  std::function<double(double T_C_celsius)> sigma_tau_of_TC;
  std::function<double(double I)> sigma_I_of_I;

  double c1(double T_C, double t) const;
  double c2(double t) const;
  double sigma_tau(double T_C_celsius) const;
  double sigma_I(double I) const;

  // Throws ConfigError unless the drift linearized at the origin is damped.
  void validate() const;
  double max_real_eigenvalue() const;
};

nlohmann::json to_json(const Cfy22Params& p);
Cfy22Params cfy22_from_json(const nlohmann::json& j, Cfy22Params base = {});

struct Cfy22State {
  double u = 0, h_W = 0, T_C = 0, T_E = 0, tau = 0, I = 0.5;
  double t = 0;  // years
};

// dt in years; noise6 holds standard normals for (u, h_W, T_C, T_E, tau, I).
Cfy22State step_cfy22(const Cfy22State& s, const Cfy22Params& p, double dt,
                      std::span<const double, 6> noise6);

struct SimulationOptions {
  double years = 1;
  double dt = 1.0 / 360.0;
  std::uint64_t seed = 1;
  fieldkit::YearMonth start{1, 1};
  std::optional<double> fixed_I;
  double spinup_years = 0;
};

struct Cfy22Trajectory {
  std::vector<fieldkit::YearMonth> time;
  std::vector<double> u, h_W, T_C, T_E, tau, I;
};

Cfy22Trajectory simulate_cfy22(const Cfy22Params& p, const SimulationOptions& opt,
                               Cfy22State initial = {});

// ----------------------------------------------------------------- CF23 --
// Intermediate coupled model on an equatorial line of n_x nodes spanning
// 140E-280E. Model time unit is one month; T is in degrees C.
struct Cf23Params {
  int n_x = 49;
  double lon_west = 140.0, lon_east = 280.0;
  double c1 = 0.42, zeta = 2.0;
  double q_c = 7.0, q_e = 0.093, tau_q = 15.0, T_bar = 16.6;
  double Q_bar = 0.9, chi_A = 0.1333, eps_A = 1.0;
  int n_atm = 123;  // equatorial belt cells; the Pacific is the first n_x
  double chi_O = 1.0, gamma = 11.0;
  double d_p = 1.0, sigma_p0 = 1.6;
  double lambda = 0.2 / 12.0, m = 0.5, sigma_I0 = 0.12909944487358055;  // sqrt(lambda)
  double r_W = 0.5, r_E = 0.0;
  double tc_lon_lo = 160.0, tc_lon_hi = 210.0;
  double time_unit = 1.0 / 12.0;
  std::vector<double> eta1, eta2, s_p, c2;

  static Cf23Params defaults();
  double dx() const { return 1.0 / (n_x - 1); }
  double node_lon(int j) const { return lon_west + (lon_east - lon_west) * j / (n_x - 1); }
  double alpha_base() const;  // q_c q_e exp(q_e T_bar) / tau_q
  double sigma_p(double T_C) const { return sigma_p0 * (std::tanh(T_C) + 1.0); }
  void validate() const;
};

nlohmann::json to_json(const Cf23Params& p);
Cf23Params cf23_from_json(const nlohmann::json& j, Cf23Params base = Cf23Params::defaults());

struct Cf23Bias {
  double eta1_scale = 0.6, eta2_scale = 1.4;
};
Cf23Params apply_bias(const Cf23Params& p, const Cf23Bias& b);

double alpha_q(double T_C_avg, double t_years, const Cf23Params& p);

struct AtmosphereResponse {
  std::vector<double> u, theta;
};

// Steady damped Kelvin/Rossby response on the periodic equatorial belt,
// returned on the Pacific nodes. O(n) cyclic recurrences.
AtmosphereResponse solve_atmosphere(std::span<const double> E_q, const Cf23Params& p);

struct Cf23State {
  std::vector<double> U, H, T, u, theta;
  double a_p = 0, I = 0.5, t = 0;  // t in years

  static Cf23State zeros(int n_x, double I = 0.5);
  double T_C(const Cf23Params& p) const;
};

// dt in years; draws = (a_p, I) standard normals. CFL is checked against c1.
Cf23State step_cf23(const Cf23State& s, const Cf23Params& p, double dt,
                    std::span<const double, 2> draws, std::optional<double> fixed_I = {});

struct Cf23Trajectory {
  std::vector<fieldkit::YearMonth> time;
  std::vector<double> lon;
  Eigen::MatrixXd U, H, T, u, theta, taux;  // months x n_x
  std::vector<double> a_p, I;
};

Cf23Trajectory simulate_cf23(const Cf23Params& p, const SimulationOptions& opt);

// Fixed-point iteration on c2(x) so the long-run mean of T vanishes.
Cf23Params calibrate_c2(Cf23Params p, double years, std::uint64_t seed, int iterations = 4);

// ------------------------------------------------------ observations --
enum class ModelKind { CF23, CFY22 };

struct PseudoObsSpec {
  ModelKind model = ModelKind::CF23;
  std::vector<std::string> variables{"SST", "H"};
  std::vector<int> positions;  // indices along the equator; empty = all nodes
  int cadence = 1;

  static PseudoObsSpec cf23_default(int n_x = 49);
  static PseudoObsSpec cfy22_default();
  std::size_t n_o() const { return variables.size() * positions.size(); }
};

// Observation vectors in frozen order: variables in PseudoObsSpec order, then grid
// order within each variable.
struct ObsStream {
  std::vector<fieldkit::YearMonth> time;
  std::vector<std::string> variables;
  std::vector<int> positions;
  std::vector<double> lon;  // longitude of each position
  Eigen::MatrixXd values;   // n_time x n_o

  std::size_t n_o() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t block_length() const { return positions.size(); }
};

ObsStream generate_pseudo_obs(const Cf23Trajectory& traj, const PseudoObsSpec& spec);
ObsStream generate_pseudo_obs(const Cfy22Trajectory& traj, const PseudoObsSpec& spec);

// Observables read off gridded fields with the same ordering as a stream:
// CF23 variables are sampled on the equator at the stream longitudes; CFY22
// T_C and T_E are the Nino4 and Nino3 box means.
Eigen::MatrixXd observe_fields(const fieldkit::GriddedSeries& fields, const PseudoObsSpec& spec,
                               std::span<const double> lon);

fieldkit::GriddedSeries obs_to_series(const ObsStream& obs, const std::vector<std::string>& units);
ObsStream obs_from_series(const fieldkit::GriddedSeries& series, const PseudoObsSpec& spec);

// Removes each calendar month's mean from every channel.
ObsStream obs_anomaly(const ObsStream& obs);

// ------------------------------------------------------- regression --
struct RegressionMap {
  std::vector<double> r_C, r_E;
};

RegressionMap fit_regression(const Eigen::MatrixXd& sst, std::span<const double> T_C,
                             std::span<const double> T_E);
std::vector<double> reconstruct_sst(double T_C, double T_E, const RegressionMap& map);

// ------------------------------------------------------------- twin --
enum class TwinSource { T, H, U, TAUX };

struct MeridionalProfile {
  std::string variable;
  std::string units;
  TwinSource source = TwinSource::T;
  double scale = 1.0;      // physical units per model unit
  double lat_width = 5.0;  // Gaussian e-folding half width in degrees
};

struct TwinConfig {
  std::vector<MeridionalProfile> profiles;
  double noise_level = 0.05;  // fraction of each variable's equatorial std
  double noise_length = 2.0;  // smoothing radius in cells

  static TwinConfig defaults();
};

fieldkit::GriddedSeries twin_generate(const Cf23Trajectory& traj, const TwinConfig& cfg,
                                      const fieldkit::Grid& grid, std::uint64_t seed);

}  // namespace ensobridge::idealized
