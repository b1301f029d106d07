#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ensobridge/core.hpp"
#include "ensobridge/surrogate.hpp"

namespace ensobridge::assim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Compactly supported fifth-order taper; zero for r >= 2c.
double gaspari_cohn(double r, double c);

// Rows: n_l latent entries (all ones) then one row per observable.
// Observable i sits at positions[i] inside a block of length block_lengths[i].
MatrixXd build_localization(int n_l, const std::vector<int>& positions,
                            const std::vector<int>& block_lengths, double c);

// Ensembles are dim x N, one member per column.
MatrixXd inflate(const MatrixXd& ensemble, double alpha);

// How H P H^T is tapered when P_xy is localized. None leaves it raw; Obs
// applies the observation rows of L; Split uses the raw S for latent rows and
// the tapered S for observed rows, so each block's gain matches its P_xy.
enum class InnovationTaper { None, Obs, Split };
const char* to_string(InnovationTaper t);
InnovationTaper innovation_taper_from_string(const std::string& s);

struct AssimConfig {
  int members = 50;
  double alpha = 1.09;
  double localization_radius = 0.15;
  double cond_threshold = 1e10;
  double svd_rel_cutoff = 1e-6;
  double nugget_rel = 1e-5, nugget_floor = 1e-10;
  double gain_cap = 1e4;
  double r_fraction = 0.04;  // R = r_fraction * mean(y^2) per channel
  double r_floor = 1e-8;
  bool perturb_obs = true;
  InnovationTaper innovation_taper = InnovationTaper::Split;
  bool enabled = true;
  std::uint64_t seed = 11;
  void validate() const;
};

struct InverseResult {
  MatrixXd inverse;
  bool nugget_applied = false;
  double condition = 0;
};

InverseResult robust_inverse(const MatrixXd& S, const AssimConfig& cfg);

double spectral_norm(const MatrixXd& A);

struct GainResult {
  MatrixXd K;
  double norm = 0;  // after capping
  bool cap_applied = false;
};

GainResult kalman_gain(const MatrixXd& P_xy, const MatrixXd& S_inv, double gain_cap);

// H selects the trailing n_o entries of the state.
struct ObservationModel {
  int n_o = 0;
  VectorXd R;  // diagonal
  MatrixXd L;  // (dim x n_o) localization; empty means none
  void validate(int dim) const;
};

// R = fraction * mean over time of y^2, per channel (obs: n_time x n_o).
VectorXd observation_error(const MatrixXd& obs, double fraction, double floor);

struct AnalysisInfo {
  double innovation_rms = 0;    // y against the forecast mean
  double spread_obs_block = 0;  // mean analysis std over the observed block
  double gain_norm = 0;
  bool nugget_applied = false;
  bool cap_applied = false;
};

// Perturbations are keyed by (seed, cycle, member_keys[i], obs index).
// member_keys defaults to 0..N-1.
MatrixXd enkf_analysis(const MatrixXd& forecast, const VectorXd& y, const ObservationModel& obs,
                       const AssimConfig& cfg, std::uint64_t cycle, AnalysisInfo* info = nullptr,
                       const std::vector<std::uint64_t>& member_keys = {});

// One-step surrogate forecast of every member; context[k] is dim x N,
// oldest first. Members are processed in fixed chunks so results do not
// depend on the worker count.
MatrixXd forecast_members(const surrogate::LstmWeights& w, const std::vector<MatrixXd>& context);

struct CycleOptions {
  bool keep_members = false;
};

struct CycleResult {
  MatrixXd mean;    // dim x cycles, analysis mean per cycle
  MatrixXd spread;  // dim x cycles, analysis std per cycle
  std::vector<AnalysisInfo> log;
  std::vector<MatrixXd> members;  // per cycle, when requested
};

// initial_context[k] is dim x N (k = 0 oldest). obs row t is assimilated at
// cycle t; the first forecast targets obs row 0.
CycleResult run_cycle(const surrogate::LstmWeights& w, std::vector<MatrixXd> initial_context,
                      const MatrixXd& obs, const ObservationModel& model, const AssimConfig& cfg,
                      const CycleOptions& opt = {});

std::string cycle_log_csv(const std::vector<AnalysisInfo>& log);

}  // namespace ensobridge::assim
