#include "ensobridge/assimilator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ensobridge::assim {

double gaspari_cohn(double r, double c) {
  if (!(c > 0) || r < 0) throw ConfigError("gaspari_cohn needs r >= 0 and c > 0");
  const double z = r / c;
  if (z >= 2.0) return 0.0;
  if (z <= 1.0)
    return (((-0.25 * z + 0.5) * z + 0.625) * z - 5.0 / 3.0) * z * z + 1.0;
  return ((((z / 12.0 - 0.5) * z + 0.625) * z + 5.0 / 3.0) * z - 5.0) * z + 4.0 - 2.0 / (3.0 * z);
}

MatrixXd build_localization(int n_l, const std::vector<int>& positions,
                            const std::vector<int>& block_lengths, double c) {
  if (n_l < 0) throw ConfigError("latent size must be >= 0");
  if (positions.size() != block_lengths.size())
    throw ConfigError("localization needs one block length per observation");
  const auto n_o = static_cast<Eigen::Index>(positions.size());
  for (Eigen::Index i = 0; i < n_o; ++i)
    if (block_lengths[i] < 1 || positions[i] < 0 || positions[i] >= block_lengths[i])
      throw ConfigError("observation position " + std::to_string(i) + " is outside its block");
  MatrixXd L = MatrixXd::Ones(n_l + n_o, n_o);
  for (Eigen::Index i = 0; i < n_o; ++i)
    for (Eigen::Index j = 0; j < n_o; ++j)
      L(n_l + i, j) = gaspari_cohn(std::abs(positions[i] - positions[j]) / static_cast<double>(block_lengths[i]), c);
  return L;
}

MatrixXd inflate(const MatrixXd& ensemble, double alpha) {
  if (alpha < 1) throw ConfigError("inflation factor must be >= 1");
  if (alpha == 1) return ensemble;
  const VectorXd mean = ensemble.rowwise().mean();
  MatrixXd out = ensemble;
  for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k) = mean + alpha * (ensemble.col(k) - mean);
  // Fold the rounding drift of the recomputed mean back into the largest
  // member of each row: two proportional moves, then walks of k ulps (k doubles
  // while the drift is unchanged, resets on a sign change). When no
  // representable sum divides back to the mean exactly, this ends within an
  // ulp or two of it.
  const auto n = static_cast<double>(out.cols());
  VectorXd last = VectorXd::Zero(out.rows());
  std::vector<long> k(static_cast<std::size_t>(out.rows()), 1);
  std::vector<Eigen::Index> pivot(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r).cwiseAbs().maxCoeff(&pivot[static_cast<std::size_t>(r)]);
  for (int pass = 0; pass < 32; ++pass) {
    const VectorXd drift = out.rowwise().mean() - mean;
    if (drift.isZero(0.0)) break;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double d = drift(r);
      if (d == 0) continue;
      const auto ru = static_cast<std::size_t>(r);
      double& x = out(r, pivot[ru]);
      if (pass < 2) {
        x -= n * d;
      } else {
        if (d * last(r) < 0) k[ru] = 1;
        else if (d == last(r)) k[ru] = std::min(2 * k[ru], 1L << 20);
        for (long i = 0; i < k[ru]; ++i) x = std::nextafter(x, d > 0 ? -INFINITY : INFINITY);
      }
      last(r) = d;
    }
  }
  return out;
}

const char* to_string(InnovationTaper t) {
  switch (t) {
    case InnovationTaper::None: return "none";
    case InnovationTaper::Obs: return "obs";
    case InnovationTaper::Split: return "split";
  }
  return "split";
}

InnovationTaper innovation_taper_from_string(const std::string& s) {
  if (s == "none") return InnovationTaper::None;
  if (s == "obs") return InnovationTaper::Obs;
  if (s == "split") return InnovationTaper::Split;
  throw ConfigError("innovation taper must be none, obs or split, got '" + s + "'");
}

void AssimConfig::validate() const {
  if (members < 2) throw ConfigError("ensemble needs at least 2 members");
  if (alpha < 1) throw ConfigError("inflation alpha must be >= 1");
  if (!(localization_radius > 0)) throw ConfigError("localization radius must be > 0");
  if (!(gain_cap > 0)) throw ConfigError("gain cap must be > 0");
  if (!(svd_rel_cutoff >= 0 && svd_rel_cutoff < 1)) throw ConfigError("svd cutoff must be in [0, 1)");
  if (!(r_fraction > 0)) throw ConfigError("observation error fraction must be > 0");
}

InverseResult robust_inverse(const MatrixXd& S_in, const AssimConfig& cfg) {
  if (S_in.rows() != S_in.cols()) throw DataError("innovation covariance must be square");
  MatrixXd S = 0.5 * (S_in + S_in.transpose());
  Eigen::JacobiSVD<MatrixXd> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
  double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (!(smax > 0)) throw NumericalError("innovation covariance is zero");
  InverseResult r;
  const double smin = svd.singularValues().tail(1)(0);
  r.condition = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (r.condition > cfg.cond_threshold) {
    const double delta = std::max(cfg.nugget_rel * smax, cfg.nugget_floor);
    S.diagonal().array() += delta;
    svd.compute(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
    smax = svd.singularValues()(0);
    r.nugget_applied = true;
  }
  const VectorXd& s = svd.singularValues();
  VectorXd inv(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) inv(k) = s(k) > smax * cfg.svd_rel_cutoff ? 1.0 / s(k) : 0.0;
  r.inverse = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return r;
}

double spectral_norm(const MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(A);
  return svd.singularValues()(0);
}

GainResult kalman_gain(const MatrixXd& P_xy, const MatrixXd& S_inv, double gain_cap) {
  if (P_xy.cols() != S_inv.rows()) throw DataError("gain shapes disagree");
  GainResult g;
  g.K = P_xy * S_inv;
  g.norm = spectral_norm(g.K);
  if (g.norm > gain_cap) {
    g.K *= gain_cap / g.norm;
    g.norm = gain_cap;
    g.cap_applied = true;
  }
  return g;
}

void ObservationModel::validate(int dim) const {
  if (n_o < 1 || n_o > dim) throw DataError("observation count must be in [1, state size]");
  if (R.size() != n_o) throw DataError("R must have one entry per observation");
  if ((R.array() <= 0).any()) throw DataError("R entries must be > 0");
  if (L.size() && (L.rows() != dim || L.cols() != n_o)) throw DataError("localization matrix has the wrong shape");
}

VectorXd observation_error(const MatrixXd& obs, double fraction, double floor) {
  if (obs.rows() == 0) throw DataError("observation stream is empty");
  VectorXd R = fraction * obs.array().square().colwise().mean().transpose();
  return R.cwiseMax(floor);
}

MatrixXd enkf_analysis(const MatrixXd& forecast, const VectorXd& y, const ObservationModel& obs,
                       const AssimConfig& cfg, std::uint64_t cycle, AnalysisInfo* info,
                       const std::vector<std::uint64_t>& member_keys) {
  const auto dim = static_cast<int>(forecast.rows());
  const Eigen::Index N = forecast.cols();
  const int n_o = obs.n_o;
  obs.validate(dim);
  if (N < 2) throw DataError("ensemble needs at least 2 members");
  if (y.size() != n_o) throw DataError("observation vector has the wrong length");
  if (!member_keys.empty() && static_cast<Eigen::Index>(member_keys.size()) != N)
    throw DataError("one member key per member is required");
  if (!forecast.allFinite() || !y.allFinite()) throw NumericalError("non-finite forecast or observation");

  MatrixXd X = inflate(forecast, cfg.alpha);
  const VectorXd mean = X.rowwise().mean();
  const MatrixXd A = X.colwise() - mean;
  const MatrixXd HA = A.bottomRows(n_o);
  const double nm1 = static_cast<double>(N - 1);
  MatrixXd P_xy = A * HA.transpose() / nm1;
  const MatrixXd P_yy = HA * HA.transpose() / nm1;
  MatrixXd S = P_yy;
  const bool localized = obs.L.size() > 0;
  if (localized) {
    P_xy = P_xy.cwiseProduct(obs.L);
    if (cfg.innovation_taper != InnovationTaper::None) S = S.cwiseProduct(obs.L.bottomRows(n_o));
  }
  S.diagonal() += obs.R;
  const InverseResult inv = robust_inverse(S, cfg);
  GainResult gain;
  bool nugget = inv.nugget_applied;
  if (localized && cfg.innovation_taper == InnovationTaper::Split && dim > n_o) {
    // Latent rows are untapered, so they pair with the untapered S.
    MatrixXd S_raw = P_yy;
    S_raw.diagonal() += obs.R;
    const InverseResult inv_raw = robust_inverse(S_raw, cfg);
    nugget = nugget || inv_raw.nugget_applied;
    MatrixXd K(dim, n_o);
    K.topRows(dim - n_o) = P_xy.topRows(dim - n_o) * inv_raw.inverse;
    K.bottomRows(n_o) = P_xy.bottomRows(n_o) * inv.inverse;
    gain = kalman_gain(K, MatrixXd::Identity(n_o, n_o), cfg.gain_cap);
  } else {
    gain = kalman_gain(P_xy, inv.inverse, cfg.gain_cap);
  }

  const VectorXd sqrtR = obs.R.cwiseSqrt();
  MatrixXd D(n_o, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const std::uint64_t key = member_keys.empty() ? static_cast<std::uint64_t>(i) : member_keys[i];
    for (int k = 0; k < n_o; ++k) {
      const double eta = cfg.perturb_obs ? sqrtR(k) * keyed_normal(cfg.seed, cycle, key, static_cast<std::uint64_t>(k)) : 0.0;
      D(k, i) = y(k) + eta - X(dim - n_o + k, i);
    }
  }
  MatrixXd out = X + gain.K * D;
  if (!out.allFinite()) throw NumericalError("non-finite analysis at cycle " + std::to_string(cycle));
  if (info) {
    info->innovation_rms = std::sqrt((y - mean.tail(n_o)).squaredNorm() / n_o);
    const VectorXd am = out.bottomRows(n_o).rowwise().mean();
    const MatrixXd aa = out.bottomRows(n_o).colwise() - am;
    info->spread_obs_block = (aa.rowwise().squaredNorm() / nm1).cwiseSqrt().mean();
    info->gain_norm = gain.norm;
    info->nugget_applied = nugget;
    info->cap_applied = gain.cap_applied;
  }
  return out;
}

namespace {
constexpr Eigen::Index kChunk = 10;
}

MatrixXd forecast_members(const surrogate::LstmWeights& w, const std::vector<MatrixXd>& context) {
  if (context.empty()) throw DataError("forecast needs a context");
  const Eigen::Index N = context.front().cols();
  MatrixXd out(w.dim, N);
  const auto chunks = static_cast<std::size_t>((N + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index first = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index n = std::min(kChunk, N - first);
    std::vector<MatrixXd> ctx;
    ctx.reserve(context.size());
    for (const auto& m : context) ctx.push_back(m.middleCols(first, n));
    out.middleCols(first, n) = surrogate::lstm_forward(w, ctx);
  });
  return out;
}

CycleResult run_cycle(const surrogate::LstmWeights& w, std::vector<MatrixXd> context,
                      const MatrixXd& obs, const ObservationModel& model, const AssimConfig& cfg,
                      const CycleOptions& opt) {
  cfg.validate();
  if (context.empty()) throw DataError("cycle needs an initial context");
  const Eigen::Index N = context.front().cols();
  for (const auto& m : context)
    if (m.rows() != w.dim || m.cols() != N) throw DataError("initial context has the wrong shape");
  if (obs.cols() != model.n_o) throw DataError("observation stream width differs from the observation model");
  model.validate(w.dim);
  const Eigen::Index T = obs.rows();
  CycleResult r;
  r.mean.resize(w.dim, T);
  r.spread.resize(w.dim, T);
  r.log.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    MatrixXd fc = forecast_members(w, context);
    if (!fc.allFinite()) throw NumericalError("non-finite forecast at cycle " + std::to_string(t));
    MatrixXd an;
    auto& info = r.log[static_cast<std::size_t>(t)];
    const VectorXd y = obs.row(t).transpose();
    if (cfg.enabled) {
      an = enkf_analysis(fc, y, model, cfg, static_cast<std::uint64_t>(t), &info);
    } else {
      an = std::move(fc);
      info.innovation_rms = std::sqrt((y - an.bottomRows(model.n_o).rowwise().mean()).squaredNorm() / model.n_o);
    }
    const VectorXd m = an.rowwise().mean();
    r.mean.col(t) = m;
    r.spread.col(t) = ((an.colwise() - m).rowwise().squaredNorm() / static_cast<double>(N - 1)).cwiseSqrt();
    if (!cfg.enabled) info.spread_obs_block = r.spread.col(t).tail(model.n_o).mean();
    if (opt.keep_members) r.members.push_back(an);
    context.erase(context.begin());
    context.push_back(std::move(an));
  }
  return r;
}

std::string cycle_log_csv(const std::vector<AnalysisInfo>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "cycle,innovation_rms,spread_obs_block,gain_norm,nugget_applied,cap_applied\n";
  for (std::size_t k = 0; k < log.size(); ++k) {
    const auto& a = log[k];
    os << k << ',' << a.innovation_rms << ',' << a.spread_obs_block << ',' << a.gain_norm << ','
       << (a.nugget_applied ? 1 : 0) << ',' << (a.cap_applied ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace ensobridge::assim
