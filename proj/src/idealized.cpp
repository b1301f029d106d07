#include "ensobridge/idealized.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ensobridge/core.hpp"

namespace ensobridge::idealized {

using fieldkit::YearMonth;
using nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

namespace {

int steps_per_month(double dt) {
  const double s = (1.0 / 12.0) / dt;
  const int n = static_cast<int>(std::lround(s));
  if (n < 1 || std::abs(s - n) > 1e-9) throw ConfigError("dt must divide one month (1/12 yr) evenly");
  return n;
}

void require_finite(double v, const char* model, const std::string& component) {
  if (!std::isfinite(v))
    throw NumericalError(std::string(model) + " state component " + component + " became non-finite");
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------- CFY22 --

double Cfy22Params::c1(double T_C, double t) const {
  if (c1_of_TC) return c1_of_TC(T_C, t);
  const double d = T_C + c1_shift;
  return (c1_quad * d * d + c1_base) * (1.0 + c1_season * std::sin(kTwoPi * t + phase));
}

double Cfy22Params::c2(double t) const {
  if (c2_of_t) return c2_of_t(t);
  return c2_base * (1.0 + c2_season * std::sin(kTwoPi * t + phase));
}

double Cfy22Params::sigma_tau(double T_C_celsius) const {
  if (sigma_tau_of_TC) return sigma_tau_of_TC(T_C_celsius);
  return sigma_tau0 * (std::tanh(T_C_celsius) + 1.0);
}

double Cfy22Params::sigma_I(double I) const {
  if (sigma_I_of_I) return sigma_I_of_I(I);
  return sigma_I0 * std::sqrt(std::max(I * (1.0 - I), 0.0));
}

double Cfy22Params::max_real_eigenvalue() const {
  // Drift Jacobian at the origin over (u, h, T_C, T_E, tau) with the
  // seasonal factors at their annual mean and I at m.
  const double g = gamma * b0 * mu / 2;
  const double c1_0 = c1_of_TC ? c1_of_TC(0.0, 0.0) : c1_quad * c1_shift * c1_shift + c1_base;
  const double c2_0 = c2_of_t ? c2_of_t(0.0) : c2_base;
  Eigen::Matrix<double, 5, 5> J;
  J << -r, 0, -alpha1 * b0 * mu / 2, -alpha1 * b0 * mu / 2, beta_u,
       0, -r, -alpha2 * b0 * mu / 2, -alpha2 * b0 * mu / 2, beta_h,
       sigma_adv * m, gamma, g - c1_0, g, beta_C,
       0, gamma, -g, 3 * g - c2_0, beta_E,
       0, 0, 0, 0, -d_tau;
  Eigen::EigenSolver<Eigen::Matrix<double, 5, 5>> es(J, false);
  return std::max(es.eigenvalues().real().maxCoeff(), -lambda);
}

void Cfy22Params::validate() const {
  if (!(r > 0) || !(d_tau > 0) || !(lambda > 0)) throw ConfigError("CFY22 requires r, d_tau, lambda > 0");
  if (!(time_unit > 0) || !(temp_unit > 0)) throw ConfigError("CFY22 units must be positive");
  if (!(max_real_eigenvalue() < 0))
    throw ConfigError("CFY22 drift is not damped at the origin (largest real eigenvalue >= 0)");
}

json to_json(const Cfy22Params& p) {
  return {{"r", p.r},           {"alpha1", p.alpha1},         {"alpha2", p.alpha2},
          {"b0", p.b0},         {"mu", p.mu},                 {"gamma", p.gamma},
          {"sigma_adv", p.sigma_adv}, {"C_u", p.C_u},         {"c1_quad", p.c1_quad},
          {"c1_shift", p.c1_shift},   {"c1_base", p.c1_base}, {"c1_season", p.c1_season},
          {"c2_base", p.c2_base},     {"c2_season", p.c2_season}, {"beta_u", p.beta_u},
          {"beta_h", p.beta_h},       {"beta_C", p.beta_C},   {"beta_E", p.beta_E},
          {"sigma_u", p.sigma_u},     {"sigma_h", p.sigma_h}, {"sigma_C", p.sigma_C},
          {"sigma_E", p.sigma_E},     {"d_tau", p.d_tau},     {"sigma_tau0", p.sigma_tau0},
          {"lambda", p.lambda},       {"m", p.m},             {"sigma_I0", p.sigma_I0},
          {"time_unit", p.time_unit}, {"temp_unit", p.temp_unit}, {"phase", p.phase}};
}

Cfy22Params cfy22_from_json(const json& j, Cfy22Params p) {
  auto get = [&](const char* k, double& v) {
    if (j.contains(k)) v = j.at(k).get<double>();
  };
  get("r", p.r); get("alpha1", p.alpha1); get("alpha2", p.alpha2); get("b0", p.b0);
  get("mu", p.mu); get("gamma", p.gamma); get("sigma_adv", p.sigma_adv); get("C_u", p.C_u);
  get("c1_quad", p.c1_quad); get("c1_shift", p.c1_shift); get("c1_base", p.c1_base);
  get("c1_season", p.c1_season); get("c2_base", p.c2_base); get("c2_season", p.c2_season);
  get("beta_u", p.beta_u); get("beta_h", p.beta_h); get("beta_C", p.beta_C); get("beta_E", p.beta_E);
  get("sigma_u", p.sigma_u); get("sigma_h", p.sigma_h); get("sigma_C", p.sigma_C);
  get("sigma_E", p.sigma_E); get("d_tau", p.d_tau); get("sigma_tau0", p.sigma_tau0);
  get("lambda", p.lambda); get("m", p.m); get("sigma_I0", p.sigma_I0);
  get("time_unit", p.time_unit); get("temp_unit", p.temp_unit); get("phase", p.phase);
  return p;
}

Cfy22State step_cfy22(const Cfy22State& s, const Cfy22Params& p, double dt,
                      std::span<const double, 6> w) {
  if (!(dt > 0)) throw ConfigError("dt must be positive");
  const double dtn = dt / p.time_unit;
  const double sq = std::sqrt(dtn);
  const double TC = s.T_C / p.temp_unit, TE = s.T_E / p.temp_unit;
  const double c1 = p.c1(TC, s.t), c2 = p.c2(s.t);
  const double g = p.gamma * p.b0 * p.mu / 2;

  const double du = -p.r * s.u - p.alpha1 * p.b0 * p.mu / 2 * (TC + TE) + p.beta_u * s.tau;
  const double dh = -p.r * s.h_W - p.alpha2 * p.b0 * p.mu / 2 * (TC + TE) + p.beta_h * s.tau;
  const double dC = (g - c1) * TC + g * TE + p.gamma * s.h_W + p.sigma_adv * s.I * s.u + p.C_u +
                    p.beta_C * s.tau;
  const double dE = p.gamma * s.h_W + (3 * g - c2) * TE - g * TC + p.beta_E * s.tau;

  Cfy22State n = s;
  n.u = s.u + du * dtn + p.sigma_u * sq * w[0];
  n.h_W = s.h_W + dh * dtn + p.sigma_h * sq * w[1];
  n.T_C = (TC + dC * dtn + p.sigma_C * sq * w[2]) * p.temp_unit;
  n.T_E = (TE + dE * dtn + p.sigma_E * sq * w[3]) * p.temp_unit;
  n.tau = s.tau - p.d_tau * s.tau * dtn + p.sigma_tau(s.T_C) * sq * w[4];
  n.I = std::clamp(s.I - p.lambda * (s.I - p.m) * dtn + p.sigma_I(s.I) * sq * w[5], 0.0, 1.0);
  n.t = s.t + dt;

  require_finite(n.u, "CFY22", "u");
  require_finite(n.h_W, "CFY22", "h_W");
  require_finite(n.T_C, "CFY22", "T_C");
  require_finite(n.T_E, "CFY22", "T_E");
  require_finite(n.tau, "CFY22", "tau");
  require_finite(n.I, "CFY22", "I");
  return n;
}

Cfy22Trajectory simulate_cfy22(const Cfy22Params& p, const SimulationOptions& opt, Cfy22State s) {
  if (!(opt.years > 0)) throw ConfigError("simulation length must be positive");
  p.validate();
  const int spm = steps_per_month(opt.dt);
  const auto spin = static_cast<std::uint64_t>(std::llround(opt.spinup_years * 12)) * spm;
  const auto months = static_cast<std::size_t>(std::llround(opt.years * 12));
  if (opt.fixed_I) s.I = *opt.fixed_I;
  Cfy22Trajectory out;
  out.time = fieldkit::monthly_axis(opt.start, months);
  for (auto* v : {&out.u, &out.h_W, &out.T_C, &out.T_E, &out.tau, &out.I}) v->reserve(months);
  std::array<double, 6> w{};
  std::uint64_t step = 0;
  auto advance = [&] {
    for (int c = 0; c < 6; ++c) w[c] = keyed_normal(opt.seed, step, static_cast<std::uint64_t>(c));
    s = step_cfy22(s, p, opt.dt, w);
    if (opt.fixed_I) s.I = *opt.fixed_I;
    ++step;
  };
  for (std::uint64_t k = 0; k < spin; ++k) advance();
  s.t = 0;
  for (std::size_t mo = 0; mo < months; ++mo) {
    for (int k = 0; k < spm; ++k) advance();
    out.u.push_back(s.u);
    out.h_W.push_back(s.h_W);
    out.T_C.push_back(s.T_C);
    out.T_E.push_back(s.T_E);
    out.tau.push_back(s.tau);
    out.I.push_back(s.I);
  }
  return out;
}

// ----------------------------------------------------------------- CF23 --

Cf23Params Cf23Params::defaults() {
  Cf23Params p;
  p.eta1.resize(p.n_x);
  p.eta2.resize(p.n_x);
  p.s_p.resize(p.n_x);
  p.c2.assign(p.n_x, 0.0);
  for (int j = 0; j < p.n_x; ++j) {
    const double x = static_cast<double>(j) / (p.n_x - 1);
    // Thermocline feedback grows eastward; zonal advective feedback peaks in
    // the central-western basin.
    p.eta1[j] = 0.2 + 1.8 * (1.0 + std::tanh(5.0 * (x - 0.55))) / 2.0;
    p.eta2[j] = 0.3 + 1.7 * std::exp(-std::pow((x - 0.35) / 0.2, 2));
    p.s_p[j] = std::exp(-0.5 * std::pow(x * 6.0, 2));
  }
  return p;
}

double Cf23Params::alpha_base() const { return q_c * q_e * std::exp(q_e * T_bar) / tau_q; }

void Cf23Params::validate() const {
  if (n_x < 3) throw ConfigError("CF23 needs at least 3 zonal points");
  const auto nx = static_cast<std::size_t>(n_x);
  if (eta1.size() != nx || eta2.size() != nx || s_p.size() != nx || c2.size() != nx)
    throw ConfigError("CF23 profile arrays must have n_x entries");
  if (n_atm < n_x) throw ConfigError("CF23 atmosphere belt must contain the basin");
  if (!(c1 > 0) || !(d_p > 0) || !(lambda > 0) || !(eps_A > 0) || !(Q_bar < 1))
    throw ConfigError("CF23 requires c1, d_p, lambda, eps_A > 0 and Q_bar < 1");
  if (*std::min_element(s_p.begin(), s_p.end()) < 0) throw ConfigError("s_p must be non-negative");
  if (r_W < 0 || r_W > 1 || r_E < 0 || r_E > 1) throw ConfigError("boundary reflection must be in [0,1]");
}

json to_json(const Cf23Params& p) {
  return {{"n_x", p.n_x},       {"lon_west", p.lon_west},   {"lon_east", p.lon_east},
          {"c1", p.c1},         {"zeta", p.zeta},           {"q_c", p.q_c},
          {"q_e", p.q_e},       {"tau_q", p.tau_q},         {"T_bar", p.T_bar},
          {"Q_bar", p.Q_bar},   {"chi_A", p.chi_A},         {"eps_A", p.eps_A},
          {"n_atm", p.n_atm},   {"chi_O", p.chi_O},         {"gamma", p.gamma},
          {"d_p", p.d_p},       {"sigma_p0", p.sigma_p0},   {"lambda", p.lambda},
          {"m", p.m},           {"sigma_I0", p.sigma_I0},   {"r_W", p.r_W},
          {"r_E", p.r_E},       {"tc_lon_lo", p.tc_lon_lo}, {"tc_lon_hi", p.tc_lon_hi},
          {"time_unit", p.time_unit}, {"eta1", p.eta1},     {"eta2", p.eta2},
          {"s_p", p.s_p},       {"c2", p.c2}};
}

Cf23Params cf23_from_json(const json& j, Cf23Params p) {
  auto get = [&](const char* k, auto& v) {
    if (j.contains(k)) v = j.at(k).get<std::remove_reference_t<decltype(v)>>();
  };
  get("n_x", p.n_x); get("lon_west", p.lon_west); get("lon_east", p.lon_east);
  get("c1", p.c1); get("zeta", p.zeta); get("q_c", p.q_c); get("q_e", p.q_e);
  get("tau_q", p.tau_q); get("T_bar", p.T_bar); get("Q_bar", p.Q_bar); get("chi_A", p.chi_A);
  get("eps_A", p.eps_A); get("n_atm", p.n_atm); get("chi_O", p.chi_O); get("gamma", p.gamma);
  get("d_p", p.d_p); get("sigma_p0", p.sigma_p0); get("lambda", p.lambda); get("m", p.m);
  get("sigma_I0", p.sigma_I0); get("r_W", p.r_W); get("r_E", p.r_E);
  get("tc_lon_lo", p.tc_lon_lo); get("tc_lon_hi", p.tc_lon_hi); get("time_unit", p.time_unit);
  get("eta1", p.eta1); get("eta2", p.eta2); get("s_p", p.s_p); get("c2", p.c2);
  return p;
}

Cf23Params apply_bias(const Cf23Params& p, const Cf23Bias& b) {
  Cf23Params q = p;
  for (auto& v : q.eta1) v *= b.eta1_scale;
  for (auto& v : q.eta2) v *= b.eta2_scale;
  return q;
}

double alpha_q(double T_C_avg, double t, const Cf23Params& p) {
  const double e1 = mean_of(p.eta1), e2 = mean_of(p.eta2);
  const double a = 0.2 + std::abs(T_C_avg + 0.4) * e2;
  const double beta1 = 1.8 - e2 / 3.0 + a * a / 5.0;
  const double beta2 = 1.0 + 0.5 * std::sin(kTwoPi * (t - 1.0 / 12.0)) +
                       0.1 * std::sin(kTwoPi * t) * e2 -
                       0.0625 * std::sin(2.0 * kTwoPi * (t - 3.0 / 12.0)) * e1;
  return p.alpha_base() * beta1 * beta2;
}

AtmosphereResponse solve_atmosphere(std::span<const double> E_q, const Cf23Params& p) {
  const int n = p.n_atm, nx = p.n_x;
  if (static_cast<int>(E_q.size()) != nx) throw DataError("heating must be given on the n_x nodes");
  const double dx = p.dx();
  const double aK = p.chi_A / (2.0 * (1.0 - p.Q_bar));
  const double aR = p.chi_A / (3.0 * (1.0 - p.Q_bar));
  auto heat = [&](int i) { return i < nx ? E_q[i] : 0.0; };

  // Kelvin: (eps + 1/dx) K_i - K_{i-1}/dx = -aK E_i, periodic.
  const double dk = p.eps_A + 1.0 / dx;
  const double ak = (1.0 / dx) / dk;
  std::vector<double> K(n), R(n);
  double acc = 0.0, pw = 1.0;
  for (int i = 0; i < n; ++i) acc = ak * acc - aK * heat(i) / dk;
  for (int i = 0; i < n; ++i) pw *= ak;
  if (!(1.0 - pw > 0)) throw NumericalError("singular atmosphere operator");
  K[n - 1] = acc / (1.0 - pw);
  double prev = K[n - 1];
  for (int i = 0; i < n; ++i) prev = K[i] = ak * prev - aK * heat(i) / dk;

  // Rossby: (eps + 1/(3dx)) R_i - R_{i+1}/(3dx) = -aR E_i, periodic.
  const double dr = p.eps_A + 1.0 / (3.0 * dx);
  const double ar = (1.0 / (3.0 * dx)) / dr;
  acc = 0.0;
  for (int i = n - 1; i >= 0; --i) acc = ar * acc - aR * heat(i) / dr;
  pw = 1.0;
  for (int i = 0; i < n; ++i) pw *= ar;
  R[0] = acc / (1.0 - pw);
  prev = R[0];
  for (int i = n - 1; i >= 0; --i) prev = R[i] = ar * prev - aR * heat(i) / dr;

  AtmosphereResponse out;
  out.u.resize(nx);
  out.theta.resize(nx);
  for (int i = 0; i < nx; ++i) {
    out.u[i] = K[i] - R[i];
    out.theta[i] = -(K[i] + R[i]);
  }
  return out;
}

Cf23State Cf23State::zeros(int n_x, double I) {
  Cf23State s;
  for (auto* v : {&s.U, &s.H, &s.T, &s.u, &s.theta}) v->assign(n_x, 0.0);
  s.I = I;
  return s;
}

double Cf23State::T_C(const Cf23Params& p) const {
  double sum = 0;
  int count = 0;
  for (int j = 0; j < p.n_x; ++j) {
    const double lon = p.node_lon(j);
    if (lon >= p.tc_lon_lo - 1e-9 && lon <= p.tc_lon_hi + 1e-9) {
      sum += T[j];
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

namespace {

std::vector<double> heating(const Cf23State& s, const Cf23Params& p, double T_C) {
  const double a = alpha_q(T_C, s.t, p);
  std::vector<double> E(p.n_x);
  for (int j = 0; j < p.n_x; ++j) E[j] = a * s.T[j];
  return E;
}

}  // namespace

Cf23State step_cf23(const Cf23State& s, const Cf23Params& p, double dt,
                    std::span<const double, 2> draws, std::optional<double> fixed_I) {
  const int nx = p.n_x;
  const double dtm = dt / p.time_unit;
  const double dx = p.dx();
  if (!(dt > 0)) throw ConfigError("dt must be positive");
  if (p.c1 * dtm / dx > 1.0)
    throw ConfigError("CF23 time step violates the CFL limit c1*dt/dx <= 1");
  if (s.T.size() != static_cast<std::size_t>(nx)) throw DataError("CF23 state size mismatch");

  const double T_C = s.T_C(p);
  const double a = alpha_q(T_C, s.t, p);
  std::vector<double> E(nx);
  for (int j = 0; j < nx; ++j) E[j] = a * s.T[j];
  const auto atm = solve_atmosphere(E, p);

  std::vector<double> tau(nx), K(nx), R(nx);
  for (int j = 0; j < nx; ++j) {
    tau[j] = p.gamma * (atm.u[j] + s.a_p * p.s_p[j]);
    K[j] = 0.5 * (s.H[j] + s.U[j]);
    R[j] = 0.5 * (s.H[j] - s.U[j]);
  }

  Cf23State n = s;
  for (int j = 0; j < nx; ++j) {
    const double dT = p.c1 * (-p.zeta * E[j] + p.eta1[j] * s.H[j] + s.I * p.eta2[j] * s.U[j]) + p.c2[j];
    n.T[j] = s.T[j] + dT * dtm;
  }
  std::vector<double> Kn(K), Rn(R);
  for (int j = 1; j < nx; ++j)
    Kn[j] = K[j] + dtm * (-p.c1 * (K[j] - K[j - 1]) / dx + p.chi_O * p.c1 * tau[j] / 2.0);
  for (int j = 0; j < nx - 1; ++j)
    Rn[j] = R[j] + dtm * (p.c1 / 3.0 * (R[j + 1] - R[j]) / dx - p.chi_O * p.c1 * tau[j] / 3.0);
  Kn[0] = p.r_W * Rn[0];
  Rn[nx - 1] = p.r_E * Kn[nx - 1];
  for (int j = 0; j < nx; ++j) {
    n.U[j] = Kn[j] - Rn[j];
    n.H[j] = Kn[j] + Rn[j];
  }

  const double sq = std::sqrt(dtm);
  n.a_p = s.a_p - p.d_p * s.a_p * dtm + p.sigma_p(T_C) * sq * draws[0];
  if (fixed_I) {
    n.I = *fixed_I;
  } else {
    const double sI = p.sigma_I0 * std::sqrt(std::max(s.I * (1.0 - s.I), 0.0));
    n.I = std::clamp(s.I - p.lambda * (s.I - p.m) * dtm + sI * sq * draws[1], 0.0, 1.0);
  }
  n.t = s.t + dt;

  const auto diag = solve_atmosphere(heating(n, p, n.T_C(p)), p);
  n.u = diag.u;
  n.theta = diag.theta;

  for (int j = 0; j < nx; ++j) {
    require_finite(n.T[j], "CF23", "T[" + std::to_string(j) + "]");
    require_finite(n.U[j], "CF23", "U[" + std::to_string(j) + "]");
    require_finite(n.H[j], "CF23", "H[" + std::to_string(j) + "]");
  }
  require_finite(n.a_p, "CF23", "a_p");
  return n;
}

Cf23Trajectory simulate_cf23(const Cf23Params& p, const SimulationOptions& opt) {
  if (!(opt.years > 0)) throw ConfigError("simulation length must be positive");
  p.validate();
  const int spm = steps_per_month(opt.dt);
  const auto spin = static_cast<std::uint64_t>(std::llround(opt.spinup_years * 12)) * spm;
  const auto months = static_cast<std::size_t>(std::llround(opt.years * 12));
  const int nx = p.n_x;
  Cf23State s = Cf23State::zeros(nx, opt.fixed_I.value_or(p.m));

  Cf23Trajectory out;
  out.time = fieldkit::monthly_axis(opt.start, months);
  for (int j = 0; j < nx; ++j) out.lon.push_back(p.node_lon(j));
  for (auto* m : {&out.U, &out.H, &out.T, &out.u, &out.theta, &out.taux})
    m->resize(static_cast<Eigen::Index>(months), nx);
  out.a_p.reserve(months);
  out.I.reserve(months);

  std::array<double, 2> w{};
  std::uint64_t step = 0;
  auto advance = [&] {
    w[0] = keyed_normal(opt.seed, step, 0);
    w[1] = keyed_normal(opt.seed, step, 1);
    s = step_cf23(s, p, opt.dt, w, opt.fixed_I);
    ++step;
  };
  for (std::uint64_t k = 0; k < spin; ++k) advance();
  s.t = 0;
  for (std::size_t mo = 0; mo < months; ++mo) {
    for (int k = 0; k < spm; ++k) advance();
    const auto r = static_cast<Eigen::Index>(mo);
    for (int j = 0; j < nx; ++j) {
      out.U(r, j) = s.U[j];
      out.H(r, j) = s.H[j];
      out.T(r, j) = s.T[j];
      out.u(r, j) = s.u[j];
      out.theta(r, j) = s.theta[j];
      out.taux(r, j) = p.gamma * (s.u[j] + s.a_p * p.s_p[j]);
    }
    out.a_p.push_back(s.a_p);
    out.I.push_back(s.I);
  }
  return out;
}

Cf23Params calibrate_c2(Cf23Params p, double years, std::uint64_t seed, int iterations) {
  const double damp = 1.5 * p.c1 * p.zeta * p.alpha_base();
  SimulationOptions opt;
  opt.years = years;
  opt.seed = seed;
  opt.spinup_years = 5;
  for (int it = 0; it < iterations; ++it) {
    const auto traj = simulate_cf23(p, opt);
    const Eigen::VectorXd mean = traj.T.colwise().mean();
    for (int j = 0; j < p.n_x; ++j) p.c2[j] -= damp * mean(j);
  }
  return p;
}

// ------------------------------------------------------ observations --

PseudoObsSpec PseudoObsSpec::cf23_default(int n_x) {
  PseudoObsSpec s;
  s.positions.resize(n_x);
  std::iota(s.positions.begin(), s.positions.end(), 0);
  return s;
}

PseudoObsSpec PseudoObsSpec::cfy22_default() {
  PseudoObsSpec s;
  s.model = ModelKind::CFY22;
  s.variables = {"T_C", "T_E"};
  s.positions = {0};
  return s;
}

namespace {

std::vector<std::size_t> cadence_rows(std::size_t n, int cadence) {
  if (cadence < 1) throw ConfigError("observation cadence must be >= 1 month");
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < n; k += static_cast<std::size_t>(cadence)) rows.push_back(k);
  return rows;
}

}  // namespace

ObsStream generate_pseudo_obs(const Cf23Trajectory& traj, const PseudoObsSpec& spec) {
  if (spec.model != ModelKind::CF23) throw ConfigError("spec is not a CF23 observation spec");
  const auto rows = cadence_rows(traj.time.size(), spec.cadence);
  ObsStream obs;
  obs.variables = spec.variables;
  obs.positions = spec.positions;
  const auto nb = spec.positions.size();
  for (int pos : spec.positions) {
    if (pos < 0 || pos >= static_cast<int>(traj.lon.size())) throw ConfigError("observation position out of range");
    obs.lon.push_back(traj.lon[pos]);
  }
  obs.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(spec.n_o()));
  for (std::size_t v = 0; v < spec.variables.size(); ++v) {
    const auto& name = spec.variables[v];
    const Eigen::MatrixXd* src = name == "SST" ? &traj.T
                                 : name == "H"   ? &traj.H
                                 : name == "U"   ? &traj.U
                                 : name == "TAUX" ? &traj.taux
                                                 : nullptr;
    if (!src) throw DataError("CF23 trajectory has no variable '" + name + "'");
    for (std::size_t k = 0; k < rows.size(); ++k)
      for (std::size_t b = 0; b < nb; ++b)
        obs.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v * nb + b)) =
            (*src)(static_cast<Eigen::Index>(rows[k]), spec.positions[b]);
  }
  for (auto r : rows) obs.time.push_back(traj.time[r]);
  return obs;
}

ObsStream generate_pseudo_obs(const Cfy22Trajectory& traj, const PseudoObsSpec& spec) {
  if (spec.model != ModelKind::CFY22) throw ConfigError("spec is not a CFY22 observation spec");
  const auto rows = cadence_rows(traj.time.size(), spec.cadence);
  ObsStream obs;
  obs.variables = spec.variables;
  obs.positions = {0};
  obs.lon = {0.0};
  obs.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(spec.variables.size()));
  for (std::size_t v = 0; v < spec.variables.size(); ++v) {
    const auto& name = spec.variables[v];
    const std::vector<double>* src = name == "T_C" ? &traj.T_C : name == "T_E" ? &traj.T_E : nullptr;
    if (!src) throw DataError("CFY22 trajectory has no variable '" + name + "'");
    for (std::size_t k = 0; k < rows.size(); ++k)
      obs.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = (*src)[rows[k]];
  }
  for (auto r : rows) obs.time.push_back(traj.time[r]);
  return obs;
}

namespace {

// Linear interpolation weights onto cell centers along one axis, clamped at
// the ends.
std::pair<int, double> bracket(double x, double first, double step, int n) {
  double f = (x - first) / step;
  if (f <= 0) return {0, 0.0};
  if (f >= n - 1) return {std::max(n - 2, 0), n > 1 ? 1.0 : 0.0};
  const int i = static_cast<int>(std::floor(f));
  return {i, f - i};
}

}  // namespace

Eigen::MatrixXd observe_fields(const fieldkit::GriddedSeries& fields, const PseudoObsSpec& spec,
                               std::span<const double> lon) {
  const auto nt = static_cast<Eigen::Index>(fields.n_time());
  if (spec.model == ModelKind::CFY22) {
    Eigen::MatrixXd out(nt, static_cast<Eigen::Index>(spec.variables.size()));
    for (std::size_t v = 0; v < spec.variables.size(); ++v) {
      fieldkit::Box box = spec.variables[v] == "T_C" ? fieldkit::Box{160, 210, -5, 5}
                                                     : fieldkit::Box{210, 270, -5, 5};
      if (spec.variables[v] != "T_C" && spec.variables[v] != "T_E")
        throw DataError("CFY22 observable '" + spec.variables[v] + "' is not T_C or T_E");
      const auto idx = fieldkit::region_mean(fields, "SST", box);
      for (Eigen::Index t = 0; t < nt; ++t) out(t, static_cast<Eigen::Index>(v)) = idx[t];
    }
    return out;
  }
  const auto& g = fields.grid();
  const auto nb = lon.size();
  Eigen::MatrixXd out(nt, static_cast<Eigen::Index>(spec.variables.size() * nb));
  const auto [j0, wj] = g.n_lat > 1 ? bracket(0.0, g.lat_center(0), g.dlat(), g.n_lat) : std::pair{0, 0.0};
  const int j1 = std::min(j0 + 1, g.n_lat - 1);
  for (std::size_t v = 0; v < spec.variables.size(); ++v) {
    const auto vi = fields.var_index(spec.variables[v]);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto [i0, wi] = bracket(lon[b], g.lon_center(0), g.dlon(), g.n_lon);
      const int i1 = std::min(i0 + 1, g.n_lon - 1);
      for (Eigen::Index t = 0; t < nt; ++t) {
        auto f = fields.field(static_cast<std::size_t>(t), vi);
        auto at = [&](int j, int i) { return f[static_cast<std::size_t>(j) * g.n_lon + i]; };
        const double row0 = (1 - wi) * at(j0, i0) + wi * at(j0, i1);
        const double row1 = (1 - wi) * at(j1, i0) + wi * at(j1, i1);
        out(t, static_cast<Eigen::Index>(v * nb + b)) = (1 - wj) * row0 + wj * row1;
      }
    }
  }
  return out;
}

fieldkit::GriddedSeries obs_to_series(const ObsStream& obs, const std::vector<std::string>& units) {
  const auto nb = static_cast<int>(obs.block_length());
  const fieldkit::Grid g = nb >= 2 ? fieldkit::line_grid(obs.lon.front(), obs.lon.back(), nb)
                                   : fieldkit::Grid{obs.lon[0] - 0.5, obs.lon[0] + 0.5, -0.5, 0.5, 1, 1, 1.0};
  fieldkit::GriddedSeries s(g, obs.variables, units, obs.time);
  for (std::size_t t = 0; t < obs.time.size(); ++t)
    for (std::size_t v = 0; v < obs.variables.size(); ++v) {
      auto f = s.field(t, v);
      for (int b = 0; b < nb; ++b)
        f[b] = obs.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v * nb + b));
    }
  return s;
}

ObsStream obs_from_series(const fieldkit::GriddedSeries& series, const PseudoObsSpec& spec) {
  ObsStream obs;
  obs.time = series.time();
  obs.variables = spec.variables;
  const auto& g = series.grid();
  const int nb = g.n_lon * g.n_lat;
  for (int b = 0; b < nb; ++b) {
    obs.positions.push_back(b);
    obs.lon.push_back(spec.model == ModelKind::CFY22 ? 0.0 : g.lon_center(b));
  }
  obs.values.resize(static_cast<Eigen::Index>(series.n_time()),
                    static_cast<Eigen::Index>(spec.variables.size()) * nb);
  for (std::size_t v = 0; v < spec.variables.size(); ++v) {
    const auto vi = series.var_index(spec.variables[v]);
    for (std::size_t t = 0; t < series.n_time(); ++t) {
      auto f = series.field(t, vi);
      for (int b = 0; b < nb; ++b)
        obs.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v) * nb + b) = f[b];
    }
  }
  return obs;
}

ObsStream obs_anomaly(const ObsStream& obs) {
  ObsStream out = obs;
  const auto nt = static_cast<Eigen::Index>(obs.time.size());
  Eigen::MatrixXd clim = Eigen::MatrixXd::Zero(12, obs.values.cols());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(12);
  for (Eigen::Index t = 0; t < nt; ++t) {
    const int m = obs.time[t].month - 1;
    clim.row(m) += obs.values.row(t);
    count(m) += 1;
  }
  for (int m = 0; m < 12; ++m)
    if (count(m) > 0) clim.row(m) /= count(m);
  for (Eigen::Index t = 0; t < nt; ++t) out.values.row(t) -= clim.row(obs.time[t].month - 1);
  return out;
}

// ------------------------------------------------------- regression --

RegressionMap fit_regression(const Eigen::MatrixXd& sst, std::span<const double> T_C,
                             std::span<const double> T_E) {
  const auto nt = sst.rows();
  if (static_cast<Eigen::Index>(T_C.size()) != nt || static_cast<Eigen::Index>(T_E.size()) != nt)
    throw DataError("regression inputs differ in length");
  Eigen::MatrixXd A(nt, 2);
  for (Eigen::Index t = 0; t < nt; ++t) A.row(t) << T_C[t], T_E[t];
  const Eigen::MatrixXd coef = A.colPivHouseholderQr().solve(sst);
  RegressionMap map;
  for (Eigen::Index x = 0; x < sst.cols(); ++x) {
    map.r_C.push_back(coef(0, x));
    map.r_E.push_back(coef(1, x));
  }
  return map;
}

std::vector<double> reconstruct_sst(double T_C, double T_E, const RegressionMap& map) {
  if (map.r_C.size() != map.r_E.size()) throw DataError("regression map lengths differ");
  std::vector<double> out(map.r_C.size());
  for (std::size_t x = 0; x < out.size(); ++x) out[x] = map.r_C[x] * T_C + map.r_E[x] * T_E;
  return out;
}

// ------------------------------------------------------------- twin --

TwinConfig TwinConfig::defaults() {
  TwinConfig c;
  c.profiles = {{"TAUX", "Pa", TwinSource::TAUX, 0.004, 10.0},
                {"SST", "degC", TwinSource::T, 1.0, 6.0},
                {"H", "m", TwinSource::H, 20.0, 4.0},
                {"TSUBA", "degC", TwinSource::H, 1.2, 4.5}};
  return c;
}

namespace {

std::vector<double> smoothing_kernel(double radius) {
  if (radius <= 0) return {1.0};
  const int half = static_cast<int>(std::ceil(3 * radius));
  std::vector<double> k(2 * half + 1);
  double s = 0;
  for (int i = -half; i <= half; ++i) s += k[i + half] = std::exp(-0.5 * i * i / (radius * radius));
  double s2 = 0;
  for (auto& v : k) {
    v /= s;
    s2 += v * v;
  }
  // Unit variance after smoothing white noise in two dimensions.
  for (auto& v : k) v /= std::sqrt(s2);
  return k;
}

}  // namespace

fieldkit::GriddedSeries twin_generate(const Cf23Trajectory& traj, const TwinConfig& cfg,
                                      const fieldkit::Grid& grid, std::uint64_t seed) {
  if (cfg.profiles.empty()) throw ConfigError("twin needs at least one meridional profile");
  const auto nx = static_cast<int>(traj.lon.size());
  if (nx < 2 || traj.T.cols() != nx) throw DataError("trajectory and longitude axis disagree");
  std::vector<std::string> names, units;
  for (const auto& p : cfg.profiles) {
    if (!(p.lat_width > 0)) throw ConfigError("profile width must be positive for " + p.variable);
    names.push_back(p.variable);
    units.push_back(p.units);
  }
  fieldkit::GriddedSeries out(grid, names, units, traj.time);
  const double step = traj.lon[1] - traj.lon[0];

  std::vector<std::pair<int, double>> lonw(grid.n_lon);
  for (int i = 0; i < grid.n_lon; ++i) lonw[i] = bracket(grid.lon_center(i), traj.lon[0], step, nx);
  std::vector<double> latw(grid.n_lat);

  const auto kernel = smoothing_kernel(cfg.noise_length);
  const int half = static_cast<int>(kernel.size() / 2);

  for (std::size_t v = 0; v < cfg.profiles.size(); ++v) {
    const auto& prof = cfg.profiles[v];
    const Eigen::MatrixXd& src = prof.source == TwinSource::T   ? traj.T
                                 : prof.source == TwinSource::H ? traj.H
                                 : prof.source == TwinSource::U ? traj.U
                                                                : traj.taux;
    for (int j = 0; j < grid.n_lat; ++j) {
      const double y = grid.lat_center(j) / prof.lat_width;
      latw[j] = std::exp(-y * y);
    }
    double amp = 0;
    if (cfg.noise_level > 0 && src.size() > 1) {
      const double mean = src.mean();
      amp = cfg.noise_level * prof.scale * std::sqrt((src.array() - mean).square().sum() / (src.size() - 1));
    }
    std::vector<double> white(grid.cells()), tmp(grid.cells());
    for (std::size_t t = 0; t < out.n_time(); ++t) {
      auto f = out.field(t, v);
      for (int i = 0; i < grid.n_lon; ++i) {
        const auto [i0, w] = lonw[i];
        const double eq = prof.scale * ((1 - w) * src(static_cast<Eigen::Index>(t), i0) +
                                        w * src(static_cast<Eigen::Index>(t), std::min(i0 + 1, nx - 1)));
        for (int j = 0; j < grid.n_lat; ++j) f[static_cast<std::size_t>(j) * grid.n_lon + i] = eq * latw[j];
      }
      if (amp == 0) continue;
      for (std::size_t c = 0; c < grid.cells(); ++c) white[c] = keyed_normal(seed, t, v, c);
      for (int j = 0; j < grid.n_lat; ++j)
        for (int i = 0; i < grid.n_lon; ++i) {
          double s = 0;
          for (int k = -half; k <= half; ++k) {
            const int ii = std::clamp(i + k, 0, grid.n_lon - 1);
            s += kernel[k + half] * white[static_cast<std::size_t>(j) * grid.n_lon + ii];
          }
          tmp[static_cast<std::size_t>(j) * grid.n_lon + i] = s;
        }
      for (int j = 0; j < grid.n_lat; ++j)
        for (int i = 0; i < grid.n_lon; ++i) {
          double s = 0;
          for (int k = -half; k <= half; ++k) {
            const int jj = std::clamp(j + k, 0, grid.n_lat - 1);
            s += kernel[k + half] * tmp[static_cast<std::size_t>(jj) * grid.n_lon + i];
          }
          f[static_cast<std::size_t>(j) * grid.n_lon + i] += amp * s;
        }
    }
  }
  return out;
}

}  // namespace ensobridge::idealized
