#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ensobridge/diagnostics.hpp"
#include "ensobridge/idealized.hpp"
#include "gen.hpp"

using namespace ensobridge;
using namespace ensobridge::idealized;

namespace {

constexpr std::array<double, 6> kNoNoise6{};
constexpr std::array<double, 2> kNoNoise2{};

Cfy22Params quiet_cfy22() {
  Cfy22Params p;
  p.alpha1 = p.alpha2 = p.beta_u = p.beta_h = p.beta_C = p.beta_E = 0;
  p.sigma_u = p.sigma_h = p.sigma_C = p.sigma_E = p.sigma_tau0 = p.sigma_I0 = 0;
  return p;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Independent evaluation of the heating coefficient from its printed form.
double alpha_q_oracle(double Tc, double t, const Cf23Params& p) {
  const double e1 = mean_of(p.eta1), e2 = mean_of(p.eta2);
  const double base = p.q_c * p.q_e * std::exp(p.q_e * p.T_bar) / p.tau_q;
  const double b1 = 1.8 - e2 / 3 + std::pow(0.2 + std::abs(Tc + 0.4) * e2, 2) / 5;
  const double pi2 = 2 * std::numbers::pi;
  const double b2 = 1 + 0.5 * std::sin(pi2 * (t - 1.0 / 12)) + 0.1 * std::sin(pi2 * t) * e2 -
                    0.0625 * std::sin(2 * pi2 * (t - 0.25)) * e1;
  return base * b1 * b2;
}

}  // namespace

TEST_SUITE("idealized") {

TEST_CASE("CFY22 zonal current decays exponentially") {
  auto p = quiet_cfy22();
  Cfy22State s;
  s.u = 1.0;
  const double dt = 1.0 / 360;
  const int steps = static_cast<int>(std::lround(p.time_unit / dt));  // one model time unit
  for (int k = 0; k < steps; ++k) s = step_cfy22(s, p, dt, kNoNoise6);
  CHECK(std::abs(s.u / std::exp(-p.r) - 1) < 1e-3);
}

TEST_CASE("CFY22 wind burst decays at d_tau") {
  auto p = quiet_cfy22();
  Cfy22State s;
  s.tau = 1.0;
  const double dt = 1.0 / 360;
  for (int k = 0; k < 60; ++k) s = step_cfy22(s, p, dt, kNoNoise6);
  // Forward Euler: 60 steps of one sixtieth of a model time unit.
  CHECK(s.tau == doctest::Approx(std::pow(1 - p.d_tau * dt / p.time_unit, 60)).epsilon(1e-12));
  CHECK(std::abs(s.tau / std::exp(-p.d_tau) - 1) < 5e-2);
}

TEST_CASE("CFY22 Walker index rests at m without noise") {
  auto p = quiet_cfy22();
  Cfy22State s;
  s.I = p.m;
  std::array<double, 6> w{1, 1, 1, 1, 1, 1};
  for (int k = 0; k < 500; ++k) s = step_cfy22(s, p, 1.0 / 360, w);
  CHECK(s.I == p.m);
}

TEST_CASE("CFY22 validation and seeds") {
  Cfy22Params p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.max_real_eigenvalue() < 0);
  auto bad = p;
  bad.r = -2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  SimulationOptions opt;
  opt.years = 3;
  opt.seed = 4;
  auto a = simulate_cfy22(p, opt), b = simulate_cfy22(p, opt);
  CHECK(a.T_E == b.T_E);
  CHECK(a.time.size() == 36);
  opt.seed = 5;
  auto c = simulate_cfy22(p, opt);
  CHECK(std::abs(c.T_E.back() - a.T_E.back()) > 1e-6);
  opt.fixed_I = 0.2;
  for (double I : simulate_cfy22(p, opt).I) CHECK(I == 0.2);
}

TEST_CASE("regression reconstruction") {
  RegressionMap map{{1, 2, 3}, {0.5, -1, 4}};
  CHECK(reconstruct_sst(1, 0, map) == map.r_C);
  for (double v : reconstruct_sst(0, 0, map)) CHECK(v == 0.0);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.normal(), tc = rng.normal(), te = rng.normal();
    auto lhs = reconstruct_sst(a * tc, a * te, map);
    auto rhs = reconstruct_sst(tc, te, map);
    for (std::size_t k = 0; k < lhs.size(); ++k) CHECK(lhs[k] == doctest::Approx(a * rhs[k]).epsilon(1e-12));
  }
  // Exact recovery from noiseless data.
  Eigen::MatrixXd sst(30, 3);
  std::vector<double> TC(30), TE(30);
  for (int t = 0; t < 30; ++t) {
    TC[t] = rng.normal();
    TE[t] = rng.normal();
    auto row = reconstruct_sst(TC[t], TE[t], map);
    for (int x = 0; x < 3; ++x) sst(t, x) = row[x];
  }
  auto fit = fit_regression(sst, TC, TE);
  for (int x = 0; x < 3; ++x) {
    CHECK(fit.r_C[x] == doctest::Approx(map.r_C[x]).epsilon(1e-10));
    CHECK(fit.r_E[x] == doctest::Approx(map.r_E[x]).epsilon(1e-10));
  }
}

TEST_CASE("heating coefficient matches its closed form") {
  auto p = Cf23Params::defaults();
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const double Tc = gen::uniform(rng, 1, 1, -3, 3)(0, 0), t = rng.uniform() * 5;
    CHECK(alpha_q(Tc, t, p) == doctest::Approx(alpha_q_oracle(Tc, t, p)).epsilon(1e-13));
  }
  // Minimum of the quadratic at T_C = -0.4, stronger damping away from it.
  const double t = 0.3;
  CHECK(alpha_q(-0.4, t, p) < alpha_q(-0.39, t, p));
  CHECK(alpha_q(-0.4, t, p) < alpha_q(-0.41, t, p));
  for (int k = 0; k < 50; ++k) {
    const double a = gen::uniform(rng, 1, 1, -3, 3)(0, 0), b = gen::uniform(rng, 1, 1, -3, 3)(0, 0);
    if (std::abs(std::abs(a + 0.4) - std::abs(b + 0.4)) < 1e-9) continue;
    const bool a_far = std::abs(a + 0.4) > std::abs(b + 0.4);
    CHECK((alpha_q(a, t, p) > alpha_q(b, t, p)) == a_far);
  }
  // The seasonal factor averages to one over a year.
  const int n = 360;
  double acc = 0;
  for (int k = 0; k < n; ++k) acc += alpha_q(-0.4, static_cast<double>(k) / n, p);
  const double beta1_min = 1.8 - mean_of(p.eta2) / 3 + 0.2 * 0.2 / 5;
  CHECK(acc / n == doctest::Approx(p.alpha_base() * beta1_min).epsilon(1e-12));
}

TEST_CASE("atmosphere response") {
  auto p = Cf23Params::defaults();
  std::vector<double> zero(p.n_x, 0.0);
  auto r0 = solve_atmosphere(zero, p);
  for (int j = 0; j < p.n_x; ++j) {
    CHECK(r0.u[j] == 0.0);
    CHECK(r0.theta[j] == 0.0);
  }

  Rng rng(5);
  std::vector<double> E(p.n_x), E3(p.n_x);
  for (int j = 0; j < p.n_x; ++j) E3[j] = 3 * (E[j] = rng.normal());
  auto r1 = solve_atmosphere(E, p), r3 = solve_atmosphere(E3, p);
  for (int j = 0; j < p.n_x; ++j) CHECK(r3.u[j] == doctest::Approx(3 * r1.u[j]).epsilon(1e-12));

  // Dense periodic operators solved directly.
  const int n = p.n_atm;
  const double dx = p.dx();
  const double aK = p.chi_A / (2 * (1 - p.Q_bar)), aR = p.chi_A / (3 * (1 - p.Q_bar));
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n), B = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = p.eps_A + 1 / dx;
    A(i, (i - 1 + n) % n) = -1 / dx;
    B(i, i) = p.eps_A + 1 / (3 * dx);
    B(i, (i + 1) % n) = -1 / (3 * dx);
  }
  std::vector<double> spike(p.n_x, 0.0);
  spike[20] = 1.0;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  f(20) = 1.0;
  const Eigen::VectorXd K = A.lu().solve(-aK * f), R = B.lu().solve(-aR * f);
  auto r = solve_atmosphere(spike, p);
  for (int j = 0; j < p.n_x; ++j) {
    CHECK(r.u[j] == doctest::Approx(K(j) - R(j)).epsilon(1e-12).scale(1e-3));
    CHECK(r.theta[j] == doctest::Approx(-(K(j) + R(j))).epsilon(1e-12).scale(1e-3));
  }
}

TEST_CASE("CF23 zero state is a fixed point") {
  auto p = Cf23Params::defaults();
  CHECK(p.sigma_p(0) == 1.6);
  auto s = Cf23State::zeros(p.n_x);
  for (int k = 0; k < 200; ++k) s = step_cf23(s, p, 1.0 / 360, kNoNoise2);
  for (int j = 0; j < p.n_x; ++j) {
    CHECK(s.T[j] == 0.0);
    CHECK(s.H[j] == 0.0);
    CHECK(s.U[j] == 0.0);
  }
}

TEST_CASE("CF23 SST relaxes like the scalar heating ODE without feedbacks") {
  auto p = Cf23Params::defaults();
  std::fill(p.eta1.begin(), p.eta1.end(), 0.0);
  std::fill(p.eta2.begin(), p.eta2.end(), 0.0);
  std::fill(p.c2.begin(), p.c2.end(), 0.05);
  p.gamma = 0;
  auto s = Cf23State::zeros(p.n_x);
  std::fill(s.T.begin(), s.T.end(), 1.5);
  const double dt = 1.0 / 360, dtm = dt / p.time_unit;
  double T = 1.5, t = 0;
  for (int k = 0; k < 720; ++k) {
    T += dtm * (-p.c1 * p.zeta * alpha_q(T, t, p) * T + 0.05);
    t += dt;
    s = step_cf23(s, p, dt, kNoNoise2);
  }
  for (int j = 0; j < p.n_x; ++j) CHECK(s.T[j] == doctest::Approx(T).epsilon(1e-12));
  CHECK(T < 1.0);
}

TEST_CASE("CF23 CFL and determinism") {
  auto p = Cf23Params::defaults();
  auto s = Cf23State::zeros(p.n_x);
  CHECK_THROWS_AS(step_cf23(s, p, 1.0 / 12, kNoNoise2), ConfigError);

  SimulationOptions opt;
  opt.years = 2;
  opt.seed = 3;
  auto a = simulate_cf23(p, opt), b = simulate_cf23(p, opt);
  CHECK(a.T == b.T);
  CHECK(a.time.size() == 24);
  opt.seed = 4;
  auto c = simulate_cf23(p, opt);
  CHECK((a.T - c.T).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("pseudo-observation shapes") {
  auto p = Cf23Params::defaults();
  SimulationOptions opt;
  opt.years = 42;
  auto traj = simulate_cf23(p, opt);
  auto obs = generate_pseudo_obs(traj, PseudoObsSpec::cf23_default());
  CHECK(obs.n_o() == 98);
  CHECK(obs.values.rows() == 504);
  CHECK(obs.values(7, 49 + 3) == traj.H(7, 3));
  CHECK(obs.values(7, 3) == traj.T(7, 3));
  auto spec = PseudoObsSpec::cf23_default();
  spec.cadence = 3;
  CHECK(generate_pseudo_obs(traj, spec).values.rows() == 168);
  spec.variables = {"SALT"};
  CHECK_THROWS_AS(generate_pseudo_obs(traj, spec), DataError);

  SimulationOptions o2;
  o2.years = 42;
  auto cfy = simulate_cfy22(Cfy22Params{}, o2);
  auto obs2 = generate_pseudo_obs(cfy, PseudoObsSpec::cfy22_default());
  CHECK(obs2.n_o() == 2);
  CHECK(obs2.values.rows() == 504);
  CHECK_THROWS_AS(generate_pseudo_obs(cfy, PseudoObsSpec::cf23_default()), ConfigError);
}

TEST_CASE("obs anomaly removes monthly means") {
  ObsStream o;
  o.time = fieldkit::monthly_axis({2000, 1}, 36);
  o.values.resize(36, 2);
  for (int t = 0; t < 36; ++t) o.values.row(t) << t % 12, 3.0 + (t / 12);
  auto a = obs_anomaly(o);
  for (int t = 0; t < 36; ++t) {
    CHECK(a.values(t, 0) == 0.0);
    CHECK(a.values(t, 1) == doctest::Approx((t / 12) - 1.0));
  }
}

TEST_CASE("twin fields follow the equatorial trajectory") {
  auto p = Cf23Params::defaults();
  SimulationOptions opt;
  opt.years = 1;
  auto traj = simulate_cf23(p, opt);
  auto cfg = TwinConfig::defaults();
  cfg.noise_level = 0;
  const auto line = fieldkit::line_grid(140, 280, 49);
  auto f = twin_generate(traj, cfg, line, 1);
  const auto sst = f.var_index("SST");
  for (std::size_t t = 0; t < f.n_time(); ++t)
    for (int i = 0; i < 49; ++i)
      CHECK(f.at(t, sst, 0, i) == doctest::Approx(traj.T(static_cast<Eigen::Index>(t), i)).epsilon(1e-12));

  auto zero = traj;
  for (auto* m : {&zero.T, &zero.H, &zero.U, &zero.taux}) m->setZero();
  auto z = twin_generate(zero, cfg, fieldkit::build_grid(140, 280, -8, 8, 2.5), 1);
  for (double v : z.data()) CHECK(v == 0.0);
  cfg.noise_level = 0.05;
  auto z2 = twin_generate(zero, cfg, fieldkit::build_grid(140, 280, -8, 8, 2.5), 1);
  for (double v : z2.data()) CHECK(v == 0.0);
}

TEST_CASE("biased twin shifts variability westward") {
  auto ref = Cf23Params::defaults();
  auto biased = apply_bias(ref, Cf23Bias{});
  SimulationOptions opt;
  opt.years = 40;
  opt.spinup_years = 2;
  opt.seed = 21;
  auto ratio = [&](const Cf23Params& p) {
    auto traj = simulate_cf23(p, opt);
    std::vector<double> n3, n4;
    for (Eigen::Index t = 0; t < traj.T.rows(); ++t) {
      double a = 0, b = 0;
      int na = 0, nb = 0;
      for (int j = 0; j < p.n_x; ++j) {
        const double lon = traj.lon[j];
        if (lon >= 210 && lon <= 270) a += traj.T(t, j), ++na;
        if (lon >= 160 && lon <= 210) b += traj.T(t, j), ++nb;
      }
      n3.push_back(a / na);
      n4.push_back(b / nb);
    }
    return diagnostics::stddev(n3) / diagnostics::stddev(n4);
  };
  CHECK(ratio(biased) < ratio(ref));
}

}
