#include <doctest.h>

#include <cmath>

#include "ensobridge/assimilator.hpp"
#include "gen.hpp"

using namespace ensobridge;
using namespace ensobridge::assim;

namespace {

// Direct evaluation of the fifth-order piecewise rational taper.
double gc_oracle(double r, double c) {
  const double z = std::abs(r) / c;
  if (z <= 1)
    return -0.25 * std::pow(z, 5) + 0.5 * std::pow(z, 4) + 0.625 * std::pow(z, 3) - 5.0 / 3.0 * z * z + 1;
  if (z < 2)
    return std::pow(z, 5) / 12 - 0.5 * std::pow(z, 4) + 0.625 * std::pow(z, 3) + 5.0 / 3.0 * z * z - 5 * z + 4 -
           2.0 / (3 * z);
  return 0;
}

MatrixXd sample_cov(const MatrixXd& X) {
  const MatrixXd A = X.colwise() - X.rowwise().mean();
  return A * A.transpose() / static_cast<double>(X.cols() - 1);
}

}  // namespace

TEST_SUITE("assimilator") {

TEST_CASE("Gaspari-Cohn values") {
  for (double c : {0.1, 0.15, 1.0, 7.0}) {
    CHECK(gaspari_cohn(0, c) == 1.0);
    CHECK(std::abs(gaspari_cohn(c, c) - 5.0 / 24) < 1e-12);
    CHECK(gaspari_cohn(2 * c, c) == 0.0);
    CHECK(gaspari_cohn(3 * c, c) == 0.0);
  }
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const double c = 0.05 + rng.uniform(), r = 2.5 * c * rng.uniform();
    CHECK(std::abs(gaspari_cohn(r, c) - gc_oracle(r, c)) < 1e-12);
    if (r > 0) CHECK_THROWS_AS(gaspari_cohn(-r, c), ConfigError);
  }
  double prev = 1.0;
  for (int k = 0; k <= 2000; ++k) {
    const double v = gaspari_cohn(2.0 * k / 2000, 1.0);
    CHECK(v <= prev + 1e-15);
    CHECK(v >= 0.0);
    prev = v;
  }
  // Continuity across the branch point.
  CHECK(std::abs(gaspari_cohn(1 - 1e-9, 1) - gaspari_cohn(1 + 1e-9, 1)) < 1e-8);
}

TEST_CASE("localization matrix structure") {
  const int nb = 49;
  std::vector<int> pos, len;
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < nb; ++i) pos.push_back(i), len.push_back(nb);
  const MatrixXd L = build_localization(5, pos, len, 0.15);
  CHECK(L.rows() == 5 + 98);
  CHECK(L.cols() == 98);
  CHECK(L.topRows(5).isOnes());
  for (int i = 0; i < 98; ++i) CHECK(L(5 + i, i) == 1.0);
  // Banded: zero beyond 2c in normalized distance, symmetric blocks.
  for (int i = 0; i < 98; ++i)
    for (int j = 0; j < 98; ++j) {
      const double d = std::abs(pos[i] - pos[j]) / static_cast<double>(nb);
      if (d >= 0.3) CHECK(L(5 + i, j) == 0.0);
      CHECK(L(5 + i, j) == L(5 + j, i));
      CHECK(L(5 + i, j) == doctest::Approx(gc_oracle(d, 0.15)).epsilon(1e-12));
    }
  // SST and H at the same longitude share full weight.
  CHECK(L(5 + 3, 49 + 3) == 1.0);
  CHECK_THROWS_AS(build_localization(1, {0, 1}, {2}, 0.1), ConfigError);
  CHECK_THROWS_AS(build_localization(1, {3}, {2}, 0.1), ConfigError);
}

TEST_CASE("inflation algebra") {
  MatrixXd two(1, 2);
  two << 0, 2;
  const MatrixXd out = inflate(two, 1.09);
  CHECK(out(0, 0) == doctest::Approx(-0.09).epsilon(1e-14));
  CHECK(out(0, 1) == doctest::Approx(2.09).epsilon(1e-14));
  CHECK(out.mean() == 1.0);
  CHECK_THROWS_AS(inflate(two, 0.9), ConfigError);

  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd X = gen::normal(rng, gen::between(rng, 1, 6), gen::between(rng, 2, 40));
    CHECK(inflate(X, 1.0) == X);
    const double a = 1 + rng.uniform();
    const MatrixXd Y = inflate(X, a);
    CHECK((Y.rowwise().mean() - X.rowwise().mean()).cwiseAbs().maxCoeff() < 1e-14);
    const MatrixXd C0 = sample_cov(X), C1 = sample_cov(Y);
    CHECK((C1 - a * a * C0).norm() <= 1e-12 * C0.norm() * a * a);
  }
}

TEST_CASE("robust inverse") {
  AssimConfig cfg;
  auto id = robust_inverse(MatrixXd::Identity(3, 3), cfg);
  CHECK(id.inverse.isIdentity(1e-15));
  CHECK(!id.nugget_applied);

  MatrixXd d = MatrixXd::Zero(2, 2);
  d(0, 0) = 1;
  cfg.cond_threshold = std::numeric_limits<double>::infinity();
  auto pinv = robust_inverse(d, cfg);
  CHECK(pinv.inverse(0, 0) == doctest::Approx(1.0));
  CHECK(pinv.inverse(1, 1) == 0.0);

  cfg.cond_threshold = 1e12;
  MatrixXd e = MatrixXd::Zero(2, 2);
  e(0, 0) = 1;
  e(1, 1) = 1e-14;
  auto nug = robust_inverse(e, cfg);
  CHECK(nug.nugget_applied);
  const double delta = std::max(cfg.nugget_rel * 1.0, cfg.nugget_floor);
  CHECK(nug.inverse(0, 0) == doctest::Approx(1 / (1 + delta)).epsilon(1e-12));
  CHECK(nug.inverse(1, 1) == doctest::Approx(1 / (1e-14 + delta)).epsilon(1e-9));

  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd S = gen::spd(rng, gen::between(rng, 1, 8), 0.1, 10);
    AssimConfig c2;
    CHECK((robust_inverse(S, c2).inverse * S - MatrixXd::Identity(S.rows(), S.cols())).norm() < 1e-10);
  }
  CHECK_THROWS_AS(robust_inverse(MatrixXd::Zero(2, 2), cfg), NumericalError);
}

TEST_CASE("gain and capping") {
  MatrixXd P(1, 1), Sinv(1, 1);
  P << 1;
  Sinv << 0.5;  // S = P + R = 2
  auto g = kalman_gain(P, Sinv, 1e4);
  CHECK(g.K(0, 0) == 0.5);
  CHECK(!g.cap_applied);

  Rng rng(4);
  const MatrixXd K = gen::normal(rng, 4, 3);
  const double n = spectral_norm(K);
  auto capped = kalman_gain(K, MatrixXd::Identity(3, 3), n / 2);
  CHECK(capped.cap_applied);
  CHECK(spectral_norm(capped.K) == doctest::Approx(n / 2).epsilon(1e-12));
  CHECK(capped.norm == doctest::Approx(n / 2).epsilon(1e-12));
  auto free = kalman_gain(K, MatrixXd::Identity(3, 3), 2 * n);
  CHECK(free.K == K);
}

TEST_CASE("observation error uses the mean square per channel") {
  MatrixXd y(4, 2);
  y << 1, 0, -1, 0, 1, 0, -1, 0;
  const VectorXd R = observation_error(y, 0.04, 1e-8);
  CHECK(R(0) == doctest::Approx(0.04));
  CHECK(R(1) == 1e-8);
}

TEST_CASE("zero observation noise pins the observed block") {
  Rng rng(5);
  AssimConfig cfg;
  cfg.alpha = 1.0;
  ObservationModel obs{2, VectorXd::Constant(2, 1e-12), {}};
  const MatrixXd fc = gen::normal(rng, 2, 40);
  VectorXd y(2);
  y << 0.3, -0.7;
  const MatrixXd an = enkf_analysis(fc, y, obs, cfg, 0);
  CHECK((an.colwise() - y).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("zero innovation leaves the inflated forecast") {
  Rng rng(6);
  AssimConfig cfg;
  cfg.perturb_obs = false;
  MatrixXd fc = gen::normal(rng, 5, 12);
  VectorXd y(2);
  y << 0.2, 0.4;
  fc.bottomRows(2).colwise() = y;
  ObservationModel obs{2, VectorXd::Constant(2, 0.1), {}};
  AnalysisInfo info;
  const MatrixXd an = enkf_analysis(fc, y, obs, cfg, 3, &info);
  CHECK(an == inflate(fc, cfg.alpha));
  CHECK(info.innovation_rms < 1e-15);
}

TEST_CASE("scalar analysis matches the Kalman update in expectation") {
  // Large ensemble, unperturbed mean update: mean moves by K (y - mean).
  Rng rng(7);
  AssimConfig cfg;
  cfg.alpha = 1.0;
  cfg.perturb_obs = false;
  const MatrixXd fc = gen::normal(rng, 1, 5000);
  const double m = fc.mean(), P = sample_cov(fc)(0, 0), R = 0.5;
  ObservationModel obs{1, VectorXd::Constant(1, R), {}};
  VectorXd y(1);
  y << 1.0;
  const MatrixXd an = enkf_analysis(fc, y, obs, cfg, 0);
  const double K = P / (P + R);
  CHECK(an.mean() == doctest::Approx(m + K * (1 - m)).epsilon(1e-12));
  CHECK(sample_cov(an)(0, 0) == doctest::Approx((1 - K) * (1 - K) * P).epsilon(1e-10));
}

TEST_CASE("perturbations depend on member keys, not positions") {
  Rng rng(8);
  AssimConfig cfg;
  const MatrixXd fc = gen::normal(rng, 3, 6);
  ObservationModel obs{1, VectorXd::Constant(1, 0.2), {}};
  VectorXd y(1);
  y << 0.1;
  std::vector<std::uint64_t> keys{0, 1, 2, 3, 4, 5};
  const MatrixXd a = enkf_analysis(fc, y, obs, cfg, 9, nullptr, keys);
  CHECK(a == enkf_analysis(fc, y, obs, cfg, 9));
  CHECK(a != enkf_analysis(fc, y, obs, cfg, 10));
  CHECK_THROWS_AS(enkf_analysis(fc, y, obs, cfg, 9, nullptr, {1, 2}), DataError);
  VectorXd bad(2);
  CHECK_THROWS_AS(enkf_analysis(fc, bad, obs, cfg, 0), DataError);
}

TEST_CASE("taper modes agree without localization") {
  Rng rng(9);
  const MatrixXd fc = gen::normal(rng, 6, 30);
  ObservationModel obs{3, VectorXd::Constant(3, 0.3), {}};
  const VectorXd y = gen::normal(rng, 3, 1);
  AssimConfig a, b, c;
  a.innovation_taper = InnovationTaper::None;
  b.innovation_taper = InnovationTaper::Obs;
  c.innovation_taper = InnovationTaper::Split;
  const MatrixXd ra = enkf_analysis(fc, y, obs, a, 1);
  CHECK((ra - enkf_analysis(fc, y, obs, b, 1)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((ra - enkf_analysis(fc, y, obs, c, 1)).cwiseAbs().maxCoeff() < 1e-13);
  // With an all-ones taper the three modes coincide too.
  obs.L = MatrixXd::Ones(6, 3);
  CHECK((ra - enkf_analysis(fc, y, obs, b, 1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ra - enkf_analysis(fc, y, obs, c, 1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(innovation_taper_from_string(to_string(InnovationTaper::Split)) == InnovationTaper::Split);
  CHECK_THROWS_AS(innovation_taper_from_string("diag"), ConfigError);
}

TEST_CASE("analysis reduces spread and moves toward the observation") {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const int n_l = gen::between(rng, 1, 4), n_o = gen::between(rng, 1, 4);
    const MatrixXd fc = gen::normal(rng, n_l + n_o, 200);
    ObservationModel obs{n_o, VectorXd::Constant(n_o, 0.1 + rng.uniform()), {}};
    const VectorXd y = gen::normal(rng, n_o, 1);
    AssimConfig cfg;
    cfg.alpha = 1.0;
    cfg.perturb_obs = false;
    const MatrixXd an = enkf_analysis(fc, y, obs, cfg, 0);
    const VectorXd fm = fc.bottomRows(n_o).rowwise().mean(), am = an.bottomRows(n_o).rowwise().mean();
    CHECK((am - y).norm() < (fm - y).norm());
    CHECK(sample_cov(an).trace() < sample_cov(fc).trace());
  }
}

TEST_CASE("cycling with a fixed surrogate") {
  Rng rng(11);
  auto w = surrogate::LstmWeights::random(4, 4, 1, rng);
  std::vector<MatrixXd> ctx{gen::normal(rng, 4, 20) * 0.3, gen::normal(rng, 4, 20) * 0.3};
  // Observations from a different trajectory of the same model.
  std::vector<MatrixXd> truth_ctx{gen::normal(rng, 4, 1) * 0.3, gen::normal(rng, 4, 1) * 0.3};
  MatrixXd obs(30, 2);
  for (int t = 0; t < 30; ++t) {
    MatrixXd next = forecast_members(w, truth_ctx);
    obs.row(t) = next.bottomRows(2).transpose();
    truth_ctx.erase(truth_ctx.begin());
    truth_ctx.push_back(next);
  }
  ObservationModel model{2, observation_error(obs, 0.04, 1e-8), {}};
  AssimConfig cfg;
  auto on = run_cycle(w, ctx, obs, model, cfg);
  CHECK(on.log.size() == 30);
  CHECK(on.mean.cols() == 30);
  auto again = run_cycle(w, ctx, obs, model, cfg);
  CHECK(on.mean == again.mean);

  cfg.enabled = false;
  auto off = run_cycle(w, ctx, obs, model, cfg, {true});
  std::vector<MatrixXd> c = ctx;
  for (int t = 0; t < 30; ++t) {
    MatrixXd f = forecast_members(w, c);
    CHECK(f == off.members[t]);
    c.erase(c.begin());
    c.push_back(f);
  }
  const double rmse_on = (on.mean.bottomRows(2) - obs.transpose()).norm();
  const double rmse_off = (off.mean.bottomRows(2) - obs.transpose()).norm();
  CHECK(rmse_on < rmse_off);

  auto csv = cycle_log_csv(on.log);
  CHECK(csv.rfind("cycle,innovation_rms,spread_obs_block,gain_norm,nugget_applied,cap_applied\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);
}

TEST_CASE("member forecasts do not depend on the worker count") {
  Rng rng(12);
  auto w = surrogate::LstmWeights::random(6, 5, 2, rng);
  std::vector<MatrixXd> ctx{gen::normal(rng, 6, 37), gen::normal(rng, 6, 37)};
  set_thread_count(1);
  const MatrixXd a = forecast_members(w, ctx);
  set_thread_count(4);
  const MatrixXd b = forecast_members(w, ctx);
  set_thread_count(1);
  CHECK(a == b);
}

TEST_CASE("configuration validation") {
  AssimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  for (auto edit : std::vector<std::function<void(AssimConfig&)>>{
           [](AssimConfig& c) { c.alpha = 0.5; }, [](AssimConfig& c) { c.members = 1; },
           [](AssimConfig& c) { c.localization_radius = 0; }, [](AssimConfig& c) { c.gain_cap = -1; },
           [](AssimConfig& c) { c.r_fraction = -0.1; }}) {
    AssimConfig c;
    edit(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  ObservationModel obs{3, VectorXd::Constant(2, 1.0), {}};
  CHECK_THROWS_AS(obs.validate(5), DataError);
}

}
