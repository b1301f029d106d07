#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ensobridge/pipeline.hpp"
#include "gen.hpp"

using namespace ensobridge;
using namespace ensobridge::pipeline;

namespace {

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.out = out.string();
  for (auto [k, v] : std::vector<std::pair<const char*, const char*>>{
           {"generate.om_years", "20"},
           {"generate.rea_years", "10"},
           {"generate.spinup_years", "1"},
           {"generate.calibration_years", "5"},
           {"generate.calibration_iterations", "1"},
           {"codec.max_latent", "6"},
           {"surrogate.max_epochs", "3"},
           {"curriculum.e_f", "2"},
           {"assim.members", "12"},
           {"scenario.years", "10"}})
    set_option(c, k, v);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config text round trips and rejects unknown keys") {
  auto dir = gen::scratch("config");
  RunConfig c;
  set_option(c, "assim.alpha", "1.5");
  set_option(c, "codec.kind", "nonlinear");
  std::ofstream(dir / "run.ini") << format_config(c);
  auto back = load_config(dir / "run.ini");
  CHECK(config_json(back) == config_json(c));
  CHECK_THROWS_AS(set_option(c, "assim.beta", "1"), ConfigError);
  CHECK_THROWS_AS(set_option(c, "assim.alpha", "fast"), ConfigError);
  std::ofstream(dir / "bad.ini") << "[assim]\nwidth = 3\n";
  CHECK_THROWS_AS(load_config(dir / "bad.ini"), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.ini"), ConfigError);
  RunConfig v;
  set_option(v, "assim.alpha", "0.5");
  CHECK_THROWS_AS(v.validate(), ConfigError);
}

TEST_CASE("stage seeds are distinct and stable") {
  RunConfig a, b;
  CHECK(a.stage_seed("generate") == b.stage_seed("generate"));
  CHECK(a.stage_seed("generate") != a.stage_seed("assimilate"));
  b.seed = 7;
  CHECK(a.stage_seed("generate") != b.stage_seed("generate"));
}

TEST_CASE("default twin sizes") {
  RunConfig c;
  CHECK(c.generate.om_years == 165);
  CHECK(c.generate.rea_years == 42);
  CHECK(c.assim.members == 50);
}

TEST_CASE("missing inputs name the path") {
  auto dir = gen::scratch("missing");
  auto c = small_config(dir);
  try {
    cmd_train_codec(c);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find((dir / "datasets").string()) != std::string::npos);
  }
}

TEST_CASE("small pipeline end to end") {
  auto dir = gen::scratch("pipe");
  auto c = small_config(dir);
  ArtifactStore store{dir};

  auto g1 = cmd_generate(c);
  auto c2 = small_config(gen::scratch("pipe_again"));
  auto g2 = cmd_generate(c2);
  CHECK(g1.om_hash == g2.om_hash);
  CHECK(g1.rea_hash == g2.rea_hash);
  CHECK(g1.obs_hash == g2.obs_hash);

  cmd_train_codec(c);
  CHECK(lines(store.codec() / "history.csv") >= 1);
  auto s = cmd_train_surrogate(c);
  CHECK(s.contains("val_mse"));
  CHECK(lines(store.surrogate() / "history.csv") == 1 + 3);
  CHECK(slurp(store.surrogate() / "history.csv").rfind("epoch,train,val,p_rea\n", 0) == 0);

  auto run = cmd_assimilate(c, "bridged");
  const std::size_t cycles = lines(run / "cycle_log.csv") - 1;
  CHECK(cycles == 10 * 12 - static_cast<std::size_t>(c.surrogate.context));

  auto free_cfg = c;
  free_cfg.assim.enabled = false;
  auto free_run = cmd_assimilate(free_cfg, "free");
  auto free_again = cmd_assimilate(free_cfg, "free2");
  CHECK(slurp(free_run / "nino3.csv") == slurp(free_again / "nino3.csv"));
  CHECK(slurp(free_run / "nino3.csv") != slurp(run / "nino3.csv"));

  auto self = cmd_diagnose(run, run / "mean");
  CHECK(self["distances"]["nino3_pdf_l1"].get<double>() == 0.0);
  CHECK(self["distances"]["nino4_pdf_l1"].get<double>() == 0.0);
  CHECK(self["distances"]["std_profile_rmse"].get<double>() == 0.0);

  auto rep = cmd_diagnose(run, store.rea(), store.om());
  for (const char* key : {"format", "version", "run", "reference", "distances", "events", "notices", "stats",
                          "std_profile", "baseline", "improvement"})
    CHECK(rep.contains(key));
  CHECK(rep["format"] == "ensobridge-report");
  CHECK(rep["reference"]["aligned"].get<bool>());
  CHECK(fs::exists(run / "report" / "report.json"));
  auto rep2 = cmd_diagnose(run, store.rea(), store.om());
  CHECK(rep == rep2);

  auto summary = cmd_scenario(c, "free");
  CHECK(summary.contains("free"));
  CHECK(summary["free"]["ratio"].get<double>() > 0);
  CHECK_THROWS_AS(cmd_scenario(c, "2"), ConfigError);
}

TEST_CASE("surrogate refuses a codec it was not trained with") {
  auto dir = gen::scratch("pipe_hash");
  auto c = small_config(dir);
  cmd_generate(c);
  cmd_train_codec(c);
  cmd_train_surrogate(c);
  set_option(c, "codec.max_latent", "4");
  cmd_train_codec(c);
  CHECK_THROWS_AS(cmd_assimilate(c, "x"), DataError);
}

}
