// ensobridge command-line entry point.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ensobridge/pipeline.hpp"

namespace pl = ensobridge::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Latent-space bridging of an operational-model twin with idealized ENSO models"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--seed", seed, "base seed");
  app.add_option("--out", out, "artifact root directory");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--set", overrides, "override as section.key=value (repeatable)");

  auto* gen = app.add_subcommand("generate", "simulate and write the OM, reference and pseudo-obs datasets");
  auto* codec = app.add_subcommand("train-codec", "fit the latent codec");
  auto* sur = app.add_subcommand("train-surrogate", "train the LSTM surrogate on augmented states");
  auto* as = app.add_subcommand("assimilate", "run the monthly EnKF cycle and decode the analysis");
  std::string run_name = "bridged";
  std::optional<std::string> obs_dir;
  as->add_option("--name", run_name, "run name under runs/");
  as->add_option("--obs", obs_dir, "observation dataset (default datasets/obs)");
  auto* sc = app.add_subcommand("scenario", "rerun assimilation with I clamped (free, 0, 1 or all)");
  std::optional<std::string> regime;
  sc->add_option("--regime", regime, "free, 0, 1 or all");
  auto* dg = app.add_subcommand("diagnose", "report bundle for a run against a reference dataset");
  std::string run_dir, ref_dir;
  std::optional<std::string> base_dir, report_dir;
  dg->add_option("--run", run_dir, "run directory")->required();
  dg->add_option("--reference", ref_dir, "reference dataset directory")->required();
  dg->add_option("--baseline", base_dir, "baseline dataset directory");
  dg->add_option("--report-dir", report_dir, "output directory (default <run>/report)");
  auto* pc = app.add_subcommand("print-config", "print the effective configuration with defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    pl::RunConfig cfg;
    if (!config_path.empty()) cfg = pl::load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ensobridge::ConfigError("--set expects section.key=value, got '" + kv + "'");
      pl::set_option(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (out) cfg.out = *out;
    if (threads) cfg.threads = *threads;
    if (regime) cfg.scenario.regime = *regime;
    cfg.validate();

    if (*pc) {
      std::cout << pl::format_config(cfg);
    } else if (*gen) {
      const auto r = pl::cmd_generate(cfg);
      std::cout << "om " << r.om_hash << "\nreference " << r.rea_hash << "\nobs " << r.obs_hash << '\n';
    } else if (*codec) {
      std::cout << pl::cmd_train_codec(cfg).dump(1) << '\n';
    } else if (*sur) {
      std::cout << pl::cmd_train_surrogate(cfg).dump(1) << '\n';
    } else if (*as) {
      std::optional<std::filesystem::path> od;
      if (obs_dir) od = *obs_dir;
      std::cout << pl::cmd_assimilate(cfg, run_name, od).string() << '\n';
    } else if (*sc) {
      std::cout << pl::cmd_scenario(cfg, cfg.scenario.regime).dump(1) << '\n';
    } else if (*dg) {
      std::optional<std::filesystem::path> b, o;
      if (base_dir) b = *base_dir;
      if (report_dir) o = *report_dir;
      const auto rep = pl::cmd_diagnose(run_dir, ref_dir, b, o);
      std::cout << rep.at("distances").dump(1) << '\n';
    }
  } catch (const ensobridge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ensobridge::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const ensobridge::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
