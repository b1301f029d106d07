#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ensobridge/assimilator.hpp"
#include "ensobridge/curriculum.hpp"
#include "ensobridge/idealized.hpp"
#include "ensobridge/surrogate.hpp"

namespace ensobridge::pipeline {

namespace fs = std::filesystem;

struct GridSpec {
  double lon_min = 140, lon_max = 280, lat_min = -8, lat_max = 8, resolution = 2.5;
};

struct GenerateSpec {
  std::string model = "cf23";  // pseudo-observation model: cf23 | cfy22
  double om_years = 165, rea_years = 42, spinup_years = 5;
  int om_start_year = 1850, rea_start_year = 1980;
  double calibration_years = 40;
  int calibration_iterations = 3;
  double eta1_bias = 0.6, eta2_bias = 1.4;
  double noise_level = 0.05, noise_length = 2.0;
  std::string obs_variables = "SST,H";
  int obs_stride = 1;  // every k-th CF23 node
};

struct CodecSpec {
  std::string kind = "pod";  // pod | nonlinear
  double energy = 0.99;
  int max_latent = 32;
  int latent = 0;  // 0: sized by energy
  std::string lambda = "auto";  // auto | number
  double lambda_ratio = 1.0;
  std::string encoder_hidden, decoder_hidden;  // comma separated
  int epochs = 60, batch = 64;
  double learning_rate = 0.05, momentum = 0.9;
};

struct ScenarioSpec {
  std::string regime = "all";  // free | 0 | 1 | all
  double years = 42;
};

// The learned surrogate contracts ensemble spread far faster than the
// conceptual models do, so the twin runs need stronger inflation.
inline assim::AssimConfig twin_assim_defaults() {
  assim::AssimConfig a;
  a.alpha = 3.0;
  return a;
}

struct RunConfig {
  std::uint64_t seed = 2024;
  std::string out = "ensobridge_out";
  int threads = 1;
  GridSpec grid;
  GenerateSpec generate;
  CodecSpec codec;
  surrogate::SurrogateConfig surrogate;
  surrogate::CurriculumSchedule curriculum;
  assim::AssimConfig assim = twin_assim_defaults();
  ScenarioSpec scenario;

  void validate() const;
  // Stage seeds derived from the run seed.
  std::uint64_t stage_seed(const std::string& stage) const;
};

RunConfig load_config(const fs::path& file, RunConfig base = {});
// Applies "section.key" = value; throws ConfigError for unknown keys.
void set_option(RunConfig& cfg, const std::string& key, const std::string& value);
// INI text with every key, its value and a one-line description.
std::string format_config(const RunConfig& cfg);
nlohmann::json config_json(const RunConfig& cfg);

struct ArtifactStore {
  fs::path root;
  fs::path datasets() const { return root / "datasets"; }
  fs::path om() const { return datasets() / "om"; }
  fs::path rea() const { return datasets() / "rea"; }
  fs::path obs() const { return datasets() / "obs"; }
  fs::path codec() const { return root / "codecs" / "codec"; }
  fs::path surrogate() const { return root / "surrogates" / "surrogate"; }
  fs::path run(const std::string& name) const { return root / "runs" / name; }
};

struct GenerateResult {
  std::string om_hash, rea_hash, obs_hash;
};

GenerateResult cmd_generate(const RunConfig& cfg);
nlohmann::json cmd_train_codec(const RunConfig& cfg);
nlohmann::json cmd_train_surrogate(const RunConfig& cfg);

// Runs the monthly cycle against an observation dataset (default: the
// generated pseudo-obs) and writes runs/<name>.
fs::path cmd_assimilate(const RunConfig& cfg, const std::string& name = "bridged",
                        const std::optional<fs::path>& obs_dir = {});

// Regenerates pseudo-obs with I clamped per regime and reruns only the
// assimilation. Returns a summary with Nino3/Nino4 std per regime.
nlohmann::json cmd_scenario(const RunConfig& cfg, const std::string& regime);

// Report bundle for a run directory against a reference dataset; an
// optional baseline dataset (e.g. the biased OM) is scored the same way.
nlohmann::json cmd_diagnose(const fs::path& run_dir, const fs::path& reference_dir,
                            const std::optional<fs::path>& baseline_dir = {},
                            const std::optional<fs::path>& out_dir = {});

}  // namespace ensobridge::pipeline
