#pragma once

#include "lacal/calibration.hpp"
#include "lacal/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lacal {

/// Flat `key = value` text with '#' comments. Keys are dotted names.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile read(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
};

/// Synthetic-truth inputs: alpha per wall region plus the loading inputs.
struct TruthPoint {
  std::array<double, 5> alpha{2.12, 1.42, 2.57, 2.71, 2.78};
  double edp_mmHg = 4.5;
  double esp_mmHg = 29.6;
  double k_peri_kPa_per_um = 0.003;
  double pth = 0.60;

  /// Coordinates in `space` (C inputs, when present, take the fixed C).
  Vector in(const ParameterSpace& space) const;
};

struct NoiseLevel {
  double displacement_mm = 0.2;
  double esv_relative = 0.05;
};

struct PipelineConfig {
  // mesh and forward model
  double radius_mm = 20.0;
  int refinement = 2;
  double thickness_mm = 2.0;
  double roof_cap_deg = 35.0;
  double rim_band_deg = 5.0;
  double rim_amplitude_mm = 4.0;
  double t_es = 0.4;
  double conduit_duration = 0.3;
  double k_vein_kPa_per_um = 0.001;
  int n_steps = 20;
  double unload_tolerance = 0.01;
  double fixed_C_kPa = kFixedC_kPa;

  // designs, emulators and sensitivity
  std::size_t wave1_size = 200;
  std::size_t gsa_n_base = 16384;
  int gsa_bootstrap = 100;
  int gp_restarts = 8;
  int gp_max_iterations = 200;
  int cv_folds = 5;
  int cv_restarts = 2;

  // observations
  std::string observation_source = "synthetic";  // or "file"
  std::string features_file;                      // one-row features CSV when source = file
  TruthPoint truth{};
  NoiseLevel baseline_noise{0.2, 0.05};
  NoiseLevel high_noise{1.0, 0.20};

  // history matching
  double hm_initial_threshold = 3.5;
  double hm_threshold_step = 0.5;
  double hm_final_threshold = 3.0;
  int hm_max_waves = 5;
  std::size_t hm_wave_size = 100;
  std::size_t hm_n_test = 20000;
  double hm_min_reduction = 0.01;

  // sampler
  int mcmc_walkers = 18;
  int mcmc_steps = 20000;
  int mcmc_burn_in = 2000;
  int mcmc_thin = 10;

  // seeds
  std::uint64_t seed_design = 1;
  std::uint64_t seed_train = 2;
  std::uint64_t seed_gsa = 3;
  std::uint64_t seed_hm = 4;
  std::uint64_t seed_mcmc = 5;

  // execution (not part of the hash)
  int threads = 1;
  std::filesystem::path out_dir = "lacal_out";
  bool allow_out_of_range = false;

  /// Apply key = value overrides; unknown keys are config errors.
  void apply(const KeyValueFile& file);
  static PipelineConfig from_file(const std::filesystem::path& path);

  /// Replace every stage seed with one derived from `base`.
  void set_all_seeds(std::uint64_t base);
  /// Test-set size and sampler lengths used for full-scale runs.
  void use_paper_scale();

  /// Throws a config error naming the first invalid entry.
  void validate() const;

  /// Canonical `key = value` listing of every result-affecting setting.
  std::string effective() const;
  /// FNV-1a 64 of `effective()`.
  std::uint64_t hash() const;
  std::string hash_hex() const;

  ModelSetup model_setup() const;
  calibration::HmSchedule hm_schedule() const;
  calibration::PosteriorSettings posterior_settings() const;
  emulator::EmulatorConfig emulator_config(std::uint64_t seed) const;
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace lacal
