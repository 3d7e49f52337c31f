#pragma once

#include "lacal/calibration.hpp"
#include "lacal/config.hpp"
#include "lacal/csv.hpp"
#include "lacal/error.hpp"
#include "lacal/mcmc.hpp"
#include "lacal/simulator.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lacal::pipeline {

enum class Stage { mesh, design, simulate, train, gsa, fix_c, hm, mcmc, report };

std::string_view stage_name(Stage stage);
Stage stage_from_name(std::string_view name);
const std::vector<Stage>& all_stages();

/// Comma-separated stage names, or "all". Result is in pipeline order.
std::vector<Stage> parse_stages(const std::string& list);

/// Process exit status for an error: 2 config, 4 non-convergence, 3 otherwise.
int exit_code(const Error& error);

// ---------------------------------------------------------------------------
// Artifact headers

struct ArtifactHeader {
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::vector<std::string> header_lines(const ArtifactHeader& header);
/// Header of an existing artifact; nullopt when the file is missing or carries none.
std::optional<ArtifactHeader> read_header(const std::filesystem::path& path);

/// Writes a CSV artifact with the header in its comment block.
void write_table(const std::filesystem::path& path, const ArtifactHeader& header, csv::Table table);

/// sim_id plus one column per input.
csv::Table points_table(const ParameterSpace& space, const PointMatrix& points, std::size_t first_id = 0);
/// Reads the input columns named by `space` (other columns are ignored).
PointMatrix read_points(const csv::Table& table, const ParameterSpace& space);

csv::Table observation_table(const calibration::Observation& obs);
calibration::Observation read_observation(const csv::Table& table);

csv::Table space_table(const ParameterSpace& space);
ParameterSpace read_space(const csv::Table& table);

void write_emulators(const std::filesystem::path& dir, const ArtifactHeader& header,
                     const calibration::EmulatorSet& emulators);
calibration::EmulatorSet read_emulators(const std::filesystem::path& dir);

/// walker, step, one column per input, log_posterior.
csv::Table chain_table(const ParameterSpace& space, const mcmc::Chain& chain);
mcmc::Chain read_chain(const csv::Table& table, const ParameterSpace& space);

// ---------------------------------------------------------------------------
// Simulation cache

/// Simulations keyed by their exact input coordinates, persisted as CSV so an
/// interrupted stage resumes without repeating finished runs.
class SimulationCache {
 public:
  SimulationCache(ParameterSpace space, std::optional<std::filesystem::path> file = std::nullopt,
                  ArtifactHeader header = {});

  const SimulationOutcome* find(const Eigen::Ref<const Vector>& x) const;
  void insert(const Eigen::Ref<const Vector>& x, const SimulationOutcome& outcome);
  std::size_t size() const { return entries_.size(); }
  /// Rewrites the backing file (no-op without one).
  void flush() const;

  /// Runs only the rows missing from the cache.
  std::vector<SimulationOutcome> run(const Simulator& simulator, const PointMatrix& x, int threads);

 private:
  ParameterSpace space_;
  std::optional<std::filesystem::path> file_;
  ArtifactHeader header_;
  std::vector<std::pair<Vector, SimulationOutcome>> entries_;
  std::map<std::vector<double>, std::size_t> index_;
};

/// History-matching batch simulator backed by a cache.
calibration::BatchSimulator cached_simulator(const Simulator& simulator, const ParameterSpace& space,
                                             SimulationCache& cache, int threads);

// ---------------------------------------------------------------------------
// Calibration runs shared by the pipeline and the verification study

/// History matching over `space`; writes wave<k>_* files, nroy_box.csv,
/// nroy_final.csv, final_simulations.csv and hm_emulators/ into `dir`.
calibration::HmResult history_match(const PipelineConfig& config, const ParameterSpace& space,
                                   const Simulator& simulator, SimulationCache& cache,
                                   const calibration::Observation& obs, const std::filesystem::path& dir,
                                   std::ostream* log);

/// Successful simulations of the final wave.
PointMatrix final_simulations(const calibration::HmResult& hm);

struct PosteriorRun {
  mcmc::Chain chain;
  Vector map;
  double map_log_posterior = 0.0;
  std::size_t nearest_row = 0;  // into the final simulations
  double nearest_distance = 0.0;
  std::vector<calibration::Interval> intervals;
};

/// Ensemble MCMC on the final emulators; writes chain.csv and map.csv.
PosteriorRun sample_posterior(const PipelineConfig& config, const ParameterSpace& box,
                              const calibration::EmulatorSet& emulators, const calibration::Observation& obs,
                              const PointMatrix& start_pool, const PointMatrix& final_simulated,
                              const std::filesystem::path& dir, std::ostream* log);

/// Target features: the simulated truth point, or the configured features file.
FeatureVector target_features(const PipelineConfig& config, const Simulator& simulator, SimulationCache* cache);

// ---------------------------------------------------------------------------

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, bool force = false, std::ostream* log = nullptr);

  void run(const std::vector<Stage>& stages);
  void run_stage(Stage stage);

  /// Cohort statistics on a cohort CSV; writes stats_report.json.
  void run_stats(const std::filesystem::path& cohort_csv);

  const PipelineConfig& config() const { return config_; }
  std::filesystem::path path(const std::string& name) const { return config_.out_dir / name; }

 private:
  void stage_mesh();
  void stage_design();
  void stage_simulate();
  void stage_train();
  void stage_gsa();
  void stage_fix_c();
  void stage_hm();
  void stage_mcmc();
  void stage_report();

  ArtifactHeader header(const std::string& kind, std::uint64_t seed) const;
  /// Throws a dependency error naming `stage` when `file` is missing, and a
  /// config error when it was produced under another config (unless forced).
  void require(const std::string& file, Stage stage) const;
  /// False when `file` already exists under the current config; throws when it
  /// exists under another config and overwriting is not forced.
  bool needs_write(const std::string& file) const;
  const Simulator& simulator();
  void note(const std::string& message) const;

  PipelineConfig config_;
  bool force_ = false;
  std::ostream* log_ = nullptr;
  std::string hash_;
  std::optional<Simulator> simulator_;
};

}  // namespace lacal::pipeline
