#pragma once

#include "lacal/emulator.hpp"
#include "lacal/features.hpp"
#include "lacal/mcmc.hpp"
#include "lacal/parameter_space.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lacal::calibration {

/// Targets and observation standard deviations per feature.
struct Observation {
  Vector mean;
  Vector sd;
  std::string provenance = "synthetic";

  void validate() const;

  /// Displacement features get `displacement_sd_mm`, ESV gets
  /// `esv_relative_sd` times its target.
  static Observation from_features(const FeatureVector& target, double displacement_sd_mm, double esv_relative_sd,
                                   std::string provenance = "synthetic");
};

using EmulatorSet = std::vector<emulator::Emulator>;

/// Per-feature emulator mean and variance at x.
void predict_all(const EmulatorSet& emulators, const Eigen::Ref<const Vector>& x, Vector& mean, Vector& variance);

/// max_i |E_i - mu_i| / sqrt(Var_i + sigma_i^2)
double implausibility(const Vector& mean, const Vector& variance, const Observation& obs);
double implausibility(const Eigen::Ref<const Vector>& x, const EmulatorSet& emulators, const Observation& obs);

/// Independent Gaussian likelihood with emulator variance added to the
/// observation variance.
double log_likelihood(const Vector& mean, const Vector& variance, const Observation& obs);
double log_likelihood(const Eigen::Ref<const Vector>& x, const EmulatorSet& emulators, const Observation& obs);

/// Input region defined by a box and a chain of implausibility cuts from
/// earlier waves.
class NroyRegion {
 public:
  explicit NroyRegion(ParameterSpace box) : box_(std::move(box)) {}

  void add_cut(std::shared_ptr<const EmulatorSet> emulators, double threshold, const Observation& obs);
  bool contains(const Eigen::Ref<const Vector>& x) const;

  const ParameterSpace& box() const { return box_; }
  void set_box(ParameterSpace box) { box_ = std::move(box); }
  std::size_t cut_count() const { return cuts_.size(); }

  /// Latin hypercube over the box with rejection into the region. Throws a
  /// sparse-region error when fewer than n points survive `max_batches` batches.
  PointMatrix sample(std::size_t n, std::uint64_t seed, int max_batches = 200) const;

 private:
  struct Cut {
    std::shared_ptr<const EmulatorSet> emulators;
    double threshold;
    Observation obs;
  };
  ParameterSpace box_;
  std::vector<Cut> cuts_;
};

struct NroyCloud {
  int wave = 0;
  double threshold = 0.0;
  PointMatrix points;  // retained test points, physical units
  Vector implausibility;
  std::vector<double> fraction_history;  // of the initial box, one per wave
  Vector box_lower;
  Vector box_upper;

  double fraction() const { return fraction_history.empty() ? 1.0 : fraction_history.back(); }
};

struct WaveOutcome {
  NroyCloud cloud;
  PointMatrix next_design;
  std::size_t n_tested = 0;
};

/// Mask of points with I <= threshold.
std::vector<bool> retained_mask(const PointMatrix& points, const EmulatorSet& emulators, const Observation& obs,
                                double threshold);

/// Greedy maximin subset of `n` rows, started at the row nearest the
/// centroid; distances in the given coordinates.
std::vector<std::size_t> maximin_select(const PointMatrix& points, std::size_t n);

/// One history-matching wave over `region`: score n_test points, keep
/// I <= threshold, pick the next design. `previous` supplies the fraction
/// history (empty for the first wave).
WaveOutcome hm_wave(const NroyRegion& region, const EmulatorSet& emulators, const Observation& obs, double threshold,
                    std::size_t n_test, std::size_t n_simul, std::uint64_t seed, const NroyCloud* previous = nullptr,
                    int wave = 1);

struct HmSchedule {
  double initial_threshold = 3.5;
  double step = 0.5;
  double final_threshold = 3.0;
  int max_waves = 5;
  std::size_t first_wave_size = 200;
  std::size_t wave_size = 100;
  std::size_t n_test = 20000;
  double min_reduction = 0.01;  // stop once a wave removes less than this share of the initial box
  double box_padding = 0.05;    // NROY box grows by this share of the parent width per side
  int cv_folds = 5;
  emulator::EmulatorConfig emulator{};
  emulator::EmulatorConfig cv_emulator{};
  bool cross_validate = true;
  std::uint64_t seed = 0;

  double threshold(int wave) const;  // wave is 1-based
};

/// Batch simulator used by history matching; a missing value marks a failed run.
using BatchSimulator = std::function<std::vector<std::optional<FeatureVector>>(const PointMatrix&)>;

struct WaveRecord {
  int wave = 0;
  double threshold = 0.0;
  PointMatrix design;
  std::vector<std::optional<FeatureVector>> outputs;
  std::vector<emulator::CrossValidation> cv;  // per feature
  std::size_t training_size = 0;
  NroyCloud cloud;
  PointMatrix next_design;
};

struct HmResult {
  std::vector<WaveRecord> waves;
  std::shared_ptr<const EmulatorSet> final_emulators;
  NroyRegion final_region{ParameterSpace{}};
  PointMatrix training_x;  // all successful simulations
  Matrix training_y;       // n x 7
};

/// Called after each wave so callers can persist artifacts.
using WaveCallback = std::function<void(const WaveRecord&)>;

/// Train one emulator per feature on the given data.
EmulatorSet train_emulators(const ParameterSpace& space, const PointMatrix& x, const Matrix& y,
                            const emulator::EmulatorConfig& config);

HmResult run_history_matching(const ParameterSpace& space, const BatchSimulator& simulate, const Observation& obs,
                              const HmSchedule& schedule, const WaveCallback& on_wave = {});

struct PosteriorSettings {
  mcmc::EnsembleSettings sampler{};
  double support_threshold = 3.0;
};

/// Uniform prior over the region box restricted to I <= support_threshold
/// under `emulators`; log posterior is the log likelihood inside the support.
mcmc::LogDensity make_log_posterior(const ParameterSpace& box, const EmulatorSet& emulators, const Observation& obs,
                                    double support_threshold);

/// Ensemble MCMC started from distinct points of the final cloud.
mcmc::Chain ensemble_mcmc(const ParameterSpace& box, const EmulatorSet& emulators, const Observation& obs,
                          const PointMatrix& start_pool, const PosteriorSettings& settings);

/// Highest stored log posterior; first occurrence wins ties.
std::size_t map_index(const mcmc::Chain& chain);
Vector map_estimate(const mcmc::Chain& chain);

/// Row of `simulated` nearest to `point` in the unit coordinates of `space`;
/// ties go to the lowest row.
std::size_t nearest_plausible(const ParameterSpace& space, const Eigen::Ref<const Vector>& point,
                              const PointMatrix& simulated);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Equal-tailed credible interval per input (linear-interpolated quantiles).
std::vector<Interval> credible_intervals(const mcmc::Chain& chain, double level = 0.95);

}  // namespace lacal::calibration
