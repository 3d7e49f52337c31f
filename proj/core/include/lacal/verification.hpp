#pragma once

#include "lacal/config.hpp"
#include "lacal/pipeline.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lacal::verification {

/// One calibration of the synthetic truth at a given noise level.
struct NoiseRun {
  std::string label;
  NoiseLevel noise;
  calibration::Observation obs;
  int waves = 0;
  double nroy_fraction = 1.0;         // of the initial box, final wave
  double truth_implausibility = 0.0;  // under the final emulators
  bool truth_in_nroy = false;         // inside every wave's cut and the final box
  pipeline::PosteriorRun posterior;
  std::vector<bool> truth_in_ci;
  std::vector<double> map_distance;  // |MAP - truth|, physical units
  std::vector<double> ci_width;      // physical units

  double reduction() const { return 1.0 - nroy_fraction; }
  bool all_truth_in_ci() const;
};

struct Report {
  ParameterSpace space;
  Vector truth;
  FeatureVector truth_features{};
  bool non_central = false;
  std::vector<std::string> warnings;
  NoiseRun baseline;
  NoiseRun high;
  std::vector<double> width_ratio;  // high / baseline per input
  /// Mean over inputs of CI width divided by the input's prior range.
  double mean_relative_width_baseline = 0.0;
  double mean_relative_width_high = 0.0;

  bool width_increases() const { return mean_relative_width_high > mean_relative_width_baseline; }
};

/// True when any coordinate of `x` sits on the boundary of `space`.
bool on_boundary(const ParameterSpace& space, const Eigen::Ref<const Vector>& x);

/// Simulates the configured truth, then runs history matching and MCMC at the
/// baseline and high noise levels. Artifacts go to <out_dir>/verify.
Report verify_synthetic(const PipelineConfig& config, std::ostream* log = nullptr);

/// verification.csv rows: one per input and noise level.
csv::Table report_table(const Report& report);
std::string report_markdown(const Report& report);

}  // namespace lacal::verification
