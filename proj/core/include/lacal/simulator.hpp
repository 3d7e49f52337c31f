#pragma once

#include "lacal/features.hpp"
#include "lacal/geometry.hpp"
#include "lacal/mechanics.hpp"
#include "lacal/parameter_space.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lacal {

/// Fixed (non-calibrated) model settings shared by every simulation.
struct ModelSetup {
  double radius_mm = 20.0;
  int refinement = 2;
  geometry::ThicknessProfile thickness = geometry::ThicknessProfile::constant(2.0);
  geometry::MeshOptions mesh{};
  mechanics::LoadingParameters base_load{};  // supplies k_vein, rim motion, timing
  double default_C_kPa = kFixedC_kPa;         // used when C is not an input
  mechanics::TransientSettings transient{};
};

/// Materials for a point: inputs named C_<region>_kPa and alpha_<region>
/// override the defaults.
mechanics::RegionalMaterialMap materials_for(const ParameterSpace& space, const Eigen::Ref<const Vector>& x,
                                             const ModelSetup& setup);

/// Loading for a point: EDP_mmHg, ESP_mmHg, k_peri_kPa_per_um and PTH override
/// the base load.
mechanics::LoadingParameters loading_for(const ParameterSpace& space, const Eigen::Ref<const Vector>& x,
                                         const ModelSetup& setup);

struct SimulationOutcome {
  std::optional<FeatureVector> features;
  std::string error;  // empty on success
  int unload_iterations = 0;
};

/// Forward model bound to a mesh. Immutable; safe to share across threads.
class Simulator {
 public:
  explicit Simulator(ModelSetup setup);
  /// Uses a mesh built elsewhere (e.g. read back from an artifact).
  Simulator(ModelSetup setup, geometry::ShellMesh mesh);

  const geometry::ShellMesh& mesh() const { return mesh_; }
  const ModelSetup& setup() const { return setup_; }

  mechanics::SimulationResult run_full(const ParameterSpace& space, const Eigen::Ref<const Vector>& x) const;
  FeatureVector run(const ParameterSpace& space, const Eigen::Ref<const Vector>& x) const;

  /// One outcome per row; failures are captured rather than thrown. Results
  /// do not depend on the thread count.
  std::vector<SimulationOutcome> run_batch(const ParameterSpace& space, const PointMatrix& x, int threads = 1) const;

 private:
  ModelSetup setup_;
  geometry::ShellMesh mesh_;
};

}  // namespace lacal
