#pragma once

#include "lacal/features.hpp"
#include "lacal/geometry.hpp"
#include "lacal/material.hpp"

#include <Eigen/Sparse>

#include <array>
#include <vector>

namespace lacal::mechanics {

inline constexpr double kMmHgToKPa = 0.133322;
inline constexpr double kPerMicronToPerMm = 1000.0;

/// Rigid translation applied to every rim vertex: sin^2 rise to the peak
/// amplitude at `t_peak`, cos^2 return to zero at t = 1 (C^1 in time).
struct RimTrajectory {
  double amplitude_mm = 4.0;
  Vec3 direction = -Vec3::UnitZ();
  double t_peak = 0.4;

  Vec3 offset(double t) const;
};

struct LoadingParameters {
  double edp_mmHg = 4.5;
  double esp_mmHg = 29.6;
  double k_peri_kPa_per_um = 0.003;
  double pth = 0.6;
  double k_vein_kPa_per_um = 0.001;
  RimTrajectory rim{};
  double t_es = 0.4;
  double conduit_duration = 0.3;  // pressure decline time after ES

  /// Range checks; with `table_ranges` also the calibration box.
  void validate(bool table_ranges = true) const;
};

/// Cavity pressure (kPa) at normalised cycle time t in [0, 1].
double pressure_transient(double t, const LoadingParameters& load);

struct RegionalMaterialMap {
  std::array<material::GuccioneParams, geometry::kWallRegionCount> wall{};
  material::NeoHookeanParams rim{1000.0, 0.0};

  static RegionalMaterialMap uniform(const material::GuccioneParams& p);
  const material::GuccioneParams& operator[](geometry::Region r) const { return wall[geometry::index_of(r)]; }
  material::GuccioneParams& operator[](geometry::Region r) { return wall[geometry::index_of(r)]; }
  void validate() const;
};

/// Pericardial penalty scale in [0,1] from the area co-ordinate a = 1 - cos(colatitude):
/// 1 below `pth`, cosine taper to 0 at `taper_end`.
double pericardial_penalty(double area_coordinate, double pth, double taper_end);

struct ModelOptions {
  double rim_band_deg = 5.0;  // pericardial taper ends where the annulus begins
  double exponent_cap = material::kDefaultExponentCap;
};

/// Dirichlet/pressure state: rim = ED rim + offset.
struct LoadState {
  double pressure_kPa = 0.0;
  Vec3 rim_offset = Vec3::Zero();
};

/// Total potential energy of the pressurised membrane for a fixed stress-free
/// reference configuration. Element data, spring anchors and normals are
/// precomputed from the reference; rim vertices are prescribed.
class MembraneModel {
 public:
  MembraneModel(const geometry::ShellMesh& mesh, const Positions& reference,
                const RegionalMaterialMap& materials, const LoadingParameters& load,
                const ModelOptions& options = {});

  /// Energy (kPa mm^3); throws inverted-element / divergence naming the element.
  double energy(const Positions& x, double pressure_kPa) const;

  /// Energy and its exact gradient with respect to every vertex (rim rows included).
  double energy_and_gradient(const Positions& x, double pressure_kPa, Positions& gradient) const;

  /// Non-throwing energy: +inf for inadmissible states.
  double try_energy(const Positions& x, double pressure_kPa) const;

  /// Hessian over free degrees of freedom (3 per free vertex, in free_vertices() order).
  Eigen::SparseMatrix<double> free_hessian(const Positions& x, double pressure_kPa) const;

  /// Positions with rim vertices placed for the given load state.
  void apply_rim(Positions& x, const Vec3& rim_offset) const;

  double volume(const Positions& x) const { return surface_.volume(x); }

  const std::vector<int>& free_vertices() const { return free_; }
  const std::vector<int>& free_index() const { return free_index_; }
  const geometry::ShellMesh& mesh() const { return *mesh_; }
  const Positions& reference() const { return reference_; }
  const std::vector<double>& pericardial_scale() const { return peri_scale_; }

 private:
  struct Element {
    std::array<int, 3> v{};
    Mat2 d_inv = Mat2::Identity();  // inverse reference edge matrix in fibre/sheet basis
    double volume = 0.0;            // rest area * thickness
    bool neo_hookean = false;
    material::GuccioneParams guccione{};
  };

  double element_energy(const Element& e, const Positions& x, Eigen::Matrix<double, 3, 3>* grad) const;
  double springs(const Positions& x, Positions* gradient) const;

  const geometry::ShellMesh* mesh_;
  Positions reference_;
  geometry::ClosedSurface surface_;
  material::NeoHookeanParams rim_material_;
  ModelOptions options_;
  std::vector<Element> elements_;
  std::vector<int> free_;
  std::vector<int> free_index_;  // vertex -> free slot or -1
  std::vector<bool> rim_;
  Positions anchor_normal_;
  std::vector<double> anchor_area_;
  std::vector<double> peri_scale_;  // k_peri * s(v) in kPa/mm
  std::vector<double> vein_stiffness_;
  Positions rim_anchor_;            // ED rim positions (mesh vertices)
};

struct SolverSettings {
  double tol_abs = 1e-9;
  double tol_rel = 1e-8;
  int max_iterations = 500;  // per load increment
  int min_increments = 20;   // for solves started from the unloaded state
  int max_halvings = 12;
  double pressure_floor_kPa = 0.1;
};

struct SolveStats {
  int increments = 0;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> energy_trace;  // accepted energies of the last increment
};

/// Gradient inf-norm tolerance used for a given load.
double residual_tolerance(const SolverSettings& s, double pressure_kPa, double radius_mm);

/// Quasi-static solve from `initial` (equilibrium at `from`) to `to`, in
/// `increments` equal steps, halving a step whenever it fails.
Positions solve_equilibrium(const MembraneModel& model, const Positions& initial, const LoadState& from,
                            const LoadState& to, int increments, const SolverSettings& settings = {},
                            SolveStats* stats = nullptr);

/// Solve at `pressure_kPa` with the rim at its ED position, ramping from zero
/// pressure in `settings.min_increments` steps.
Positions solve_equilibrium(const MembraneModel& model, double pressure_kPa, const Positions& initial_guess,
                            const SolverSettings& settings = {}, SolveStats* stats = nullptr);

struct UnloadSettings {
  double volume_tolerance = 0.01;
  int max_iterations = 40;
};

struct UnloadResult {
  Positions reference;  // stress-free geometry
  Positions loaded;     // equilibrium of `reference` at EDP
  int iterations = 0;
  double volume_error = 0.0;  // |V(loaded) - V_ED| / V_ED
  std::vector<double> volume_error_history;
  std::vector<double> rms_history;  // RMS vertex distance loaded -> target
};

/// Backward-displacement fixed point X <- X - (x(X) - x_ED) with the rim held
/// at its ED position, until the reinflated volume is within tolerance.
UnloadResult unload(const geometry::ShellMesh& mesh, const RegionalMaterialMap& materials,
                    const LoadingParameters& load, const UnloadSettings& unload_settings = {},
                    const SolverSettings& settings = {}, const ModelOptions& options = {});

struct SimulationResult {
  std::vector<double> times;
  std::vector<double> pressure_kPa;
  std::vector<double> volume_ml;
  std::vector<geometry::DisplacementField> displacements;  // relative to reinflated ED state
  std::size_t es_index = 0;
  FeatureVector features{};
  UnloadResult unloading;
};

struct TransientSettings {
  int n_steps = 20;
  SolverSettings solver{};
  UnloadSettings unload{};
  ModelOptions model{};
};

/// Unload, reinflate to EDP, then march the cycle recording volume and
/// displacement; features are taken at the volume peak.
SimulationResult run_transient(const geometry::ShellMesh& mesh, const RegionalMaterialMap& materials,
                               const LoadingParameters& load, const TransientSettings& settings = {});

/// ESV (ml) and the global plus five regional mean displacements (mm) at ES.
FeatureVector extract_features(const geometry::ShellMesh& mesh, const SimulationResult& result);

}  // namespace lacal::mechanics
