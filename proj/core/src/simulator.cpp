#include "lacal/simulator.hpp"

#include "lacal/error.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace lacal {

mechanics::RegionalMaterialMap materials_for(const ParameterSpace& space, const Eigen::Ref<const Vector>& x,
                                             const ModelSetup& setup) {
  if (static_cast<std::size_t>(x.size()) != space.dim()) throw Error(ErrorKind::shape, "point dimension mismatch");
  material::GuccioneParams base;
  base.C = setup.default_C_kPa;
  auto m = mechanics::RegionalMaterialMap::uniform(base);
  for (auto r : geometry::kWallRegions) {
    const std::string name(geometry::region_name(r));
    if (space.has("C_" + name + "_kPa")) m[r].C = x[static_cast<Eigen::Index>(space.index_of("C_" + name + "_kPa"))];
    if (space.has("alpha_" + name)) m[r].alpha = x[static_cast<Eigen::Index>(space.index_of("alpha_" + name))];
  }
  return m;
}

mechanics::LoadingParameters loading_for(const ParameterSpace& space, const Eigen::Ref<const Vector>& x,
                                         const ModelSetup& setup) {
  if (static_cast<std::size_t>(x.size()) != space.dim()) throw Error(ErrorKind::shape, "point dimension mismatch");
  auto load = setup.base_load;
  auto take = [&](const char* name, double& field) {
    if (space.has(name)) field = x[static_cast<Eigen::Index>(space.index_of(name))];
  };
  take("EDP_mmHg", load.edp_mmHg);
  take("ESP_mmHg", load.esp_mmHg);
  take("k_peri_kPa_per_um", load.k_peri_kPa_per_um);
  take("PTH", load.pth);
  return load;
}

Simulator::Simulator(ModelSetup setup)
    : setup_(std::move(setup)),
      mesh_(geometry::build_hemisphere_mesh(setup_.radius_mm, setup_.refinement, setup_.thickness, setup_.mesh)) {}

Simulator::Simulator(ModelSetup setup, geometry::ShellMesh mesh) : setup_(std::move(setup)), mesh_(std::move(mesh)) {
  if (!mesh_.has_rim()) throw Error(ErrorKind::invalid_geometry, "simulation mesh has no rim");
}

mechanics::SimulationResult Simulator::run_full(const ParameterSpace& space, const Eigen::Ref<const Vector>& x) const {
  const auto materials = materials_for(space, x, setup_);
  const auto load = loading_for(space, x, setup_);
  load.validate(false);
  return mechanics::run_transient(mesh_, materials, load, setup_.transient);
}

FeatureVector Simulator::run(const ParameterSpace& space, const Eigen::Ref<const Vector>& x) const {
  return run_full(space, x).features;
}

std::vector<SimulationOutcome> Simulator::run_batch(const ParameterSpace& space, const PointMatrix& x,
                                                    int threads) const {
  std::vector<SimulationOutcome> out(static_cast<std::size_t>(x.rows()));
  std::atomic<Eigen::Index> next{0};
  auto worker = [&]() {
    for (Eigen::Index i = next++; i < x.rows(); i = next++) {
      auto& o = out[static_cast<std::size_t>(i)];
      try {
        const auto res = run_full(space, x.row(i).transpose());
        o.features = res.features;
        o.unload_iterations = res.unloading.iterations;
      } catch (const Error& e) {
        o.error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(x.rows())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace lacal
