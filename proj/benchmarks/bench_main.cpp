#include "lacal/calibration.hpp"
#include "lacal/emulator.hpp"
#include "lacal/geometry.hpp"
#include "lacal/mechanics.hpp"
#include "lacal/parameter_space.hpp"
#include "lacal/qmc.hpp"

#include <benchmark/benchmark.h>

using namespace lacal;

namespace {

mechanics::RegionalMaterialMap materials() {
  auto m = mechanics::RegionalMaterialMap::uniform({});
  const double alpha[5] = {2.12, 1.42, 2.57, 2.71, 2.78};
  for (std::size_t r = 0; r < 5; ++r) m.wall[r].alpha = alpha[r];
  return m;
}

void BM_EnergyAndGradient(benchmark::State& state) {
  const auto mesh = geometry::build_hemisphere_mesh(20.0, static_cast<int>(state.range(0)));
  const mechanics::MembraneModel model(mesh, mesh.vertices, materials(), mechanics::LoadingParameters{});
  Positions x = mesh.vertices;
  for (int v : model.free_vertices()) x[static_cast<std::size_t>(v)] *= 1.02;
  Positions g;
  for (auto _ : state) benchmark::DoNotOptimize(model.energy_and_gradient(x, 1.0, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mesh.triangle_count()));
}
BENCHMARK(BM_EnergyAndGradient)->Arg(2)->Arg(3)->Arg(4);

void BM_Transient(benchmark::State& state) {
  const auto mesh = geometry::build_hemisphere_mesh(20.0, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mechanics::run_transient(mesh, materials(), {}));
}
BENCHMARK(BM_Transient)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

// 9 inputs, n training points
emulator::Emulator fitted(std::size_t n) {
  const PointMatrix x = qmc::sobol_unit(n, 9, 3);
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.5 * x(i, 3);
  emulator::EmulatorConfig cfg;
  cfg.restarts = 1;
  cfg.max_iterations = 30;
  return emulator::fit_gpe(x, y, Vector::Zero(9), Vector::Ones(9), cfg);
}

void BM_EmulatorPredict(benchmark::State& state) {
  const auto em = fitted(static_cast<std::size_t>(state.range(0)));
  const Vector x = Vector::Constant(9, 0.37);
  for (auto _ : state) benchmark::DoNotOptimize(em.predict(x));
}
BENCHMARK(BM_EmulatorPredict)->Arg(200)->Arg(400)->Arg(600);

void BM_Implausibility(benchmark::State& state) {
  calibration::EmulatorSet set;
  for (std::size_t k = 0; k < kFeatureCount; ++k) set.push_back(fitted(static_cast<std::size_t>(state.range(0))));
  calibration::Observation obs;
  obs.mean = Vector::Constant(static_cast<Eigen::Index>(kFeatureCount), 0.8);
  obs.sd = Vector::Constant(static_cast<Eigen::Index>(kFeatureCount), 0.05);
  const Vector x = Vector::Constant(9, 0.41);
  for (auto _ : state) benchmark::DoNotOptimize(calibration::implausibility(x, set, obs));
}
BENCHMARK(BM_Implausibility)->Arg(200)->Arg(600);

}  // namespace

BENCHMARK_MAIN();
