#pragma once

#include "lacal/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace lacal::mcmc {

/// Log posterior up to a constant; -inf marks points outside the support.
using LogDensity = std::function<double(const Eigen::Ref<const Vector>&)>;

struct EnsembleSettings {
  int walkers = 18;
  int steps = 20000;
  int burn_in = 2000;
  int thin = 10;
  double scale = 2.0;  // stretch parameter a
  std::uint64_t seed = 0;
};

struct Chain {
  int walkers = 0;
  int steps = 0;
  int burn_in = 0;
  int thin = 0;
  PointMatrix samples;           // post-burn-in, thinned; one row per (step, walker)
  Vector log_posterior;
  std::vector<int> walker;
  std::vector<int> step;
  double acceptance_fraction = 0.0;
};

/// Stretch factor from a uniform draw: z = ((a - 1) u + 1)^2 / a, which has
/// density proportional to 1/sqrt(z) on [1/a, a].
double stretch_factor(double u, double a);

/// Log acceptance ratio of a stretch move in d dimensions.
double stretch_log_acceptance(double z, std::size_t d, double log_p_proposal, double log_p_current);

/// Affine-invariant ensemble sampler with the stretch move, updating the two
/// half-ensembles in turn. `initial` holds one walker per row.
Chain ensemble_sample(const LogDensity& log_density, const PointMatrix& initial, const EnsembleSettings& settings);

}  // namespace lacal::mcmc
