#include "lacal/mcmc.hpp"

#include "lacal/error.hpp"
#include "lacal/random.hpp"

#include <cmath>
#include <limits>

namespace lacal::mcmc {

double stretch_factor(double u, double a) {
  const double s = (a - 1.0) * u + 1.0;
  return s * s / a;
}

double stretch_log_acceptance(double z, std::size_t d, double log_p_proposal, double log_p_current) {
  if (log_p_proposal == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  return static_cast<double>(d - 1) * std::log(z) + log_p_proposal - log_p_current;
}

Chain ensemble_sample(const LogDensity& log_density, const PointMatrix& initial, const EnsembleSettings& s) {
  const auto k = initial.rows();
  const auto d = static_cast<std::size_t>(initial.cols());
  if (k != s.walkers) throw Error(ErrorKind::shape, "initial ensemble has " + std::to_string(k) + " rows, expected " +
                                                        std::to_string(s.walkers));
  if (s.walkers < 4 || s.walkers % 2 != 0) throw Error(ErrorKind::invalid_argument, "walker count must be even and >= 4");
  if (s.steps <= s.burn_in || s.thin < 1 || s.burn_in < 0) {
    throw Error(ErrorKind::invalid_argument, "need steps > burn_in >= 0 and thin >= 1");
  }
  if (!(s.scale > 1.0)) throw Error(ErrorKind::invalid_argument, "stretch scale must exceed 1");
  bool spread = false;
  for (Eigen::Index w = 1; w < k && !spread; ++w) spread = initial.row(w) != initial.row(0);
  if (!spread) throw Error(ErrorKind::degenerate_ensemble, "all walkers start at the same point");

  PointMatrix x = initial;
  Vector lp(k);
  for (Eigen::Index w = 0; w < k; ++w) {
    lp[w] = log_density(x.row(w).transpose());
    if (!std::isfinite(lp[w])) {
      throw Error(ErrorKind::invalid_argument, "walker " + std::to_string(w) + " starts outside the support");
    }
  }

  Chain chain;
  chain.walkers = s.walkers;
  chain.steps = s.steps;
  chain.burn_in = s.burn_in;
  chain.thin = s.thin;
  const int kept_steps = (s.steps - s.burn_in + s.thin - 1) / s.thin;
  chain.samples.resize(static_cast<Eigen::Index>(kept_steps) * k, static_cast<Eigen::Index>(d));
  chain.log_posterior.resize(chain.samples.rows());
  chain.walker.reserve(static_cast<std::size_t>(chain.samples.rows()));
  chain.step.reserve(static_cast<std::size_t>(chain.samples.rows()));

  Rng rng(derive_seed(s.seed, 0x5eed));
  const Eigen::Index half = k / 2;
  long long accepted = 0;
  Eigen::Index row = 0;
  Vector proposal(static_cast<Eigen::Index>(d));
  for (int step = 0; step < s.steps; ++step) {
    for (int part = 0; part < 2; ++part) {
      const Eigen::Index begin = part == 0 ? 0 : half;
      const Eigen::Index other = part == 0 ? half : 0;
      for (Eigen::Index w = begin; w < begin + half; ++w) {
        const auto j = other + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(half)));
        const double z = stretch_factor(rng.uniform(), s.scale);
        const double u = rng.uniform();
        proposal = x.row(j).transpose() + z * (x.row(w) - x.row(j)).transpose();
        const double lp_new = log_density(proposal);
        const double log_acc = stretch_log_acceptance(z, d, lp_new, lp[w]);
        if (std::isfinite(lp_new) && std::log(u) < log_acc) {
          x.row(w) = proposal.transpose();
          lp[w] = lp_new;
          ++accepted;
        }
      }
    }
    if (step >= s.burn_in && (step - s.burn_in) % s.thin == 0) {
      for (Eigen::Index w = 0; w < k; ++w) {
        chain.samples.row(row) = x.row(w);
        chain.log_posterior[row] = lp[w];
        chain.walker.push_back(static_cast<int>(w));
        chain.step.push_back(step);
        ++row;
      }
    }
  }
  chain.acceptance_fraction = static_cast<double>(accepted) / (static_cast<double>(s.steps) * static_cast<double>(k));
  return chain;
}

}  // namespace lacal::mcmc
