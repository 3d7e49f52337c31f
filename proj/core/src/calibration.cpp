#include "lacal/calibration.hpp"

#include "lacal/error.hpp"
#include "lacal/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace lacal::calibration {

void Observation::validate() const {
  if (mean.size() != static_cast<Eigen::Index>(kFeatureCount) || sd.size() != mean.size()) {
    throw Error(ErrorKind::shape, "observation needs exactly " + std::to_string(kFeatureCount) + " features");
  }
  if (!(sd.array() > 0.0).all()) throw Error(ErrorKind::invalid_argument, "observation sd must be positive");
  if (!mean.allFinite()) throw Error(ErrorKind::invalid_argument, "non-finite observation target");
}

Observation Observation::from_features(const FeatureVector& target, double displacement_sd_mm, double esv_relative_sd,
                                       std::string provenance) {
  Observation obs;
  obs.mean = Eigen::Map<const Vector>(target.data(), static_cast<Eigen::Index>(kFeatureCount));
  obs.sd = Vector::Constant(static_cast<Eigen::Index>(kFeatureCount), displacement_sd_mm);
  obs.sd[static_cast<Eigen::Index>(Feature::esv_ml)] = esv_relative_sd * std::abs(at(target, Feature::esv_ml));
  obs.provenance = std::move(provenance);
  obs.validate();
  return obs;
}

void predict_all(const EmulatorSet& emulators, const Eigen::Ref<const Vector>& x, Vector& mean, Vector& variance) {
  const auto m = static_cast<Eigen::Index>(emulators.size());
  mean.resize(m);
  variance.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto p = emulators[static_cast<std::size_t>(i)].predict(x);
    mean[i] = p.mean;
    variance[i] = p.variance;
  }
}

double implausibility(const Vector& mean, const Vector& variance, const Observation& obs) {
  if (mean.size() != obs.mean.size() || variance.size() != obs.mean.size()) {
    throw Error(ErrorKind::shape, "prediction count does not match the observation");
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double s2 = variance[i] + obs.sd[i] * obs.sd[i];
    worst = std::max(worst, std::abs(mean[i] - obs.mean[i]) / std::sqrt(s2));
  }
  return worst;
}

double implausibility(const Eigen::Ref<const Vector>& x, const EmulatorSet& emulators, const Observation& obs) {
  Vector mean;
  Vector var;
  predict_all(emulators, x, mean, var);
  return implausibility(mean, var, obs);
}

double log_likelihood(const Vector& mean, const Vector& variance, const Observation& obs) {
  if (mean.size() != obs.mean.size() || variance.size() != obs.mean.size()) {
    throw Error(ErrorKind::shape, "prediction count does not match the observation");
  }
  double ll = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double s2 = obs.sd[i] * obs.sd[i] + variance[i];
    const double r = obs.mean[i] - mean[i];
    ll += -0.5 * std::log(2.0 * std::numbers::pi * s2) - r * r / (2.0 * s2);
  }
  return ll;
}

double log_likelihood(const Eigen::Ref<const Vector>& x, const EmulatorSet& emulators, const Observation& obs) {
  Vector mean;
  Vector var;
  predict_all(emulators, x, mean, var);
  return log_likelihood(mean, var, obs);
}

namespace {

// I(x) > threshold, using the cheap mean-only bound before any variance.
bool ruled_out(const Eigen::Ref<const Vector>& x, const EmulatorSet& emulators, const Observation& obs,
               double threshold) {
  for (std::size_t i = 0; i < emulators.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double mu = emulators[i].predict_mean(x);
    const double s2_max = emulators[i].prior_variance() + obs.sd[k] * obs.sd[k];
    if (std::abs(mu - obs.mean[k]) > threshold * std::sqrt(s2_max)) return true;
  }
  return implausibility(x, emulators, obs) > threshold;
}

}  // namespace

void NroyRegion::add_cut(std::shared_ptr<const EmulatorSet> emulators, double threshold, const Observation& obs) {
  if (!emulators || emulators->size() != static_cast<std::size_t>(obs.mean.size())) {
    throw Error(ErrorKind::shape, "one emulator per observed feature required");
  }
  cuts_.push_back({std::move(emulators), threshold, obs});
}

bool NroyRegion::contains(const Eigen::Ref<const Vector>& x) const {
  if (!box_.contains(x)) return false;
  for (const auto& c : cuts_) {
    if (ruled_out(x, *c.emulators, c.obs, c.threshold)) return false;
  }
  return true;
}

PointMatrix NroyRegion::sample(std::size_t n, std::uint64_t seed, int max_batches) const {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "sample size must be positive");
  PointMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(box_.dim()));
  Eigen::Index filled = 0;
  for (int b = 0; b < max_batches && filled < out.rows(); ++b) {
    const PointMatrix batch = lhs_design(box_, n, derive_seed(seed, static_cast<std::uint64_t>(b)));
    for (Eigen::Index i = 0; i < batch.rows() && filled < out.rows(); ++i) {
      if (cuts_.empty() || contains(batch.row(i).transpose())) out.row(filled++) = batch.row(i);
    }
  }
  if (filled < out.rows()) {
    throw Error(ErrorKind::sparse_region, "only " + std::to_string(filled) + " of " + std::to_string(n) +
                                              " points accepted after " + std::to_string(max_batches) + " batches");
  }
  return out;
}

std::vector<bool> retained_mask(const PointMatrix& points, const EmulatorSet& emulators, const Observation& obs,
                                double threshold) {
  std::vector<bool> keep(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    keep[static_cast<std::size_t>(i)] = !ruled_out(points.row(i).transpose(), emulators, obs, threshold);
  }
  return keep;
}

std::vector<std::size_t> maximin_select(const PointMatrix& points, std::size_t n) {
  const auto m = static_cast<std::size_t>(points.rows());
  std::vector<std::size_t> chosen;
  if (m == 0 || n == 0) return chosen;
  if (n >= m) {
    for (std::size_t i = 0; i < m; ++i) chosen.push_back(i);
    return chosen;
  }
  const Eigen::RowVectorXd centroid = points.colwise().mean();
  std::size_t first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double d = (points.row(static_cast<Eigen::Index>(i)) - centroid).squaredNorm();
    if (d < best) {
      best = d;
      first = i;
    }
  }
  std::vector<double> dmin(m, std::numeric_limits<double>::infinity());
  std::size_t current = first;
  for (std::size_t k = 0; k < n; ++k) {
    chosen.push_back(current);
    dmin[current] = -1.0;
    std::size_t next = current;
    double far = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (dmin[i] < 0.0) continue;
      dmin[i] = std::min(dmin[i], (points.row(static_cast<Eigen::Index>(i)) -
                                   points.row(static_cast<Eigen::Index>(current))).squaredNorm());
      if (dmin[i] > far) {
        far = dmin[i];
        next = i;
      }
    }
    current = next;
  }
  return chosen;
}

WaveOutcome hm_wave(const NroyRegion& region, const EmulatorSet& emulators, const Observation& obs, double threshold,
                    std::size_t n_test, std::size_t n_simul, std::uint64_t seed, const NroyCloud* previous, int wave) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::invalid_argument, "threshold must be positive");
  obs.validate();
  WaveOutcome out;
  const PointMatrix test = region.sample(n_test, seed);
  out.n_tested = n_test;
  std::vector<Eigen::Index> keep;
  std::vector<double> score;
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    const auto x = test.row(i).transpose();
    if (ruled_out(x, emulators, obs, threshold)) continue;
    keep.push_back(i);
    score.push_back(implausibility(x, emulators, obs));
  }
  if (keep.empty()) {
    throw Error(ErrorKind::empty_nroy, "no test point has implausibility <= " + std::to_string(threshold) +
                                           " in wave " + std::to_string(wave));
  }
  NroyCloud& cloud = out.cloud;
  cloud.wave = wave;
  cloud.threshold = threshold;
  cloud.points = test(keep, Eigen::all);
  cloud.implausibility = Eigen::Map<const Vector>(score.data(), static_cast<Eigen::Index>(score.size()));
  if (previous != nullptr) cloud.fraction_history = previous->fraction_history;
  const double parent = previous != nullptr ? previous->fraction() : 1.0;
  cloud.fraction_history.push_back(parent * static_cast<double>(keep.size()) / static_cast<double>(n_test));
  cloud.box_lower = cloud.points.colwise().minCoeff().transpose();
  cloud.box_upper = cloud.points.colwise().maxCoeff().transpose();

  const PointMatrix unit = region.box().to_unit_rows(cloud.points);
  const auto picked = maximin_select(unit, n_simul);
  std::vector<Eigen::Index> rows(picked.begin(), picked.end());
  out.next_design = cloud.points(rows, Eigen::all);
  return out;
}

double HmSchedule::threshold(int wave) const {
  return std::max(final_threshold, initial_threshold - step * static_cast<double>(wave - 1));
}

EmulatorSet train_emulators(const ParameterSpace& space, const PointMatrix& x, const Matrix& y,
                            const emulator::EmulatorConfig& config) {
  if (y.rows() != x.rows()) throw Error(ErrorKind::shape, "training inputs and outputs disagree in length");
  EmulatorSet set;
  for (Eigen::Index f = 0; f < y.cols(); ++f) {
    auto cfg = config;
    cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(f));
    const std::string name = f < static_cast<Eigen::Index>(kFeatureCount) ? std::string(kFeatureNames[static_cast<std::size_t>(f)])
                                                                         : "y" + std::to_string(f);
    set.push_back(emulator::fit_gpe(x, y.col(f), space.lower(), space.upper(), cfg, space.names(), name));
  }
  return set;
}

HmResult run_history_matching(const ParameterSpace& space, const BatchSimulator& simulate, const Observation& obs,
                              const HmSchedule& schedule, const WaveCallback& on_wave) {
  obs.validate();
  HmResult result;
  NroyRegion region(space);
  PointMatrix design = sobol_design(space, schedule.first_wave_size, derive_seed(schedule.seed, 1));
  std::vector<Vector> xs;
  std::vector<FeatureVector> ys;
  std::optional<NroyCloud> previous;
  for (int wave = 1; wave <= schedule.max_waves; ++wave) {
    WaveRecord rec;
    rec.wave = wave;
    rec.threshold = schedule.threshold(wave);
    rec.design = design;
    rec.outputs = simulate(design);
    if (rec.outputs.size() != static_cast<std::size_t>(design.rows())) {
      throw Error(ErrorKind::shape, "wave " + std::to_string(wave) + ": simulator returned the wrong row count");
    }
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      if (rec.outputs[static_cast<std::size_t>(i)]) {
        xs.push_back(design.row(i).transpose());
        ys.push_back(*rec.outputs[static_cast<std::size_t>(i)]);
      }
    }
    if (xs.size() < 2) throw Error(ErrorKind::fit, "wave " + std::to_string(wave) + ": too few successful simulations");
    PointMatrix tx(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(space.dim()));
    Matrix ty(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(kFeatureCount));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      tx.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
      for (std::size_t f = 0; f < kFeatureCount; ++f) ty(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = ys[i][f];
    }
    rec.training_size = xs.size();
    auto cfg = schedule.emulator;
    cfg.seed = derive_seed(schedule.seed, 1000 + static_cast<std::uint64_t>(wave));
    std::shared_ptr<const EmulatorSet> ems;
    try {
      ems = std::make_shared<const EmulatorSet>(train_emulators(space, tx, ty, cfg));
      if (schedule.cross_validate) {
        for (Eigen::Index f = 0; f < ty.cols(); ++f) {
          auto cv_cfg = schedule.cv_emulator;
          cv_cfg.seed = derive_seed(cfg.seed, 77 + static_cast<std::uint64_t>(f));
          rec.cv.push_back(emulator::cross_validate(tx, ty.col(f), space.lower(), space.upper(), schedule.cv_folds,
                                                    cv_cfg, derive_seed(schedule.seed, 2000 + static_cast<std::uint64_t>(wave))));
        }
      }
      auto outcome = hm_wave(region, *ems, obs, rec.threshold, schedule.n_test, schedule.wave_size,
                             derive_seed(schedule.seed, 3000 + static_cast<std::uint64_t>(wave)),
                             previous ? &*previous : nullptr, wave);
      rec.cloud = std::move(outcome.cloud);
      rec.next_design = std::move(outcome.next_design);
    } catch (const Error& e) {
      throw Error(e.kind(), "wave " + std::to_string(wave) + ": " + e.message());
    }
    region.add_cut(ems, rec.threshold, obs);
    const Vector width = region.box().upper() - region.box().lower();
    const Vector lo = (rec.cloud.box_lower - schedule.box_padding * width).cwiseMax(space.lower());
    const Vector hi = (rec.cloud.box_upper + schedule.box_padding * width).cwiseMin(space.upper());
    region.set_box(space.with_bounds(lo, hi));
    result.final_emulators = ems;
    result.training_x = tx;
    result.training_y = ty;
    result.waves.push_back(std::move(rec));
    if (on_wave) on_wave(result.waves.back());

    const auto& hist = result.waves.back().cloud.fraction_history;
    const bool at_final = result.waves.back().threshold <= schedule.final_threshold;
    if (at_final && hist.size() >= 2 && hist[hist.size() - 2] - hist.back() < schedule.min_reduction) break;
    previous = result.waves.back().cloud;
    design = result.waves.back().next_design;
  }
  result.final_region = region;
  return result;
}

mcmc::LogDensity make_log_posterior(const ParameterSpace& box, const EmulatorSet& emulators, const Observation& obs,
                                    double support_threshold) {
  return [box, &emulators, obs, support_threshold](const Eigen::Ref<const Vector>& x) {
    if (!box.contains(x)) return -std::numeric_limits<double>::infinity();
    Vector mean;
    Vector var;
    predict_all(emulators, x, mean, var);
    if (implausibility(mean, var, obs) > support_threshold) return -std::numeric_limits<double>::infinity();
    return log_likelihood(mean, var, obs);
  };
}

mcmc::Chain ensemble_mcmc(const ParameterSpace& box, const EmulatorSet& emulators, const Observation& obs,
                          const PointMatrix& start_pool, const PosteriorSettings& settings) {
  const auto log_post = make_log_posterior(box, emulators, obs, settings.support_threshold);
  std::vector<Eigen::Index> usable;
  for (Eigen::Index i = 0; i < start_pool.rows(); ++i) {
    if (std::isfinite(log_post(start_pool.row(i).transpose()))) usable.push_back(i);
  }
  const auto walkers = static_cast<std::size_t>(settings.sampler.walkers);
  if (usable.size() < walkers) {
    throw Error(ErrorKind::sparse_region, "only " + std::to_string(usable.size()) +
                                              " start points inside the posterior support, need " +
                                              std::to_string(walkers));
  }
  Rng rng(derive_seed(settings.sampler.seed, 0x57a7));
  const auto perm = rng.permutation(usable.size());
  PointMatrix init(static_cast<Eigen::Index>(walkers), start_pool.cols());
  for (std::size_t w = 0; w < walkers; ++w) init.row(static_cast<Eigen::Index>(w)) = start_pool.row(usable[perm[w]]);
  return mcmc::ensemble_sample(log_post, init, settings.sampler);
}

std::size_t map_index(const mcmc::Chain& chain) {
  if (chain.log_posterior.size() == 0) throw Error(ErrorKind::invalid_argument, "empty chain");
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < chain.log_posterior.size(); ++i) {
    if (chain.log_posterior[i] > chain.log_posterior[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  }
  return best;
}

Vector map_estimate(const mcmc::Chain& chain) {
  return chain.samples.row(static_cast<Eigen::Index>(map_index(chain))).transpose();
}

std::size_t nearest_plausible(const ParameterSpace& space, const Eigen::Ref<const Vector>& point,
                              const PointMatrix& simulated) {
  if (simulated.rows() == 0) throw Error(ErrorKind::invalid_argument, "no simulated points");
  const Vector u = space.to_unit(point);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < simulated.rows(); ++i) {
    const double d = (space.to_unit(simulated.row(i).transpose()) - u).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

std::vector<Interval> credible_intervals(const mcmc::Chain& chain, double level) {
  std::vector<Interval> out;
  const auto n = chain.samples.rows();
  if (n == 0) throw Error(ErrorKind::invalid_argument, "empty chain");
  const double tail = 0.5 * (1.0 - level);
  auto quantile = [](std::vector<double>& v, double q) {
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  for (Eigen::Index c = 0; c < chain.samples.cols(); ++c) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = chain.samples(i, c);
    std::sort(v.begin(), v.end());
    out.push_back({quantile(v, tail), quantile(v, 1.0 - tail)});
  }
  return out;
}

}  // namespace lacal::calibration
