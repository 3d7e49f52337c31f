#pragma once

#include "lacal/types.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lacal::emulator {

struct EmulatorConfig {
  int restarts = 8;
  int max_iterations = 200;
  double lengthscale_min = 1e-2;  // bounds on delta^2 in normalised input units
  double lengthscale_max = 1e2;
  double signal_variance_min = 1e-2;  // standardised output units
  double signal_variance_max = 1e2;
  bool learn_noise = true;
  double noise_min = 1e-8;
  double noise_max = 0.5;
  double jitter_start = 1e-10;
  double jitter_max = 1e-4;
  std::uint64_t seed = 0;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct Predictions {
  Vector mean;
  Vector variance;
};

/// Trained GP for one scalar output: linear mean h(x) = [1, x] with
/// generalised-least-squares beta, squared-exponential kernel
/// sigma_f^2 exp(-sum((x_i - x'_i) / delta_i^2)^2) on inputs scaled to [0,1].
class Emulator {
 public:
  Emulator() = default;

  Prediction predict(const Eigen::Ref<const Vector>& x) const;
  Predictions predict_batch(const PointMatrix& x) const;
  /// Posterior mean only (no triangular solve).
  double predict_mean(const Eigen::Ref<const Vector>& x) const;
  /// Prior variance in output units; bounds every predictive variance.
  double prior_variance() const { return y_scale_ * y_scale_ * (sigma_f2_ + noise_); }

  /// True when any coordinate of x lies outside the training bounds.
  bool extrapolates(const Eigen::Ref<const Vector>& x) const;

  std::size_t dim() const { return static_cast<std::size_t>(lower_.size()); }
  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  const std::string& output_name() const { return output_name_; }
  const std::vector<std::string>& input_names() const { return input_names_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Vector& beta() const { return beta_; }
  bool linear_mean() const { return linear_mean_; }
  double signal_variance() const { return sigma_f2_; }
  /// delta_i per input (the kernel divides by delta_i^2).
  const Vector& delta() const { return delta_; }
  double noise() const { return noise_; }
  double jitter() const { return jitter_; }
  double output_mean() const { return y_mean_; }
  double output_scale() const { return y_scale_; }
  double log_marginal_likelihood() const { return log_marginal_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Training outputs mapped back to output units.
  Vector training_outputs() const;

  void write(std::ostream& out) const;
  static Emulator read(std::istream& in);
  void save(const std::string& path) const;
  static Emulator load(const std::string& path);

 private:
  friend Emulator fit_gpe(const PointMatrix&, const Vector&, const Vector&, const Vector&,
                          const EmulatorConfig&, const std::vector<std::string>&, const std::string&);

  void factorize();
  Vector basis(const Eigen::Ref<const Vector>& u) const;
  Vector cross_covariance(const Vector& u) const;

  std::string output_name_;
  std::vector<std::string> input_names_;
  Vector lower_;
  Vector upper_;
  bool linear_mean_ = true;
  Vector beta_;
  double sigma_f2_ = 1.0;
  Vector delta_;
  double noise_ = 0.0;
  double jitter_ = 0.0;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  PointMatrix x_;  // normalised training inputs
  Vector y_;       // standardised training outputs
  double log_marginal_ = 0.0;
  std::vector<std::string> warnings_;

  Eigen::LLT<Matrix> chol_;
  Vector alpha_;  // K^-1 (y - H beta)
};

/// Fit by maximising the log marginal likelihood (beta profiled out) over
/// lengthscales, signal variance and nugget with multi-start L-BFGS.
/// Inputs are normalised with the given bounds.
Emulator fit_gpe(const PointMatrix& x, const Vector& y, const Vector& lower, const Vector& upper,
                 const EmulatorConfig& config = {}, const std::vector<std::string>& input_names = {},
                 const std::string& output_name = "y");

double r2_score(const Vector& predicted, const Vector& observed);
double ise_score(const Predictions& predictions, const Vector& observed);

struct CrossValidation {
  std::vector<double> r2;
  std::vector<double> ise;
  double mean_r2 = 0.0;
  double mean_ise = 0.0;
};

/// k-fold cross validation with folds drawn from `seed`.
CrossValidation cross_validate(const PointMatrix& x, const Vector& y, const Vector& lower, const Vector& upper,
                               int k_folds = 5, const EmulatorConfig& config = {}, std::uint64_t seed = 0);

/// Fold index per row: a seeded permutation dealt round-robin.
std::vector<int> fold_assignment(std::size_t n, int k_folds, std::uint64_t seed);

}  // namespace lacal::emulator
