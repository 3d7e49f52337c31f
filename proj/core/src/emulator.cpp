#include "lacal/emulator.hpp"

#include "lacal/error.hpp"
#include "lacal/optim.hpp"
#include "lacal/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace lacal::emulator {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Matrix basis_matrix(const PointMatrix& u, bool linear) {
  const auto n = u.rows();
  Matrix h(n, linear ? u.cols() + 1 : 1);
  h.col(0).setOnes();
  if (linear) h.rightCols(u.cols()) = u;
  return h;
}

// Kernel part of the covariance (no diagonal nugget).
Matrix kernel_matrix(const PointMatrix& u, const Vector& ell, double sf2) {
  const auto n = u.rows();
  const Vector inv2 = ell.array().square().inverse();
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = sf2;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double s = ((u.row(i) - u.row(j)).array().square() * inv2.transpose().array()).sum();
      k(i, j) = k(j, i) = sf2 * std::exp(-s);
    }
  }
  return k;
}

bool factor_with_jitter(const Matrix& k, double base_diag, double& jitter, double jitter_max, Eigen::LLT<Matrix>& llt) {
  const auto n = k.rows();
  while (jitter <= jitter_max * (1.0 + 1e-12)) {
    Matrix a = k;
    a.diagonal().array() += base_diag + jitter;
    llt.compute(a);
    if (llt.info() == Eigen::Success) return true;
    jitter *= 10.0;
  }
  (void)n;
  return false;
}

struct Problem {
  const PointMatrix& u;
  const Vector& y;
  const Matrix& h;
  const EmulatorConfig& cfg;
  std::size_t d;
  // log-space bounds per hyperparameter
  Vector lo;
  Vector hi;

  std::size_t size() const { return d + (cfg.learn_noise ? 2 : 1); }

  Vector to_theta(const Vector& z) const {
    Vector t(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-z[i]));
      t[i] = lo[i] + (hi[i] - lo[i]) * s;
    }
    return t;
  }

  Vector to_z(const Vector& theta) const {
    Vector z(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double s = std::clamp((theta[i] - lo[i]) / (hi[i] - lo[i]), 1e-9, 1.0 - 1e-9);
      z[i] = std::log(s / (1.0 - s));
    }
    return z;
  }

  // Negative log marginal likelihood with beta profiled by GLS.
  double nll(const Vector& theta, Vector* grad) const {
    const auto n = u.rows();
    const Vector ell = theta.head(static_cast<Eigen::Index>(d)).array().exp();
    const double sf2 = std::exp(theta[static_cast<Eigen::Index>(d)]);
    const double noise = cfg.learn_noise ? std::exp(theta[static_cast<Eigen::Index>(d + 1)]) : 0.0;
    const Matrix kf = kernel_matrix(u, ell, sf2);
    Eigen::LLT<Matrix> llt;
    double jitter = cfg.jitter_start;
    if (!factor_with_jitter(kf, noise, jitter, cfg.jitter_max, llt)) return std::numeric_limits<double>::infinity();
    const Matrix kih = llt.solve(h);
    const Matrix a_mat = h.transpose() * kih;
    const Eigen::LDLT<Matrix> a_ldlt(a_mat);
    const Vector beta = a_ldlt.solve(kih.transpose() * y);
    const Vector r = y - h * beta;
    const Vector alpha = llt.solve(r);
    const Matrix& l = llt.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(l(i, i));
    const double value = 0.5 * r.dot(alpha) + logdet + 0.5 * static_cast<double>(n) * kLog2Pi;
    if (!std::isfinite(value)) return std::numeric_limits<double>::infinity();
    if (grad != nullptr) {
      Matrix w = llt.solve(Matrix::Identity(n, n));
      w.noalias() -= alpha * alpha.transpose();
      grad->setZero(static_cast<Eigen::Index>(size()));
      const Vector inv2 = ell.array().square().inverse();
      double g_sf = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        g_sf += 0.5 * w(j, j) * kf(j, j);
        for (Eigen::Index i = j + 1; i < n; ++i) {
          const double c = w(i, j) * kf(i, j);  // pair counted twice, times 1/2
          g_sf += c;
          for (std::size_t q = 0; q < d; ++q) {
            const double diff = u(i, static_cast<Eigen::Index>(q)) - u(j, static_cast<Eigen::Index>(q));
            (*grad)[static_cast<Eigen::Index>(q)] += c * 2.0 * diff * diff * inv2[static_cast<Eigen::Index>(q)];
          }
        }
      }
      (*grad)[static_cast<Eigen::Index>(d)] = g_sf;
      if (cfg.learn_noise) (*grad)[static_cast<Eigen::Index>(d + 1)] = 0.5 * noise * w.trace();
    }
    return value;
  }
};

}  // namespace

Vector Emulator::basis(const Eigen::Ref<const Vector>& u) const {
  Vector hb(linear_mean_ ? u.size() + 1 : 1);
  hb[0] = 1.0;
  if (linear_mean_) hb.tail(u.size()) = u;
  return hb;
}

void Emulator::factorize() {
  const auto n = x_.rows();
  const Vector ell = delta_.array().square();
  const Matrix kf = kernel_matrix(x_, ell, sigma_f2_);
  double jitter = jitter_;
  if (!factor_with_jitter(kf, noise_, jitter, std::max(1e-4, jitter_), chol_)) {
    throw Error(ErrorKind::fit, "training covariance not positive definite up to jitter 1e-4");
  }
  jitter_ = jitter;
  const Matrix h = basis_matrix(x_, linear_mean_);
  const Matrix kih = chol_.solve(h);
  const Eigen::LDLT<Matrix> a_ldlt(h.transpose() * kih);
  beta_ = a_ldlt.solve(kih.transpose() * y_);
  const Vector r = y_ - h * beta_;
  alpha_ = chol_.solve(r);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(chol_.matrixLLT()(i, i));
  log_marginal_ = -(0.5 * r.dot(alpha_) + logdet + 0.5 * static_cast<double>(n) * kLog2Pi);
}

Vector Emulator::cross_covariance(const Vector& u) const {
  const auto n = x_.rows();
  const Vector inv2 = delta_.array().pow(4).inverse();
  Vector ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = ((x_.row(i).transpose() - u).array().square() * inv2.array()).sum();
    ks[i] = sigma_f2_ * std::exp(-s);
  }
  return ks;
}

Prediction Emulator::predict(const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) {
    throw Error(ErrorKind::shape, "emulator '" + output_name_ + "' expects " + std::to_string(dim()) +
                                      " inputs, got " + std::to_string(x.size()));
  }
  const Vector u = (x - lower_).cwiseQuotient(upper_ - lower_);
  const Vector ks = cross_covariance(u);
  const double mean = basis(u).dot(beta_) + ks.dot(alpha_);
  const Vector v = chol_.matrixL().solve(ks);
  const double var = std::max(0.0, sigma_f2_ + noise_ - v.squaredNorm());
  return {y_mean_ + y_scale_ * mean, y_scale_ * y_scale_ * var};
}

double Emulator::predict_mean(const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) {
    throw Error(ErrorKind::shape, "emulator '" + output_name_ + "' expects " + std::to_string(dim()) +
                                      " inputs, got " + std::to_string(x.size()));
  }
  const Vector u = (x - lower_).cwiseQuotient(upper_ - lower_);
  return y_mean_ + y_scale_ * (basis(u).dot(beta_) + cross_covariance(u).dot(alpha_));
}

Predictions Emulator::predict_batch(const PointMatrix& x) const {
  Predictions out{Vector(x.rows()), Vector(x.rows())};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Prediction p = predict(x.row(i).transpose());
    out.mean[i] = p.mean;
    out.variance[i] = p.variance;
  }
  return out;
}

bool Emulator::extrapolates(const Eigen::Ref<const Vector>& x) const {
  return (x.array() < lower_.array()).any() || (x.array() > upper_.array()).any();
}

Vector Emulator::training_outputs() const { return (y_.array() * y_scale_ + y_mean_).matrix(); }

Emulator fit_gpe(const PointMatrix& x, const Vector& y, const Vector& lower, const Vector& upper,
                 const EmulatorConfig& config, const std::vector<std::string>& input_names,
                 const std::string& output_name) {
  const auto n = x.rows();
  const auto d = static_cast<std::size_t>(x.cols());
  if (n == 0 || d == 0) throw Error(ErrorKind::shape, "empty training design");
  if (y.size() != n) throw Error(ErrorKind::shape, "design has " + std::to_string(n) + " rows but " +
                                                      std::to_string(y.size()) + " outputs");
  if (static_cast<std::size_t>(lower.size()) != d || static_cast<std::size_t>(upper.size()) != d) {
    throw Error(ErrorKind::shape, "bounds do not match the input dimension");
  }
  if (!((upper - lower).array() > 0.0).all()) throw Error(ErrorKind::invalid_argument, "bounds must satisfy lower < upper");
  if (!y.allFinite() || !x.allFinite()) throw Error(ErrorKind::fit, "non-finite training data");
  if (!input_names.empty() && input_names.size() != d) throw Error(ErrorKind::shape, "input name count mismatch");

  Emulator em;
  em.output_name_ = output_name;
  em.input_names_ = input_names;
  if (em.input_names_.empty()) {
    for (std::size_t i = 0; i < d; ++i) em.input_names_.push_back("x" + std::to_string(i + 1));
  }
  em.lower_ = lower;
  em.upper_ = upper;
  if (static_cast<std::size_t>(n) < 10 * d) {
    em.warnings_.push_back("training size " + std::to_string(n) + " below 10 x input dimension");
  }
  em.x_ = PointMatrix(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    em.x_.row(i) = (x.row(i).transpose() - lower).cwiseQuotient(upper - lower).transpose();
  }
  em.y_mean_ = y.mean();
  const double sd = n > 1 ? std::sqrt((y.array() - em.y_mean_).square().sum() / static_cast<double>(n - 1)) : 0.0;
  em.y_scale_ = sd > 0.0 ? sd : 1.0;
  em.y_ = ((y.array() - em.y_mean_) / em.y_scale_).matrix();

  em.linear_mean_ = static_cast<std::size_t>(n) > d + 1;
  if (!em.linear_mean_) em.warnings_.push_back("too few points for a linear mean; using a constant mean");
  const Matrix h = basis_matrix(em.x_, em.linear_mean_);
  if (em.linear_mean_) {
    const Eigen::ColPivHouseholderQR<Matrix> qr(h);
    if (qr.rank() < h.cols()) throw Error(ErrorKind::fit, "rank-deficient design for the linear mean basis");
  }

  Problem prob{em.x_, em.y_, h, config, d, Vector(), Vector()};
  const auto m = static_cast<Eigen::Index>(prob.size());
  prob.lo.resize(m);
  prob.hi.resize(m);
  prob.lo.head(static_cast<Eigen::Index>(d)).setConstant(std::log(config.lengthscale_min));
  prob.hi.head(static_cast<Eigen::Index>(d)).setConstant(std::log(config.lengthscale_max));
  prob.lo[static_cast<Eigen::Index>(d)] = std::log(config.signal_variance_min);
  prob.hi[static_cast<Eigen::Index>(d)] = std::log(config.signal_variance_max);
  if (config.learn_noise) {
    prob.lo[m - 1] = std::log(config.noise_min);
    prob.hi[m - 1] = std::log(config.noise_max);
  }

  const optim::Objective objective = [&prob](const Vector& z, Vector& grad) {
    const Vector theta = prob.to_theta(z);
    Vector g;
    const double f = prob.nll(theta, &g);
    if (!std::isfinite(f)) return f;
    grad.resize(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-z[i]));
      grad[i] = g[i] * (prob.hi[i] - prob.lo[i]) * s * (1.0 - s);
    }
    return f;
  };

  Rng rng(derive_seed(config.seed, 0x6770));
  optim::LbfgsSettings ls;
  ls.max_iterations = config.max_iterations;
  ls.gradient_tolerance = 1e-5;
  ls.function_tolerance = 1e-10;
  double best = std::numeric_limits<double>::infinity();
  Vector best_theta;
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Vector theta(m);
    for (std::size_t q = 0; q < d; ++q) {
      theta[static_cast<Eigen::Index>(q)] = r == 0 ? 0.0 : rng.uniform(std::log(0.2), std::log(5.0));
    }
    theta[static_cast<Eigen::Index>(d)] = r == 0 ? 0.0 : rng.uniform(std::log(0.1), std::log(10.0));
    if (config.learn_noise) theta[m - 1] = r == 0 ? std::log(1e-4) : rng.uniform(std::log(1e-6), std::log(1e-2));
    Vector z0 = prob.to_z(theta);
    Vector g0;
    if (!std::isfinite(objective(z0, g0))) continue;
    const optim::MinimizeResult res = optim::minimize_lbfgs(objective, z0, ls);
    if (std::isfinite(res.value) && res.value < best) {
      best = res.value;
      best_theta = prob.to_theta(res.x);
    }
  }
  if (!std::isfinite(best)) throw Error(ErrorKind::fit, "log marginal likelihood non-finite at every restart");

  em.delta_ = best_theta.head(static_cast<Eigen::Index>(d)).array().exp().sqrt();
  em.sigma_f2_ = std::exp(best_theta[static_cast<Eigen::Index>(d)]);
  em.noise_ = config.learn_noise ? std::exp(best_theta[m - 1]) : 0.0;
  em.jitter_ = config.jitter_start;
  em.factorize();
  return em;
}

void Emulator::write(std::ostream& out) const {
  out << std::setprecision(17);
  out << "lacal-gpe 1\n";
  out << "output " << output_name_ << '\n';
  out << "inputs " << dim() << '\n';
  for (std::size_t i = 0; i < dim(); ++i) {
    out << "input " << input_names_[i] << ' ' << lower_[static_cast<Eigen::Index>(i)] << ' '
        << upper_[static_cast<Eigen::Index>(i)] << '\n';
  }
  out << "mean " << (linear_mean_ ? "linear" : "constant") << '\n';
  out << "sigma_f2 " << sigma_f2_ << '\n';
  out << "delta";
  for (Eigen::Index i = 0; i < delta_.size(); ++i) out << ' ' << delta_[i];
  out << '\n';
  out << "noise " << noise_ << '\n';
  out << "jitter " << jitter_ << '\n';
  out << "output_mean " << y_mean_ << '\n';
  out << "output_scale " << y_scale_ << '\n';
  out << "training " << x_.rows() << '\n';
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    for (Eigen::Index j = 0; j < x_.cols(); ++j) out << x_(i, j) << ' ';
    out << y_[i] << '\n';
  }
}

namespace {

void expect(std::istream& in, const std::string& key) {
  std::string k;
  if (!(in >> k) || k != key) throw Error(ErrorKind::io, "emulator file: expected '" + key + "', found '" + k + "'");
}

}  // namespace

Emulator Emulator::read(std::istream& in) {
  Emulator em;
  std::string tag;
  int version = 0;
  // leading '#' lines carry artifact metadata
  while (in >> std::ws && in.peek() == '#') {
    std::string skip;
    std::getline(in, skip);
  }
  if (!(in >> tag >> version) || tag != "lacal-gpe" || version != 1) {
    throw Error(ErrorKind::io, "not a lacal-gpe version 1 file");
  }
  expect(in, "output");
  in >> em.output_name_;
  expect(in, "inputs");
  std::size_t d = 0;
  in >> d;
  em.lower_.resize(static_cast<Eigen::Index>(d));
  em.upper_.resize(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    expect(in, "input");
    std::string name;
    in >> name >> em.lower_[static_cast<Eigen::Index>(i)] >> em.upper_[static_cast<Eigen::Index>(i)];
    em.input_names_.push_back(name);
  }
  expect(in, "mean");
  std::string mean_kind;
  in >> mean_kind;
  em.linear_mean_ = mean_kind == "linear";
  expect(in, "sigma_f2");
  in >> em.sigma_f2_;
  expect(in, "delta");
  em.delta_.resize(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) in >> em.delta_[static_cast<Eigen::Index>(i)];
  expect(in, "noise");
  in >> em.noise_;
  expect(in, "jitter");
  in >> em.jitter_;
  expect(in, "output_mean");
  in >> em.y_mean_;
  expect(in, "output_scale");
  in >> em.y_scale_;
  expect(in, "training");
  std::size_t n = 0;
  in >> n;
  em.x_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  em.y_.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) in >> em.x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    in >> em.y_[static_cast<Eigen::Index>(i)];
  }
  if (!in) throw Error(ErrorKind::io, "truncated emulator file");
  em.factorize();
  return em;
}

void Emulator::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  write(out);
}

Emulator Emulator::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path);
  return read(in);
}

double r2_score(const Vector& predicted, const Vector& observed) {
  if (predicted.size() != observed.size()) throw Error(ErrorKind::shape, "prediction/observation length mismatch");
  if (observed.size() < 2) throw Error(ErrorKind::undefined_score, "R2 needs at least 2 points");
  const double mean = observed.mean();
  const double tss = (observed.array() - mean).square().sum();
  if (tss == 0.0) throw Error(ErrorKind::undefined_score, "zero total sum of squares");
  const double rss = (observed - predicted).squaredNorm();
  return 1.0 - rss / tss;
}

double ise_score(const Predictions& predictions, const Vector& observed) {
  if (predictions.mean.size() != observed.size() || predictions.variance.size() != observed.size()) {
    throw Error(ErrorKind::shape, "prediction/observation length mismatch");
  }
  if (observed.size() == 0) return 0.0;
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < observed.size(); ++i) {
    if (std::abs(predictions.mean[i] - observed[i]) < 2.0 * std::sqrt(predictions.variance[i])) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(observed.size());
}

std::vector<int> fold_assignment(std::size_t n, int k_folds, std::uint64_t seed) {
  if (k_folds < 2) throw Error(ErrorKind::invalid_argument, "need at least 2 folds");
  if (n < static_cast<std::size_t>(k_folds)) throw Error(ErrorKind::fold_size, "fewer points than folds");
  Rng rng(derive_seed(seed, 0xcf));
  const auto perm = rng.permutation(n);
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k_folds));
  return fold;
}

CrossValidation cross_validate(const PointMatrix& x, const Vector& y, const Vector& lower, const Vector& upper,
                               int k_folds, const EmulatorConfig& config, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto fold = fold_assignment(n, k_folds, seed);
  CrossValidation cv;
  for (int f = 0; f < k_folds; ++f) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
    if (test.size() < 2) throw Error(ErrorKind::fold_size, "fold " + std::to_string(f) + " has fewer than 2 points");
    const PointMatrix xt = x(train, Eigen::all);
    const Vector yt = y(train);
    const PointMatrix xv = x(test, Eigen::all);
    const Vector yv = y(test);
    const Emulator em = fit_gpe(xt, yt, lower, upper, config);
    const Predictions p = em.predict_batch(xv);
    cv.r2.push_back(r2_score(p.mean, yv));
    cv.ise.push_back(ise_score(p, yv));
  }
  for (std::size_t f = 0; f < cv.r2.size(); ++f) {
    cv.mean_r2 += cv.r2[f] / static_cast<double>(cv.r2.size());
    cv.mean_ise += cv.ise[f] / static_cast<double>(cv.ise.size());
  }
  return cv;
}

}  // namespace lacal::emulator
