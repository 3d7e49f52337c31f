#include "lacal/sensitivity.hpp"

#include "lacal/error.hpp"
#include "lacal/qmc.hpp"
#include "lacal/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace lacal::sensitivity {

SaltelliDesign saltelli_design(const ParameterSpace& space, std::size_t n_base, std::uint64_t seed) {
  const std::size_t d = space.dim();
  if (d == 0) throw Error(ErrorKind::empty_space, "parameter space has no inputs");
  if (n_base == 0) throw Error(ErrorKind::invalid_argument, "N_base must be positive");
  SaltelliDesign design;
  design.n_base = n_base;
  design.dim = d;
  if (!std::has_single_bit(n_base)) design.warnings.push_back("N_base is not a power of 2");
  const PointMatrix base = qmc::sobol_unit(n_base, 2 * d, seed);
  const auto n = static_cast<Eigen::Index>(n_base);
  const auto dd = static_cast<Eigen::Index>(d);
  PointMatrix u(n * static_cast<Eigen::Index>(d + 2), dd);
  u.topRows(n) = base.leftCols(dd);
  u.middleRows(n, n) = base.rightCols(dd);
  for (Eigen::Index i = 0; i < dd; ++i) {
    auto block = u.middleRows((2 + i) * n, n);
    block = base.leftCols(dd);
    block.col(i) = base.col(dd + i);
  }
  design.points = space.from_unit_rows(u);
  return design;
}

namespace {

struct Estimate {
  Vector first;
  Vector total;
};

Estimate estimate(const SaltelliDesign& design, const Vector& y, const std::vector<std::size_t>& rows) {
  const std::size_t n = rows.size();
  const std::size_t d = design.dim;
  double mean = 0.0;
  for (std::size_t r : rows) mean += y[static_cast<Eigen::Index>(r)] + y[static_cast<Eigen::Index>(design.n_base + r)];
  mean /= static_cast<double>(2 * n);
  double var = 0.0;
  for (std::size_t r : rows) {
    const double a = y[static_cast<Eigen::Index>(r)] - mean;
    const double b = y[static_cast<Eigen::Index>(design.n_base + r)] - mean;
    var += a * a + b * b;
  }
  var /= static_cast<double>(2 * n);
  Estimate e{Vector::Zero(static_cast<Eigen::Index>(d)), Vector::Zero(static_cast<Eigen::Index>(d))};
  if (!(var > 0.0)) return e;
  for (std::size_t i = 0; i < d; ++i) {
    double s1 = 0.0;
    double st = 0.0;
    for (std::size_t r : rows) {
      const double fa = y[static_cast<Eigen::Index>(r)];
      const double fb = y[static_cast<Eigen::Index>(design.n_base + r)];
      const double fab = y[static_cast<Eigen::Index>(design.block_start(2 + i) + r)];
      s1 += (fb - mean) * (fab - fa);
      st += (fa - fab) * (fa - fab);
    }
    e.first[static_cast<Eigen::Index>(i)] = s1 / static_cast<double>(n) / var;
    e.total[static_cast<Eigen::Index>(i)] = 0.5 * st / static_cast<double>(n) / var;
  }
  return e;
}

}  // namespace

SobolResult sobol_indices(const SaltelliDesign& design, const Vector& y, const std::vector<std::string>& inputs,
                          int bootstrap, std::uint64_t seed) {
  if (static_cast<std::size_t>(y.size()) != design.size()) {
    throw Error(ErrorKind::shape, "output count does not match the Saltelli design");
  }
  if (!y.allFinite()) throw Error(ErrorKind::undefined_indices, "non-finite model outputs");
  const std::size_t n = design.n_base;
  const std::size_t d = design.dim;
  const Vector ab = y.head(static_cast<Eigen::Index>(2 * n));
  if ((ab.array() - ab.mean()).square().sum() == 0.0) {
    throw Error(ErrorKind::undefined_indices, "output variance is zero");
  }
  SobolResult res;
  res.n_base = n;
  res.inputs = inputs;
  if (res.inputs.empty()) {
    for (std::size_t i = 0; i < d; ++i) res.inputs.push_back("x" + std::to_string(i + 1));
  }
  if (res.inputs.size() != d) throw Error(ErrorKind::shape, "input name count mismatch");

  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  const Estimate point = estimate(design, y, rows);
  res.first = point.first;
  res.total = point.total;

  res.first_ci = Vector::Zero(static_cast<Eigen::Index>(d));
  res.total_ci = Vector::Zero(static_cast<Eigen::Index>(d));
  if (bootstrap > 1) {
    Rng rng(derive_seed(seed, 0xb007));
    Matrix s1(bootstrap, static_cast<Eigen::Index>(d));
    Matrix st(bootstrap, static_cast<Eigen::Index>(d));
    for (int b = 0; b < bootstrap; ++b) {
      for (auto& r : rows) r = rng.index(n);
      const Estimate e = estimate(design, y, rows);
      s1.row(b) = e.first.transpose();
      st.row(b) = e.total.transpose();
    }
    auto sd = [bootstrap](const Matrix& m, Eigen::Index c) {
      const double mu = m.col(c).mean();
      return std::sqrt((m.col(c).array() - mu).square().sum() / static_cast<double>(bootstrap - 1));
    };
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d); ++c) {
      res.first_ci[c] = 1.96 * sd(s1, c);
      res.total_ci[c] = 1.96 * sd(st, c);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (res.first[static_cast<Eigen::Index>(i)] < -0.05) res.flags.push_back(res.inputs[i]);
  }
  return res;
}

std::vector<RankedInput> rank_parameters(const std::vector<SobolResult>& results) {
  if (results.empty()) return {};
  const std::size_t d = results.front().inputs.size();
  std::vector<RankedInput> out(d);
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double best = 0.0;
    for (const auto& r : results) {
      if (r.inputs.size() != d) throw Error(ErrorKind::shape, "results disagree on the input set");
      best = std::max(best, r.total[static_cast<Eigen::Index>(i)]);
    }
    out[i] = {results.front().inputs[i], i, best};
    sum += best;
  }
  if (sum > 0.0) {
    for (auto& r : out) r.score /= sum;
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedInput& a, const RankedInput& b) { return a.score > b.score; });
  return out;
}

void write_gsa_csv(const std::string& path, const std::vector<SobolResult>& results,
                   const std::vector<std::string>& output_names, const std::string& header_comment) {
  if (results.size() != output_names.size()) throw Error(ErrorKind::shape, "one output name per result required");
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  if (!header_comment.empty()) out << header_comment;
  const auto ranking = rank_parameters(results);
  std::vector<double> score(results.empty() ? 0 : results.front().inputs.size(), 0.0);
  for (const auto& r : ranking) score[r.index] = r.score;
  out << "input";
  for (const auto& name : output_names) out << ",S_" << name << ",ST_" << name;
  out << ",rank_score\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < score.size(); ++i) {
    out << results.front().inputs[i];
    for (const auto& r : results) {
      out << ',' << r.first[static_cast<Eigen::Index>(i)] << ',' << r.total[static_cast<Eigen::Index>(i)];
    }
    out << ',' << score[i] << '\n';
  }
}

}  // namespace lacal::sensitivity
