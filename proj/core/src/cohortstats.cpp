#include "lacal/cohortstats.hpp"

#include "lacal/csv.hpp"
#include "lacal/error.hpp"

#include <json.hpp>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

namespace lacal::cohort {

using geometry::Region;

void CohortTable::validate() const {
  std::set<std::pair<std::string, Region>> seen;
  for (const auto& r : rows) {
    if (r.region == Region::rim) throw Error(ErrorKind::invalid_argument, "cohort rows must use wall regions");
    if (!seen.insert({r.case_id, r.region}).second) {
      throw Error(ErrorKind::invalid_argument, "duplicate row for case '" + r.case_id + "', region '" +
                                                   std::string(geometry::region_name(r.region)) + "'");
    }
  }
  if (case_count() < 2) throw Error(ErrorKind::invalid_argument, "mixed modelling needs at least 2 cases");
}

std::size_t CohortTable::case_count() const {
  std::set<std::string> ids;
  for (const auto& r : rows) ids.insert(r.case_id);
  return ids.size();
}

double CohortTable::value(std::size_t row, const std::string& column) const {
  const auto& r = rows.at(row);
  if (column == "d_es_mm") return r.d_es_mm;
  if (column == "thickness_mm") return r.thickness_mm;
  if (column == "eat_ml") return r.eat_ml;
  if (column == "alpha") return r.alpha;
  throw Error(ErrorKind::invalid_argument, "unknown cohort column '" + column + "'");
}

CohortTable CohortTable::read_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const auto c_case = t.column("case_id");
  const auto c_region = t.column("region");
  const auto c_d = t.column("d_es_mm");
  const auto c_th = t.column("thickness_mm");
  const auto c_eat = t.column("eat_ml");
  const auto c_alpha = t.column("alpha");
  CohortTable table;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CohortRow r;
    r.case_id = t.rows[i][c_case];
    r.region = geometry::region_from_name(t.rows[i][c_region]);
    r.d_es_mm = t.number(i, c_d);
    r.thickness_mm = t.number(i, c_th);
    r.eat_ml = t.number(i, c_eat);
    r.alpha = t.number(i, c_alpha);
    table.rows.push_back(r);
  }
  table.validate();
  return table;
}

std::size_t LmmFit::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw Error(ErrorKind::invalid_argument, "no coefficient named '" + name + "'");
}

namespace {

// Sufficient statistics of the random-intercept model.
struct Moments {
  Matrix xtx;
  Vector xty;
  double yty = 0.0;
  std::vector<Vector> sx;   // per group X^T 1
  std::vector<double> sy;   // per group 1^T y
  std::vector<double> size;
  double n = 0.0;
};

struct Profile {
  double loglik = 0.0;
  Vector beta;
  Matrix a;
  double sigma2 = 0.0;
};

Profile profile(const Moments& m, double lambda) {
  Profile p;
  p.a = m.xtx;
  Vector b = m.xty;
  double ywy = m.yty;
  double logdet = 0.0;
  for (std::size_t j = 0; j < m.sx.size(); ++j) {
    const double c = lambda / (1.0 + lambda * m.size[j]);
    p.a.noalias() -= c * m.sx[j] * m.sx[j].transpose();
    b -= c * m.sy[j] * m.sx[j];
    ywy -= c * m.sy[j] * m.sy[j];
    logdet += std::log1p(lambda * m.size[j]);
  }
  p.beta = p.a.ldlt().solve(b);
  p.sigma2 = std::max((ywy - p.beta.dot(b)) / m.n, 1e-300);
  p.loglik = -0.5 * m.n * (std::log(2.0 * std::numbers::pi * p.sigma2) + 1.0) - 0.5 * logdet;
  return p;
}

}  // namespace

LmmFit fit_lmm(const Vector& y, const Matrix& x, const std::vector<int>& group, std::vector<std::string> names) {
  const auto n = y.size();
  const auto p = x.cols();
  if (x.rows() != n || static_cast<Eigen::Index>(group.size()) != n) throw Error(ErrorKind::shape, "LMM inputs disagree in length");
  if (static_cast<Eigen::Index>(names.size()) != p) throw Error(ErrorKind::shape, "one name per fixed effect required");
  if (n <= p) throw Error(ErrorKind::identifiability, "more fixed effects than observations");
  const Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < p) throw Error(ErrorKind::identifiability, "singular fixed-effect design (constant or collinear covariate)");

  // canonical row order so the fit is bitwise independent of input order
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < p; ++c) {
      if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
    }
    if (y[a] != y[b]) return y[a] < y[b];
    return group[static_cast<std::size_t>(a)] < group[static_cast<std::size_t>(b)];
  });
  std::map<int, std::size_t> gidx;
  for (Eigen::Index i : order) gidx.emplace(group[static_cast<std::size_t>(i)], gidx.size());
  if (gidx.size() < 2) throw Error(ErrorKind::identifiability, "need at least 2 groups");
  Moments m;
  m.n = static_cast<double>(n);
  const Matrix xs = x(order, Eigen::all);
  const Vector ys = y(order);
  m.xtx = xs.transpose() * xs;
  m.xty = xs.transpose() * ys;
  m.yty = ys.squaredNorm();
  m.sx.assign(gidx.size(), Vector::Zero(p));
  m.sy.assign(gidx.size(), 0.0);
  m.size.assign(gidx.size(), 0.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t g = gidx.at(group[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
    m.sx[g] += xs.row(k).transpose();
    m.sy[g] += ys[k];
    m.size[g] += 1.0;
  }

  const Profile ols = profile(m, 0.0);
  // coarse grid on log(lambda) brackets the optimum for Brent
  constexpr double lo = -20.0;
  constexpr double hi = 10.0;
  constexpr int grid = 61;
  double best_t = lo;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid; ++k) {
    const double t = lo + (hi - lo) * k / (grid - 1);
    const double ll = profile(m, std::exp(t)).loglik;
    if (ll > best_ll) {
      best_ll = ll;
      best_t = t;
    }
  }
  const double step = (hi - lo) / (grid - 1);
  const auto res = boost::math::tools::brent_find_minima(
      [&m](double t) { return -profile(m, std::exp(t)).loglik; }, std::max(lo, best_t - step),
      std::min(hi, best_t + step), 52);
  double lambda = std::exp(res.first);
  Profile best = profile(m, lambda);
  if (ols.loglik >= best.loglik) {
    lambda = 0.0;
    best = ols;
  }

  LmmFit fit;
  fit.names = std::move(names);
  fit.beta = best.beta;
  fit.sigma2 = best.sigma2;
  fit.sigma_u2 = lambda * best.sigma2;
  fit.log_likelihood = best.loglik;
  fit.log_likelihood_ols = ols.loglik;
  fit.n = static_cast<std::size_t>(n);
  fit.groups = gidx.size();
  const Matrix cov = best.sigma2 * best.a.inverse();
  fit.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.p_values.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    fit.p_values[i] = fit.se[i] > 0.0 ? wald_p_value(fit.beta[i] / fit.se[i]) : 1.0;
  }
  fit.converged = std::isfinite(fit.log_likelihood);
  return fit;
}

LmmFit fit_lmm(const CohortTable& table, const std::string& response, const std::string& covariate) {
  table.validate();
  std::vector<Region> contrasts;
  for (auto r : geometry::kWallRegions) {
    if (r == Region::anterior) continue;
    if (std::any_of(table.rows.begin(), table.rows.end(), [r](const CohortRow& row) { return row.region == r; })) {
      contrasts.push_back(r);
    }
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto p = static_cast<Eigen::Index>(contrasts.size() + 2);
  Matrix x = Matrix::Zero(n, p);
  Vector y(n);
  std::vector<int> group;
  std::map<std::string, int> ids;
  std::vector<std::string> names{"(Intercept)"};
  for (auto r : contrasts) names.push_back("region[" + std::string(geometry::region_name(r)) + "]");
  names.push_back(covariate);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    for (std::size_t c = 0; c < contrasts.size(); ++c) {
      if (row.region == contrasts[c]) x(i, static_cast<Eigen::Index>(c + 1)) = 1.0;
    }
    x(i, p - 1) = table.value(static_cast<std::size_t>(i), covariate);
    y[i] = table.value(static_cast<std::size_t>(i), response);
    group.push_back(ids.emplace(row.case_id, static_cast<int>(ids.size())).first->second);
  }
  return fit_lmm(y, x, group, names);
}

double wald_p_value(double z) {
  const boost::math::normal_distribution<double> normal;
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(z))));
}

double wald_test(const LmmFit& fit, const std::string& coefficient) {
  const auto i = static_cast<Eigen::Index>(fit.index_of(coefficient));
  if (!(fit.se[i] > 0.0)) throw Error(ErrorKind::degenerate_test, "zero standard error for '" + coefficient + "'");
  return wald_p_value(fit.beta[i] / fit.se[i]);
}

std::vector<PairedTest> paired_ttest_bonferroni(const Matrix& values,
                                                const std::vector<std::pair<std::size_t, std::size_t>>& comparisons) {
  const auto n = values.rows();
  if (n < 2) throw Error(ErrorKind::invalid_argument, "paired tests need at least 2 cases");
  const double k = static_cast<double>(comparisons.size());
  std::vector<PairedTest> out;
  for (const auto& [a, b] : comparisons) {
    if (a >= static_cast<std::size_t>(values.cols()) || b >= static_cast<std::size_t>(values.cols())) {
      throw Error(ErrorKind::shape, "comparison refers to a missing column");
    }
    const Vector d = values.col(static_cast<Eigen::Index>(a)) - values.col(static_cast<Eigen::Index>(b));
    PairedTest t;
    t.first = a;
    t.second = b;
    t.df = static_cast<int>(n - 1);
    t.mean_difference = d.mean();
    const double sd = std::sqrt((d.array() - t.mean_difference).square().sum() / static_cast<double>(n - 1));
    if (sd == 0.0) {
      if (t.mean_difference != 0.0) {
        throw Error(ErrorKind::degenerate_test, "constant non-zero differences between columns " + std::to_string(a) +
                                                    " and " + std::to_string(b));
      }
      t.t = 0.0;
      t.p_raw = 1.0;
    } else {
      t.t = t.mean_difference / (sd / std::sqrt(static_cast<double>(n)));
      const boost::math::students_t_distribution<double> dist(static_cast<double>(t.df));
      t.p_raw = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t.t))));
    }
    t.p_adjusted = std::min(1.0, t.p_raw * k);
    out.push_back(t);
  }
  return out;
}

Matrix region_matrix(const CohortTable& table, const std::string& column) {
  std::vector<std::string> cases;
  std::map<std::string, std::size_t> idx;
  for (const auto& r : table.rows) {
    if (idx.emplace(r.case_id, cases.size()).second) cases.push_back(r.case_id);
  }
  Matrix m = Matrix::Constant(static_cast<Eigen::Index>(cases.size()), static_cast<Eigen::Index>(geometry::kWallRegionCount),
                              std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    m(static_cast<Eigen::Index>(idx.at(r.case_id)), static_cast<Eigen::Index>(geometry::index_of(r.region))) =
        table.value(i, column);
  }
  if (!m.allFinite()) throw Error(ErrorKind::invalid_argument, "every case needs all five wall regions for paired tests");
  return m;
}

std::string stats_report_json(const CohortTable& table) {
  using nlohmann::json;
  json report;
  report["cases"] = table.case_count();
  report["rows"] = table.rows.size();
  json lmm = json::array();
  for (const std::string cov : {"thickness_mm", "eat_ml", "alpha"}) {
    json entry;
    entry["response"] = "d_es_mm";
    entry["covariate"] = cov;
    try {
      const LmmFit fit = fit_lmm(table, "d_es_mm", cov);
      json coefs = json::array();
      for (std::size_t i = 0; i < fit.names.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        coefs.push_back({{"name", fit.names[i]}, {"estimate", fit.beta[k]}, {"se", fit.se[k]}, {"p_wald", fit.p_values[k]}});
      }
      entry["coefficients"] = coefs;
      entry["sigma_u2"] = fit.sigma_u2;
      entry["sigma2"] = fit.sigma2;
      entry["log_likelihood"] = fit.log_likelihood;
      entry["converged"] = fit.converged;
    } catch (const Error& e) {
      entry["error"] = e.what();
    }
    lmm.push_back(entry);
  }
  report["lmm"] = lmm;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < geometry::kWallRegionCount; ++a) {
    for (std::size_t b = a + 1; b < geometry::kWallRegionCount; ++b) pairs.emplace_back(a, b);
  }
  json paired = json::object();
  for (const std::string col : {"d_es_mm", "alpha"}) {
    json tests = json::array();
    try {
      for (const auto& t : paired_ttest_bonferroni(region_matrix(table, col), pairs)) {
        tests.push_back({{"first", geometry::region_name(geometry::kWallRegions[t.first])},
                         {"second", geometry::region_name(geometry::kWallRegions[t.second])},
                         {"mean_difference", t.mean_difference},
                         {"t", t.t},
                         {"df", t.df},
                         {"p_raw", t.p_raw},
                         {"p_bonferroni", t.p_adjusted}});
      }
      paired[col] = tests;
    } catch (const Error& e) {
      paired[col] = {{"error", e.what()}};
    }
  }
  report["paired_t"] = paired;
  return report.dump(2);
}

}  // namespace lacal::cohort
