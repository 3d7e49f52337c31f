#pragma once

#include "lacal/geometry.hpp"
#include "lacal/types.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lacal::cohort {

struct CohortRow {
  std::string case_id;
  geometry::Region region = geometry::Region::anterior;
  double d_es_mm = 0.0;
  double thickness_mm = 0.0;
  double eat_ml = 0.0;
  double alpha = 0.0;
};

/// One row per (case, wall region).
struct CohortTable {
  std::vector<CohortRow> rows;

  /// Unique (case, region) pairs, wall regions only, at least two cases.
  void validate() const;
  std::size_t case_count() const;

  /// Value of a named column: d_es_mm, thickness_mm, eat_ml or alpha.
  double value(std::size_t row, const std::string& column) const;

  static CohortTable read_csv(const std::filesystem::path& path);
};

/// Random-intercept linear mixed model fitted by maximum likelihood.
struct LmmFit {
  std::vector<std::string> names;  // (Intercept), region contrasts vs anterior, covariate
  Vector beta;
  Vector se;
  Vector p_values;  // Wald, two-sided
  double sigma_u2 = 0.0;  // random-intercept variance
  double sigma2 = 0.0;    // residual variance
  double log_likelihood = 0.0;
  double log_likelihood_ols = 0.0;  // same fixed effects, random variance pinned to 0
  std::size_t n = 0;
  std::size_t groups = 0;
  bool converged = false;

  std::size_t index_of(const std::string& name) const;
};

/// y = X beta + u_group + e with u ~ N(0, sigma_u2), e ~ N(0, sigma2).
/// The variance ratio is profiled out and optimised on a log scale, with the
/// zero-variance boundary checked explicitly.
LmmFit fit_lmm(const Vector& y, const Matrix& x, const std::vector<int>& group, std::vector<std::string> names);

/// Response ~ 1 + region + covariate + (1 | case), anterior as reference.
LmmFit fit_lmm(const CohortTable& table, const std::string& response, const std::string& covariate);

/// Two-sided normal p-value of beta / se.
double wald_test(const LmmFit& fit, const std::string& coefficient);
double wald_p_value(double z);

struct PairedTest {
  std::size_t first = 0;
  std::size_t second = 0;
  double mean_difference = 0.0;
  double t = 0.0;
  int df = 0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
};

/// Paired t-tests on columns of a cases x groups matrix, Bonferroni-adjusted
/// over the number of comparisons.
std::vector<PairedTest> paired_ttest_bonferroni(const Matrix& values,
                                                const std::vector<std::pair<std::size_t, std::size_t>>& comparisons);

/// Cases x wall-region matrix of a column; cases ordered by first appearance.
Matrix region_matrix(const CohortTable& table, const std::string& column);

/// LMM fits of d_es_mm against thickness, EAT and alpha plus all pairwise
/// regional paired tests, as JSON text.
std::string stats_report_json(const CohortTable& table);

}  // namespace lacal::cohort
