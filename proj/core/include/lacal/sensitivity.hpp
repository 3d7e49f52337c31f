#pragma once

#include "lacal/parameter_space.hpp"
#include "lacal/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lacal::sensitivity {

/// Saltelli layout: rows [A; B; AB_1; ...; AB_d], each block n_base rows.
/// AB_i is A with column i taken from B.
struct SaltelliDesign {
  std::size_t n_base = 0;
  std::size_t dim = 0;
  PointMatrix points;
  std::vector<std::string> warnings;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  /// First row of block k: 0 = A, 1 = B, 2 + i = AB_i.
  std::size_t block_start(std::size_t k) const { return k * n_base; }
};

SaltelliDesign saltelli_design(const ParameterSpace& space, std::size_t n_base, std::uint64_t seed);

struct SobolResult {
  std::vector<std::string> inputs;
  std::size_t n_base = 0;
  Vector first;     // S_i
  Vector total;     // S_Ti
  Vector first_ci;  // bootstrap 95% half-widths
  Vector total_ci;
  std::vector<std::string> flags;  // inputs with S_i below -0.05
};

/// Saltelli (2010) first-order and Jansen total-effect estimators on outputs
/// aligned with `design`, with bootstrap confidence half-widths.
SobolResult sobol_indices(const SaltelliDesign& design, const Vector& y, const std::vector<std::string>& inputs = {},
                          int bootstrap = 100, std::uint64_t seed = 0);

struct RankedInput {
  std::string name;
  std::size_t index = 0;
  double score = 0.0;
};

/// Per input the maximum total effect over outputs (negative estimates count
/// as zero), normalised to sum to one, sorted descending; ties keep input order.
std::vector<RankedInput> rank_parameters(const std::vector<SobolResult>& results);

/// gsa.csv: one row per input; S_<output> and ST_<output> columns plus the
/// normalised ranking score.
void write_gsa_csv(const std::string& path, const std::vector<SobolResult>& results,
                   const std::vector<std::string>& output_names, const std::string& header_comment = {});

}  // namespace lacal::sensitivity
