#pragma once

#include "lacal/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lacal {

struct ParameterDescriptor {
  std::string name;  // carries the unit suffix, e.g. EDP_mmHg
  std::string unit;
  double lower = 0.0;
  double upper = 1.0;
};

/// Ordered, named, bounded simulator inputs.
class ParameterSpace {
 public:
  ParameterSpace() = default;
  explicit ParameterSpace(std::vector<ParameterDescriptor> parameters);

  std::size_t dim() const { return params_.size(); }
  const ParameterDescriptor& operator[](std::size_t i) const { return params_.at(i); }
  const std::vector<ParameterDescriptor>& parameters() const { return params_; }
  std::vector<std::string> names() const;
  Vector lower() const;
  Vector upper() const;

  /// Index of a named input; throws invalid-argument when absent.
  std::size_t index_of(const std::string& name) const;
  bool has(const std::string& name) const;

  Vector to_unit(const Eigen::Ref<const Vector>& x) const;
  Vector from_unit(const Eigen::Ref<const Vector>& u) const;
  PointMatrix to_unit_rows(const PointMatrix& x) const;
  PointMatrix from_unit_rows(const PointMatrix& u) const;
  bool contains(const Eigen::Ref<const Vector>& x) const;

  /// Same inputs with new bounds (e.g. an NROY bounding box).
  ParameterSpace with_bounds(const Vector& lower, const Vector& upper) const;

 private:
  std::vector<ParameterDescriptor> params_;
};

/// The 14 simulator inputs and their ranges: C and alpha per wall region,
/// EDP, ESP, pericardial stiffness and its threshold.
ParameterSpace full_input_space();

/// Calibration space after fixing C: alpha per region, EDP, ESP, k_peri, PTH.
ParameterSpace alpha_input_space();

inline constexpr double kFixedC_kPa = 1.7;

/// Scrambled Sobol' points scaled to the bounds.
PointMatrix sobol_design(const ParameterSpace& space, std::size_t n, std::uint64_t seed);

/// Latin hypercube scaled to the bounds.
PointMatrix lhs_design(const ParameterSpace& space, std::size_t n, std::uint64_t seed);

}  // namespace lacal
