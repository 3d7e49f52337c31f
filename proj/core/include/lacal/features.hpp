#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace lacal {

/// The seven simulator biomarkers, in this fixed order.
enum class Feature : std::size_t {
  esv_ml = 0,
  d_global_mm,
  d_anterior_mm,
  d_posterior_mm,
  d_septum_mm,
  d_lateral_mm,
  d_roof_mm,
};

inline constexpr std::size_t kFeatureCount = 7;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "ESV_ml", "d_global_mm", "d_anterior_mm", "d_posterior_mm", "d_septum_mm", "d_lateral_mm", "d_roof_mm"};

using FeatureVector = std::array<double, kFeatureCount>;

inline double& at(FeatureVector& f, Feature k) { return f[static_cast<std::size_t>(k)]; }
inline double at(const FeatureVector& f, Feature k) { return f[static_cast<std::size_t>(k)]; }

}  // namespace lacal
