#pragma once

#include "lacal/types.hpp"

#include <cstdint>

namespace lacal::qmc {

/// First `n` points of a `d`-dimensional Sobol' sequence in [0,1)^d with a
/// seeded random digital shift. The shift keeps the net structure; seed 0 is
/// the unshifted sequence.
PointMatrix sobol_unit(std::size_t n, std::size_t d, std::uint64_t seed);

/// Latin hypercube sample in [0,1)^d: each column hits every one of the n
/// strata exactly once, jittered uniformly inside the stratum.
PointMatrix latin_hypercube_unit(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace lacal::qmc
