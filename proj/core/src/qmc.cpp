#include "lacal/qmc.hpp"

#include "lacal/error.hpp"
#include "lacal/random.hpp"

#include <boost/random/sobol.hpp>

#include <string>

namespace lacal::qmc {

PointMatrix sobol_unit(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (d == 0) {
    throw Error(ErrorKind::empty_space, "Sobol' sequence requested with zero dimensions");
  }
  boost::random::sobol engine(d);
  std::vector<std::uint64_t> shift(d, 0);
  if (seed != 0) {
    Rng rng(seed);
    for (auto& s : shift) s = rng.bits();
  }
  PointMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::uint64_t v = static_cast<std::uint64_t>(engine()) ^ shift[j];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(v >> 11) * 0x1.0p-53;
    }
  }
  return out;
}

PointMatrix latin_hypercube_unit(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (d == 0) {
    throw Error(ErrorKind::empty_space, "Latin hypercube requested with zero dimensions");
  }
  Rng rng(seed);
  PointMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const double width = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    const auto perm = rng.permutation(n);
    for (std::size_t i = 0; i < n; ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (static_cast<double>(perm[i]) + rng.uniform()) * width;
    }
  }
  return out;
}

}  // namespace lacal::qmc
