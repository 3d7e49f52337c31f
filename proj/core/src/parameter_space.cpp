#include "lacal/parameter_space.hpp"

#include "lacal/error.hpp"
#include "lacal/geometry.hpp"
#include "lacal/qmc.hpp"

#include <set>

namespace lacal {

ParameterSpace::ParameterSpace(std::vector<ParameterDescriptor> parameters) : params_(std::move(parameters)) {
  std::set<std::string> seen;
  for (const auto& p : params_) {
    if (!(p.lower < p.upper)) throw Error(ErrorKind::invalid_argument, "input '" + p.name + "' needs lower < upper");
    if (!seen.insert(p.name).second) throw Error(ErrorKind::invalid_argument, "duplicate input name '" + p.name + "'");
  }
}

std::vector<std::string> ParameterSpace::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

Vector ParameterSpace::lower() const {
  Vector v(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < dim(); ++i) v[static_cast<Eigen::Index>(i)] = params_[i].lower;
  return v;
}

Vector ParameterSpace::upper() const {
  Vector v(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < dim(); ++i) v[static_cast<Eigen::Index>(i)] = params_[i].upper;
  return v;
}

std::size_t ParameterSpace::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw Error(ErrorKind::invalid_argument, "unknown input '" + name + "'");
}

bool ParameterSpace::has(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

Vector ParameterSpace::to_unit(const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw Error(ErrorKind::shape, "point dimension mismatch");
  return (x - lower()).cwiseQuotient(upper() - lower());
}

Vector ParameterSpace::from_unit(const Eigen::Ref<const Vector>& u) const {
  if (static_cast<std::size_t>(u.size()) != dim()) throw Error(ErrorKind::shape, "point dimension mismatch");
  return lower() + u.cwiseProduct(upper() - lower());
}

PointMatrix ParameterSpace::to_unit_rows(const PointMatrix& x) const {
  PointMatrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = to_unit(x.row(i).transpose()).transpose();
  return out;
}

PointMatrix ParameterSpace::from_unit_rows(const PointMatrix& u) const {
  PointMatrix out(u.rows(), u.cols());
  for (Eigen::Index i = 0; i < u.rows(); ++i) out.row(i) = from_unit(u.row(i).transpose()).transpose();
  return out;
}

bool ParameterSpace::contains(const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    const double v = x[static_cast<Eigen::Index>(i)];
    if (!(v >= params_[i].lower && v <= params_[i].upper)) return false;
  }
  return true;
}

ParameterSpace ParameterSpace::with_bounds(const Vector& lower, const Vector& upper) const {
  if (static_cast<std::size_t>(lower.size()) != dim() || static_cast<std::size_t>(upper.size()) != dim()) {
    throw Error(ErrorKind::shape, "bound vector dimension mismatch");
  }
  auto params = params_;
  for (std::size_t i = 0; i < dim(); ++i) {
    params[i].lower = lower[static_cast<Eigen::Index>(i)];
    params[i].upper = upper[static_cast<Eigen::Index>(i)];
  }
  return ParameterSpace(std::move(params));
}

namespace {

void add_common(std::vector<ParameterDescriptor>& p) {
  p.push_back({"EDP_mmHg", "mmHg", 1.0, 12.0});
  p.push_back({"ESP_mmHg", "mmHg", 13.0, 37.0});
  p.push_back({"k_peri_kPa_per_um", "kPa/um", 0.0001, 0.005});
  p.push_back({"PTH", "-", 0.5, 0.95});
}

}  // namespace

ParameterSpace full_input_space() {
  std::vector<ParameterDescriptor> p;
  for (auto r : geometry::kWallRegions) {
    const std::string name(geometry::region_name(r));
    p.push_back({"C_" + name + "_kPa", "kPa", 0.2, 6.8});
    p.push_back({"alpha_" + name, "-", 0.125, 4.0});
  }
  add_common(p);
  return ParameterSpace(std::move(p));
}

ParameterSpace alpha_input_space() {
  std::vector<ParameterDescriptor> p;
  for (auto r : geometry::kWallRegions) p.push_back({"alpha_" + std::string(geometry::region_name(r)), "-", 0.125, 4.0});
  add_common(p);
  return ParameterSpace(std::move(p));
}

PointMatrix sobol_design(const ParameterSpace& space, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "design size must be positive");
  return space.from_unit_rows(qmc::sobol_unit(n, space.dim(), seed));
}

PointMatrix lhs_design(const ParameterSpace& space, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "design size must be positive");
  return space.from_unit_rows(qmc::latin_hypercube_unit(n, space.dim(), seed));
}

}  // namespace lacal
