#include "lacal/material.hpp"

#include "lacal/error.hpp"

#include <cmath>
#include <string>

namespace lacal::material {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorKind::invalid_argument, std::string(name) + " must be positive, got " + std::to_string(v));
  }
}

double exp_q(double q, double cap) {
  if (!(q <= cap)) {
    throw Error(ErrorKind::divergence, "Guccione exponent Q=" + std::to_string(q) + " exceeds cap " +
                                           std::to_string(cap));
  }
  return std::exp(q);
}

}  // namespace

void GuccioneParams::validate() const {
  require_positive(C, "C");
  require_positive(alpha, "alpha");
  require_positive(b_f, "b_f");
  require_positive(b_t, "b_t");
  require_positive(b_ft, "b_ft");
  if (!(kappa >= 0.0)) throw Error(ErrorKind::invalid_argument, "kappa must be non-negative");
}

void NeoHookeanParams::validate() const {
  require_positive(c, "c");
  if (!(kappa >= 0.0)) throw Error(ErrorKind::invalid_argument, "kappa must be non-negative");
}

GreenLagrangeStrain green_lagrange_from_C(const Mat2& C, bool incompressible_thickness) {
  const double det_c = C.determinant();
  if (!(det_c > 0.0)) {
    throw Error(ErrorKind::inverted_element, "non-positive in-plane stretch determinant");
  }
  GreenLagrangeStrain E;
  E.ff = 0.5 * (C(0, 0) - 1.0);
  E.ss = 0.5 * (C(1, 1) - 1.0);
  E.fs = 0.5 * C(0, 1);
  if (incompressible_thickness) {
    E.nn = 0.5 * (1.0 / det_c - 1.0);
    E.J = 1.0;
  } else {
    E.nn = 0.0;
    E.J = std::sqrt(det_c);
  }
  return E;
}

GreenLagrangeStrain green_lagrange_from_F(const Mat2& F, bool incompressible_thickness) {
  if (!(F.determinant() > 0.0)) {
    throw Error(ErrorKind::inverted_element, "det(F) = " + std::to_string(F.determinant()));
  }
  return green_lagrange_from_C(F.transpose() * F, incompressible_thickness);
}

double guccione_exponent(const GreenLagrangeStrain& E, const GuccioneParams& p) {
  return p.alpha * (p.b_f * E.ff * E.ff + 2.0 * p.b_ft * (E.fs * E.fs + E.fn * E.fn) +
                    p.b_t * (E.ss * E.ss + E.nn * E.nn + 2.0 * E.sn * E.sn));
}

double guccione_energy(const GreenLagrangeStrain& E, const GuccioneParams& p, double exponent_cap) {
  if (!(E.J > 0.0)) throw Error(ErrorKind::inverted_element, "J = " + std::to_string(E.J));
  const double q = guccione_exponent(E, p);
  const double log_j = std::log(E.J);
  return 0.5 * p.C * (exp_q(q, exponent_cap) - 1.0) + 0.5 * p.kappa * log_j * log_j;
}

FiberFrameStress guccione_stress(const GreenLagrangeStrain& E, const GuccioneParams& p, double exponent_cap) {
  const double q = guccione_exponent(E, p);
  const double k = p.C * p.alpha * exp_q(q, exponent_cap);
  FiberFrameStress S;
  S.ff = k * p.b_f * E.ff;
  S.ss = k * p.b_t * E.ss;
  S.nn = k * p.b_t * E.nn;
  S.fs = k * p.b_ft * E.fs;
  S.fn = k * p.b_ft * E.fn;
  S.sn = k * p.b_t * E.sn;
  return S;
}

double neohookean_energy(double I1, double J, const NeoHookeanParams& p) {
  if (!(J > 0.0)) throw Error(ErrorKind::inverted_element, "J = " + std::to_string(J));
  const double log_j = std::log(J);
  return p.c * (I1 - 3.0) + 0.5 * p.kappa * log_j * log_j;
}

MembraneResponse guccione_membrane(const Mat2& C, const GuccioneParams& p, double exponent_cap) {
  const GreenLagrangeStrain E = green_lagrange_from_C(C, true);
  const double q = guccione_exponent(E, p);
  const double eq = exp_q(q, exponent_cap);
  const double k = p.C * p.alpha * eq;
  MembraneResponse r;
  r.energy = 0.5 * p.C * (eq - 1.0);
  const double s_nn = k * p.b_t * E.nn;
  const Mat2 c_inv = C.inverse();
  const double inv_det = 1.0 / C.determinant();
  r.stress(0, 0) = k * p.b_f * E.ff;
  r.stress(1, 1) = k * p.b_t * E.ss;
  r.stress(0, 1) = r.stress(1, 0) = k * p.b_ft * E.fs;
  r.stress -= s_nn * inv_det * c_inv;
  return r;
}

MembraneResponse neohookean_membrane(const Mat2& C, const NeoHookeanParams& p) {
  const double det_c = C.determinant();
  if (!(det_c > 0.0)) {
    throw Error(ErrorKind::inverted_element, "non-positive in-plane stretch determinant");
  }
  MembraneResponse r;
  r.energy = p.c * (C.trace() + 1.0 / det_c - 3.0);
  r.stress = 2.0 * p.c * (Mat2::Identity() - C.inverse() / det_c);
  return r;
}

}  // namespace lacal::material
