#pragma once

#include "lacal/types.hpp"

namespace lacal::material {

/// Transversely isotropic Guccione law with a single multiplier `alpha` on the
/// exponent. Stiffness in kPa, exponents dimensionless.
struct GuccioneParams {
  double C = 1.7;
  double alpha = 1.0;
  double b_f = 8.0;
  double b_t = 3.0;
  double b_ft = 4.0;
  double kappa = 0.0;

  void validate() const;
};

struct NeoHookeanParams {
  double c = 7.45;  // kPa
  double kappa = 0.0;

  void validate() const;
};

/// Green-Lagrange strain in the fibre (f), sheet (s), normal (n) frame.
struct GreenLagrangeStrain {
  double ff = 0.0, ss = 0.0, nn = 0.0, fs = 0.0, fn = 0.0, sn = 0.0;
  double J = 1.0;
};

/// Second Piola-Kirchhoff stress in the same frame. Off-diagonal entries are
/// tensor components, so dPsi/dE_fs (one scalar shear) equals 2 * fs.
struct FiberFrameStress {
  double ff = 0.0, ss = 0.0, nn = 0.0, fs = 0.0, fn = 0.0, sn = 0.0;
};

inline constexpr double kDefaultExponentCap = 50.0;

/// Membrane strain from the 2x2 in-plane deformation gradient expressed in the
/// fibre/sheet basis. Transverse shears vanish; with `incompressible_thickness`
/// the thickness stretch is 1/det(F) and J = 1, otherwise E_nn = 0 and J = det(F).
GreenLagrangeStrain green_lagrange_from_F(const Mat2& F, bool incompressible_thickness);

/// Same, from the in-plane right Cauchy-Green tensor C = F^T F.
GreenLagrangeStrain green_lagrange_from_C(const Mat2& C, bool incompressible_thickness);

double guccione_exponent(const GreenLagrangeStrain& E, const GuccioneParams& p);

/// Psi = C/2 (e^Q - 1) + kappa/2 (ln J)^2. Throws `divergence` when Q exceeds the cap.
double guccione_energy(const GreenLagrangeStrain& E, const GuccioneParams& p,
                       double exponent_cap = kDefaultExponentCap);

/// Derivative of the exponential term with respect to E.
FiberFrameStress guccione_stress(const GreenLagrangeStrain& E, const GuccioneParams& p,
                                 double exponent_cap = kDefaultExponentCap);

/// Psi = c (I1 - 3) + kappa/2 ln^2(J).
double neohookean_energy(double I1, double J, const NeoHookeanParams& p);

/// Strain energy per reference volume and in-plane stress S = 2 dW/dC of a
/// kinematically incompressible membrane, with C given in the fibre/sheet basis.
struct MembraneResponse {
  double energy = 0.0;
  Mat2 stress = Mat2::Zero();
};

MembraneResponse guccione_membrane(const Mat2& C, const GuccioneParams& p,
                                   double exponent_cap = kDefaultExponentCap);
MembraneResponse neohookean_membrane(const Mat2& C, const NeoHookeanParams& p);

}  // namespace lacal::material
