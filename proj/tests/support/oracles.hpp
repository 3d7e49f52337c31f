#pragma once

#include "lacal/mechanics.hpp"

#include <cmath>
#include <random>

namespace lacal::oracle {

using mechanics::MembraneModel;

inline Positions perturbed(const MembraneModel& model, std::mt19937_64& g, double amplitude) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  Positions x = model.reference();
  for (int v : model.free_vertices()) x[static_cast<std::size_t>(v)] += Vec3(u(g), u(g), u(g));
  return x;
}

// Relative error of the assembled gradient against central differences of the
// energy, over free coordinates.
inline double gradient_audit(const MembraneModel& model, const Positions& x, double p) {
  Positions g;
  model.energy_and_gradient(x, p, g);
  double num = 0.0;
  double den = 0.0;
  for (int v : model.free_vertices()) {
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-5;
      Positions xp = x;
      Positions xm = x;
      xp[static_cast<std::size_t>(v)][k] += h;
      xm[static_cast<std::size_t>(v)][k] -= h;
      const double fd = (model.energy(xp, p) - model.energy(xm, p)) / (2.0 * h);
      const double a = g[static_cast<std::size_t>(v)][k];
      num += (fd - a) * (fd - a);
      den += a * a;
    }
  }
  return std::sqrt(num / den);
}

// Equibiaxial incompressible membrane energy per reference volume with
// b_f = b_t = b_ft = b (in-plane isotropy).
inline double sphere_energy(double lambda, double C, double alpha, double b) {
  const double e = 0.5 * (lambda * lambda - 1.0);
  const double en = 0.5 * (std::pow(lambda, -4.0) - 1.0);
  const double q = alpha * b * (2.0 * e * e + en * en);
  return 0.5 * C * (std::exp(q) - 1.0);
}

// Thin-shell equilibrium of a pressurised sphere: p 4 pi r^2 dr = 4 pi R^2 H dW,
// so p = H W'(lambda) / (lambda^2 R). Solved for lambda by bisection.
inline double sphere_stretch(double p, double R, double H, double C, double alpha, double b) {
  auto pressure = [&](double l) {
    const double h = 1e-7;
    const double dw = (sphere_energy(l + h, C, alpha, b) - sphere_energy(l - h, C, alpha, b)) / (2.0 * h);
    return H * dw / (l * l * R);
  };
  double lo = 1.0;
  double hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pressure(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lacal::oracle
