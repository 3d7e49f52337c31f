#include "lacal/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace lacal::optim {

MinimizeResult minimize_lbfgs(const Objective& objective, Vector x0,
                              const LbfgsSettings& settings) {
  MinimizeResult result;
  const auto n = x0.size();
  Vector g(n);
  double f = objective(x0, g);
  result.x = x0;
  result.value = f;
  if (!std::isfinite(f)) return result;

  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;
  Vector x = std::move(x0);
  Vector g_new(n);

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    result.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() < settings.gradient_tolerance) {
      result.converged = true;
      break;
    }

    // two-loop recursion
    Vector q = -g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[static_cast<std::size_t>(i)] = rho_hist[static_cast<std::size_t>(i)] * s_hist[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
    }
    if (!s_hist.empty()) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      q /= std::max(1.0, g.lpNorm<Eigen::Infinity>());
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vector direction = q;
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -g / std::max(1.0, g.lpNorm<Eigen::Infinity>());
      slope = g.dot(direction);
    }

    double step = 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = std::numeric_limits<double>::infinity();
    for (int k = 0; k < settings.max_backtracks; ++k) {
      x_new = x + step * direction;
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + settings.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > settings.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double decrease = f - f_new;
    x = std::move(x_new);
    g = g_new;
    f = f_new;
    result.x = x;
    result.value = f;
    result.iterations = iter + 1;
    if (decrease <= settings.function_tolerance * std::max(1.0, std::abs(f))) {
      // stalled: no measurable progress left at this precision
      result.converged = true;
      break;
    }
  }
  result.x = x;
  result.value = f;
  return result;
}

}  // namespace lacal::optim
