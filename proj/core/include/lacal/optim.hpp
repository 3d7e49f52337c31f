#pragma once

#include "lacal/types.hpp"

#include <functional>

namespace lacal::optim {

/// Objective returning f(x) and writing its gradient. Returning a non-finite
/// value marks x as infeasible; the line search backs off from it.
using Objective = std::function<double(const Vector& x, Vector& gradient)>;

struct LbfgsSettings {
  int max_iterations = 200;
  int memory = 8;
  double gradient_tolerance = 1e-6;   // inf-norm
  double function_tolerance = 1e-12;  // relative decrease between iterates
  int max_backtracks = 40;
  double armijo = 1e-4;
};

struct MinimizeResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with Armijo backtracking. Every accepted iterate
/// strictly decreases the objective.
MinimizeResult minimize_lbfgs(const Objective& objective, Vector x0,
                              const LbfgsSettings& settings = {});

}  // namespace lacal::optim
