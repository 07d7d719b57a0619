// Copyright 2026 The dicekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DICEKIT_CONVEX_HPP_
#define DICEKIT_CONVEX_HPP_

#include <functional>

#include "dicekit/mdp.hpp"

namespace dicekit {

// Smooth (C^1, piecewise C^2) convex objective over R^n.
struct ConvexObjective {
  std::function<double(const Vector&)> value;
  // Writes the gradient and, when `hessian` is non-null, a (generalized) Hessian.
  std::function<void(const Vector&, Vector* gradient, Matrix* hessian)> derivatives;
  // Optional structured solve for the regularized Newton direction at x with
  // damping lm. Returns false to fall back to a dense Hessian solve.
  std::function<bool(const Vector& x, const Vector& gradient, double lm, Vector* direction)> direction;
};

struct NewtonOptions {
  int max_iters = 500;
  double grad_tol = 1e-10;  // on ||grad||_inf
  double armijo = 1e-4;
};

struct NewtonResult {
  Vector x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped Newton with Levenberg-Marquardt regularization and Armijo
// backtracking. The regularization handles the singular Hessians of
// piecewise-quadratic conjugates (chi2 has a flat region).
NewtonResult minimize_newton(const ConvexObjective& objective, Vector x0,
                             const NewtonOptions& options = {});

}  // namespace dicekit

#endif  // DICEKIT_CONVEX_HPP_
