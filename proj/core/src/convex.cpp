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

#include "dicekit/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dicekit {

NewtonResult minimize_newton(const ConvexObjective& objective, Vector x0, const NewtonOptions& options) {
  const Eigen::Index n = x0.size();
  NewtonResult out;
  out.x = std::move(x0);
  if (n == 0) {
    out.value = objective.value(out.x);
    out.converged = true;
    return out;
  }

  Vector grad(n);
  Matrix hess(n, n);
  double fx = objective.value(out.x);
  double lm = 0.0;
  // Round-off can keep accepting steps forever near the optimum; stop once
  // the gradient has not improved for a while and keep the best iterate.
  constexpr int kStallLimit = 20;
  Vector best_x = out.x;
  double best_grad = std::numeric_limits<double>::infinity();
  double best_f = fx;
  int stall = 0;

  for (int iter = 0; iter < options.max_iters; ++iter) {
    const bool structured = static_cast<bool>(objective.direction);
    objective.derivatives(out.x, &grad, structured ? nullptr : &hess);
    out.grad_norm = grad.lpNorm<Eigen::Infinity>();
    out.iterations = iter;
    if (out.grad_norm <= options.grad_tol) {
      out.converged = true;
      break;
    }
    if (out.grad_norm < best_grad) {
      best_grad = out.grad_norm;
      best_x = out.x;
      best_f = fx;
      stall = 0;
    } else if (++stall >= kStallLimit) {
      out.x = best_x;
      fx = best_f;
      break;
    }

    const double scale = structured ? 1.0 : std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
    lm = std::max(lm * 0.1, 1e-14 * scale);
    bool stepped = false;
    for (int attempt = 0; attempt < 30 && !stepped; ++attempt) {
      if (attempt > 0) lm *= 10.0;
      Vector dir(n);
      if (!structured || !objective.direction(out.x, grad, lm, &dir)) {
        if (structured) objective.derivatives(out.x, &grad, &hess);
        Matrix reg = hess;
        reg.diagonal().array() += lm;
        const Eigen::LDLT<Matrix> ldlt(reg);
        if (ldlt.info() != Eigen::Success) continue;
        dir = ldlt.solve(-grad);
      }
      double slope = grad.dot(dir);
      if (!dir.allFinite() || slope >= 0.0) continue;

      double t = 1.0;
      // Below this predicted decrease the comparison only sees round-off in f.
      const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fx));
      for (int ls = 0; ls < 60 && -options.armijo * t * slope > noise; ++ls, t *= 0.5) {
        const Vector trial = out.x + t * dir;
        const double ft = objective.value(trial);
        if (std::isfinite(ft) && ft <= fx + options.armijo * t * slope) {
          out.x = trial;
          fx = ft;
          stepped = true;
          break;
        }
      }
      if (!stepped) {
        // Near the optimum the decrease can drown in round-off; backtrack on
        // the gradient norm instead.
        Vector trial_grad(n);
        t = 1.0;
        for (int ls = 0; ls < 20 && !stepped; ++ls, t *= 0.5) {
          const Vector trial = out.x + t * dir;
          objective.derivatives(trial, &trial_grad, nullptr);
          if (trial_grad.lpNorm<Eigen::Infinity>() < out.grad_norm) {
            out.x = trial;
            fx = objective.value(trial);
            stepped = true;
          }
        }
      }
    }
    if (!stepped) break;
    out.iterations = iter + 1;
  }
  objective.derivatives(out.x, &grad, nullptr);
  out.grad_norm = grad.lpNorm<Eigen::Infinity>();
  out.converged = out.grad_norm <= options.grad_tol;
  out.value = fx;
  return out;
}

}  // namespace dicekit
