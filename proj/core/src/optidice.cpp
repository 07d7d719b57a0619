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

#include <cmath>

#include "detail.hpp"
#include "dicekit/convex.hpp"
#include "dicekit/errors.hpp"
#include "dicekit/solvers.hpp"

namespace dicekit {
namespace {

void check_reward(const MleModel& m, const Matrix& reward) {
  if (reward.rows() != m.n_states || reward.cols() != m.n_actions) {
    throw ParameterError("optidice: reward shape mismatch");
  }
}

// e_nu(s,a) = r(s,a) + gamma E_T[nu(s')] - nu(s).
Matrix advantage(const MleModel& m, const Matrix& reward, const Vector& nu) {
  Matrix e = reward + m.gamma * detail::expected_next(m.transition_hat, m.n_states, m.n_actions, nu);
  e.colwise() -= nu;
  return e;
}

// Objective, gradient and Hessian restricted to the supported states.
class DualObjective {
 public:
  DualObjective(const MleModel& m, const FGenerator& g, double alpha, const Matrix& reward)
      : m_(m), g_(g), alpha_(alpha), reward_(reward), index_(m) {}

  const detail::StateIndex& index() const { return index_; }

  double value(const Vector& nu_full) const {
    const Matrix e = advantage(m_, reward_, nu_full);
    double total = (1.0 - m_.gamma) * m_.p0_hat.dot(nu_full);
    for (int s : index_.states) {
      for (int a = 0; a < m_.n_actions; ++a) {
        if (m_.supported(s, a)) total += m_.d_D(s, a) * alpha_ * g_.f_star0(e(s, a) / alpha_);
      }
    }
    return total;
  }

  void derivatives(const Vector& nu_full, Vector* grad, Matrix* hess) const {
    const int n = index_.size();
    const Matrix e = advantage(m_, reward_, nu_full);
    Vector full_grad = (1.0 - m_.gamma) * m_.p0_hat;
    if (hess != nullptr) hess->setZero(n, n);
    Vector direction(n);
    for (int s : index_.states) {
      for (int a = 0; a < m_.n_actions; ++a) {
        if (!m_.supported(s, a)) continue;
        const double y = e(s, a) / alpha_;
        const double weight = m_.d_D(s, a) * g_.f_star0_prime(y);
        const auto t_row = m_.transition_hat.row(m_.row(s, a));
        full_grad += weight * m_.gamma * t_row.transpose();
        full_grad(s) -= weight;
        if (hess == nullptr) continue;
        const double curvature = m_.d_D(s, a) * g_.f_star0_second(y) / alpha_;
        if (curvature == 0.0) continue;
        for (int i = 0; i < n; ++i) direction(i) = m_.gamma * t_row(index_.states[i]);
        direction(index_.position[s]) -= 1.0;
        hess->selfadjointView<Eigen::Lower>().rankUpdate(direction, curvature);
      }
    }
    if (hess != nullptr) *hess = hess->selfadjointView<Eigen::Lower>();
    *grad = index_.compress(full_grad);
  }

 private:
  const MleModel& m_;
  FGenerator g_;
  double alpha_;
  const Matrix& reward_;
  detail::StateIndex index_;
};

}  // namespace

double optidice_objective(const MleModel& model, const FGenerator& g, double alpha,
                          const Matrix& reward, const Vector& nu) {
  check_reward(model, reward);
  return DualObjective(model, g, alpha, reward).value(nu);
}

Vector optidice_gradient(const MleModel& model, const FGenerator& g, double alpha,
                         const Matrix& reward, const Vector& nu) {
  check_reward(model, reward);
  const DualObjective obj(model, g, alpha, reward);
  Vector reduced;
  obj.derivatives(nu, &reduced, nullptr);
  return obj.index().expand(reduced, model.n_states);
}

CorrectionSet optidice_solve_penalized(const MleModel& model, const FGenerator& g,
                                       const OptimizerConfig& cfg, const Matrix& reward,
                                       const Vector* nu_init) {
  cfg.validate();
  check_reward(model, reward);
  if (model.n_supported_states() == 0) throw InputError("optidice: empty support");
  const DualObjective obj(model, g, cfg.alpha, reward);
  const auto& index = obj.index();
  const int S = model.n_states;

  ConvexObjective problem;
  problem.value = [&](const Vector& x) { return obj.value(index.expand(x, S)); };
  problem.derivatives = [&](const Vector& x, Vector* grad, Matrix* hess) {
    obj.derivatives(index.expand(x, S), grad, hess);
  };
  NewtonOptions opts;
  opts.max_iters = cfg.max_iters;
  opts.grad_tol = cfg.tol;
  const Vector x0 = nu_init != nullptr ? index.compress(*nu_init) : Vector::Zero(index.size());
  const NewtonResult res = minimize_newton(problem, x0, opts);

  CorrectionSet out;
  out.kind = CorrectionSet::Kind::kStateAction;
  out.nu = index.expand(res.x, S);
  const Matrix e = advantage(model, reward, out.nu);
  Matrix w = Matrix::Zero(S, model.n_actions);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < model.n_actions; ++a) {
      if (!model.supported(s, a)) continue;
      const double y = e(s, a) / cfg.alpha;
      if (g.saturated(y)) ++out.status.saturated_evaluations;
      w(s, a) = g.f_star0_prime(y);
    }
  }
  out.w_sa = std::move(w);
  out.status.converged = res.converged;
  out.status.iterations = res.iterations;
  out.status.final_residual = res.grad_norm;
  if (!res.converged) out.status.message = "newton did not reach the gradient tolerance";
  return out;
}

CorrectionSet optidice_solve(const MleModel& model, const FGenerator& g, const OptimizerConfig& cfg) {
  return optidice_solve_penalized(model, g, cfg, model.reward_hat, nullptr);
}

}  // namespace dicekit
