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
#include <vector>

#include "detail.hpp"
#include "dicekit/errors.hpp"
#include "dicekit/solvers.hpp"

namespace dicekit {
namespace {

void check_beta_eta(double beta, double eta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("odice: beta must lie in (0,1)");
  if (!(eta >= 0.0)) throw ParameterError("odice: eta must be nonnegative");
}

void accumulate_direction(const MleModel& m, const std::vector<detail::Triple>& triples,
                          const FGenerator& g, double beta, double eta, const Vector& nu,
                          OdiceDirection mode, Vector& out) {
  out.setZero(m.n_states);
  for (const auto& t : triples) {
    const double e = m.reward_hat(t.s, t.a) + m.gamma * nu(t.s_next) - nu(t.s);
    const double w = g.f_star0_prime(e);
    out(t.s) += t.weight * ((1.0 - beta) - beta * w);
    // With one parameter per state the forward and backward gradients are
    // parallel for self-loops and orthogonal otherwise.
    double backward = beta * m.gamma * w;
    if (mode == OdiceDirection::kOrthogonal) backward = t.s_next == t.s ? 0.0 : eta * backward;
    out(t.s_next) += t.weight * backward;
  }
}

}  // namespace

double odice_objective(const MleModel& model, const FGenerator& g, double beta, const Vector& nu) {
  check_beta_eta(beta, 0.0);
  double total = 0.0;
  for (const auto& t : detail::enumerate_triples(model)) {
    const double e = model.reward_hat(t.s, t.a) + model.gamma * nu(t.s_next) - nu(t.s);
    total += t.weight * ((1.0 - beta) * nu(t.s) + beta * g.f_star0(e));
  }
  return total;
}

Vector odice_direction(const MleModel& model, const FGenerator& g, double beta, double eta,
                       const Vector& nu, OdiceDirection mode) {
  check_beta_eta(beta, eta);
  Vector out;
  accumulate_direction(model, detail::enumerate_triples(model), g, beta, eta, nu, mode, out);
  return out;
}

CorrectionSet odice_solve(const MleModel& model, const FGenerator& g, double beta, double eta,
                          const OptimizerConfig& cfg) {
  cfg.validate();
  check_beta_eta(beta, eta);
  const auto triples = detail::enumerate_triples(model);
  const int S = model.n_states;

  // Diagonal preconditioner beta * d_D(s); unsupported states stay at 0.
  Vector inv_mass = Vector::Zero(S);
  for (int s = 0; s < S; ++s) {
    if (model.state_supported(s)) inv_mass(s) = 1.0 / (beta * model.d_D_state(s));
  }

  CorrectionSet out;
  out.kind = CorrectionSet::Kind::kPerPolicy;
  Vector nu = Vector::Zero(S);
  Vector dir;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    accumulate_direction(model, triples, g, beta, eta, nu, OdiceDirection::kOrthogonal, dir);
    const Vector step = cfg.step_size * inv_mass.cwiseProduct(dir);
    nu -= step;
    const double norm = step.lpNorm<Eigen::Infinity>();
    out.status.iterations = k;
    out.status.final_residual = norm;
    if (!std::isfinite(norm)) {
      out.status.message = "odice iterate diverged";
      break;
    }
    if (norm <= cfg.tol) {
      out.status.converged = true;
      break;
    }
  }
  if (!out.status.converged && out.status.message.empty()) out.status.message = "max_iters reached";

  Matrix w = Matrix::Zero(S, model.n_actions);
  for (const auto& t : triples) {
    const double e = model.reward_hat(t.s, t.a) + model.gamma * nu(t.s_next) - nu(t.s);
    if (g.saturated(e)) ++out.status.saturated_evaluations;
    w(t.s, t.a) += t.weight / model.d_D(t.s, t.a) * g.f_star0_prime(e);
  }
  out.w_a_given_s = std::move(w);
  out.q = model.reward_hat + model.gamma * detail::expected_next(model.transition_hat, S, model.n_actions, nu);
  out.nu = std::move(nu);
  return out;
}

}  // namespace dicekit
