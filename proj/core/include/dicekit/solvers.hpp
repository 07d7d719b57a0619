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

#ifndef DICEKIT_SOLVERS_HPP_
#define DICEKIT_SOLVERS_HPP_

#include <optional>
#include <string>

#include "dicekit/dataset.hpp"
#include "dicekit/divergence.hpp"
#include "dicekit/mdp.hpp"

namespace dicekit {

struct OptimizerConfig {
  double alpha = 0.01;
  double beta = 0.5;   // f-DVL / ODICE temperature, in (0, 1)
  double eta = 1.0;    // ODICE projected-gradient weight
  int max_iters = 100000;
  double tol = 1e-10;
  double step_size = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Convergence {
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;  // gradient norm or fixed-point update norm
  long saturated_evaluations = 0;
  std::string message;
};

struct CorrectionSet {
  enum class Kind { kStateAction, kPerPolicy, kState };

  Kind kind = Kind::kStateAction;
  std::optional<Matrix> w_sa;
  std::optional<Matrix> w_a_given_s;
  std::optional<Vector> w_s;
  Vector nu;
  std::optional<Matrix> q;
  std::optional<Vector> mu;
  std::optional<Vector> a_approx;
  std::optional<double> lambda_cost;
  Convergence status;

  // w(s,a) for state-action kind, w(a|s) for per-policy kind.
  const Matrix& weights() const;
};

std::string_view kind_name(CorrectionSet::Kind kind);

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double viol_bellman_flow = 0.0;
  double viol_policy_correction = 0.0;
  double ope_reward = 0.0;
  double ope_cost = 0.0;
  double exact_return = 0.0;
  double wall_time_ms = 0.0;
};

// ---------------------------------------------------------------------------
// Full-gradient OptiDICE on the MLE model.
//
// Minimizes (1-gamma) E_{p0}[nu] + alpha E_{d_D}[f*_0(e_nu / alpha)] with
// e_nu(s,a) = r(s,a) + gamma E_{T_hat}[nu(s')] - nu(s). The dual variables
// live on visited states; nu is fixed at 0 on states the data never leaves
// from, so flow into them is not constrained.
// ---------------------------------------------------------------------------
CorrectionSet optidice_solve(const MleModel& model, const FGenerator& g, const OptimizerConfig& cfg);

// Same, with reward r - lambda c and the given warm start for nu.
CorrectionSet optidice_solve_penalized(const MleModel& model, const FGenerator& g,
                                       const OptimizerConfig& cfg, const Matrix& reward,
                                       const Vector* nu_init = nullptr);

double optidice_objective(const MleModel& model, const FGenerator& g, double alpha,
                          const Matrix& reward, const Vector& nu);
Vector optidice_gradient(const MleModel& model, const FGenerator& g, double alpha,
                         const Matrix& reward, const Vector& nu);

// ---------------------------------------------------------------------------
// Semi-gradient family. Q(s,a) = r(s,a) + gamma E_{T_hat}[v(s')] is computed
// exactly; the per-state variable solves a one-dimensional root problem by
// bisection, and the outer loop is a damped fixed-point iteration.
// ---------------------------------------------------------------------------

// SemiDICE. `penalized_reward` replaces reward_hat when given; `nu_init`
// warm-starts the iteration.
CorrectionSet semidice_solve(const MleModel& model, const FGenerator& g, const OptimizerConfig& cfg,
                             const Matrix* penalized_reward = nullptr, const Vector* nu_init = nullptr);

// f-DVL: target (1-beta)/beta and unscaled conjugate argument Q - nu.
CorrectionSet fdvl_solve(const MleModel& model, const FGenerator& g, double beta,
                         const OptimizerConfig& cfg);

// SQL: per-state V minimizes E_{pi_D}[V + alpha max(0, 1 + (Q-V)/(2 alpha)) (1 + (Q-V)/(2 alpha))].
CorrectionSet sql_solve(const MleModel& model, double alpha, const OptimizerConfig& cfg);

// XQL: V(s) = alpha log sum_a pi_D(a|s) exp(Q(s,a)/alpha), w = exp((Q-V)/alpha).
CorrectionSet xql_solve(const MleModel& model, double alpha, const OptimizerConfig& cfg);

// Root of sum_a pi_D(a|s) max(0, (f')^{-1}((q_a - nu)/scale)) = target for one
// state, by bisection to floating-point resolution. Exposed for testing.
double solve_state_normalizer(const FGenerator& g, const Eigen::Ref<const Eigen::RowVectorXd>& q,
                              const Eigen::Ref<const Eigen::RowVectorXd>& pi_D, double scale,
                              double target);

// ---------------------------------------------------------------------------
// ODICE: gradient descent on the triple-enumerated objective
//   sum_{s,a,s'} d_D(s,a) T_hat(s'|s,a) [(1-beta) nu(s) + beta f*_0(r + gamma nu(s') - nu(s))]
// where each triple's backward gradient is projected orthogonal to its
// forward gradient and scaled by eta.
// ---------------------------------------------------------------------------
CorrectionSet odice_solve(const MleModel& model, const FGenerator& g, double beta, double eta,
                          const OptimizerConfig& cfg);

enum class OdiceDirection { kOrthogonal, kFullGradient };

double odice_objective(const MleModel& model, const FGenerator& g, double beta, const Vector& nu);
Vector odice_direction(const MleModel& model, const FGenerator& g, double beta, double eta,
                       const Vector& nu, OdiceDirection mode);

// ---------------------------------------------------------------------------
// Tabular policy extraction.
// ---------------------------------------------------------------------------
struct ExtractedPolicy {
  TabularPolicy policy;
  int n_fallback_states = 0;  // visited states whose numerator vanished
};

ExtractedPolicy extract_tabular_policy(const CorrectionSet& corr, const MleModel& model);

}  // namespace dicekit

#endif  // DICEKIT_SOLVERS_HPP_
