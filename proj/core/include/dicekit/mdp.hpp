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

#ifndef DICEKIT_MDP_HPP_
#define DICEKIT_MDP_HPP_

#include <cstdint>

#include <Eigen/Dense>

namespace dicekit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Finite discounted MDP. Transitions are stored as a (S*A) x S row-stochastic
// matrix whose row s*A + a holds T(.|s,a).
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  Matrix transition;
  Matrix reward;  // S x A
  Matrix cost;    // S x A, nonnegative
  Vector p0;
  double gamma = 0.0;

  Eigen::Index row(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions + a; }
  double T(int s, int a, int next) const { return transition(row(s, a), next); }

  // Throws ParameterError on any violated invariant (shapes, stochasticity
  // within 1e-12, gamma in [0,1), nonnegative costs).
  void validate() const;
};

struct TabularPolicy {
  Matrix probs;  // S x A, rows are distributions

  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_actions() const { return static_cast<int>(probs.cols()); }
  double operator()(int s, int a) const { return probs(s, a); }

  static TabularPolicy uniform(int n_states, int n_actions);
  static TabularPolicy deterministic(const Eigen::VectorXi& actions, int n_actions);
  void validate() const;
};

enum class Signal { kReward, kCost };

struct RandomMdpParams {
  int n_states = 30;
  int n_actions = 4;
  int n_successors = 4;
  double gamma = 0.95;
};

// Random benchmark MDP: each (s,a) moves to n_successors distinct states with
// Dir(1,...,1) probabilities; the start state is 0 and a single goal state
// pays reward 1 for every action. The goal is the reachable non-start state
// that minimizes the optimal value of the start state (lowest index on ties).
TabularMdp generate_random_mdp(std::uint64_t seed, const RandomMdpParams& params = {});

// States with at least one positive reward entry.
Eigen::VectorXi reward_states(const TabularMdp& mdp);

struct PlanningResult {
  Matrix q;
  Vector v;
  TabularPolicy policy;
  int iterations = 0;
};

// Value iteration until ||V_k - V_{k-1}||_inf <= tol. The returned policy is
// greedy in Q with lowest-index tie-breaking.
PlanningResult value_iteration(const TabularMdp& mdp, double tol);

// Exact optimal values by policy iteration. Used where value iteration would
// be too slow (goal selection runs one solve per candidate state).
PlanningResult policy_iteration(const TabularMdp& mdp);

// weight * p1 + (1 - weight) * p2.
TabularPolicy mixture_policy(const TabularPolicy& p1, const TabularPolicy& p2, double weight);

// Benchmark data-collection policy: even mixture of the optimal and the
// uniform policy.
TabularPolicy benchmark_behavior_policy(const TabularMdp& mdp);

// Discounted occupancy d_pi(s,a) = (1-gamma) sum_t gamma^t Pr(s_t=s, a_t=a),
// obtained from the linear system (I - gamma P_pi^T) d = (1-gamma) p0.
Matrix exact_stationary_distribution(const TabularMdp& mdp, const TabularPolicy& pi);

// State marginal of exact_stationary_distribution.
Vector exact_state_distribution(const TabularMdp& mdp, const TabularPolicy& pi);

struct PolicyValue {
  double normalized = 0.0;  // E_{d_pi}[signal]
  double raw = 0.0;         // normalized / (1 - gamma)
};

PolicyValue exact_policy_value(const TabularMdp& mdp, const TabularPolicy& pi, Signal signal);
PolicyValue exact_policy_value(const TabularMdp& mdp, const TabularPolicy& pi,
                               const Matrix& signal);

// Largest per-state residual of the single-step recurrence
// sum_a d(s,a) = (1-gamma) p0(s) + gamma (T_* d)(s).
double recurrence_residual(const TabularMdp& mdp, const Matrix& d);

struct MonteCarloEstimate {
  double mean = 0.0;       // normalized value estimate
  double std_error = 0.0;
  long episodes = 0;
};

// Rollout estimate of the normalized value. Each episode continues after a
// step with probability gamma and reports (1-gamma) * (undiscounted sum of
// the signal along the episode), an unbiased estimate of rho(pi).
MonteCarloEstimate monte_carlo_value(const TabularMdp& mdp, const TabularPolicy& pi,
                                     const Matrix& signal, long episodes, std::uint64_t seed);

}  // namespace dicekit

#endif  // DICEKIT_MDP_HPP_
