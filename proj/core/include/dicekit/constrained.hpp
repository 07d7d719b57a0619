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

#ifndef DICEKIT_CONSTRAINED_HPP_
#define DICEKIT_CONSTRAINED_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "dicekit/dataset.hpp"
#include "dicekit/divergence.hpp"
#include "dicekit/extraction.hpp"
#include "dicekit/solvers.hpp"

namespace dicekit {

struct CostSpec {
  Matrix cost;          // S x A, nonnegative
  double c_lim = 0.0;   // undiscounted budget
  double c_tilde = 0.0; // (1 - gamma) * c_lim

  static CostSpec from_limit(Matrix cost, double c_lim, double gamma);
  static CostSpec from_normalized(Matrix cost, double c_tilde, double gamma);
  void validate(const MleModel& model) const;
};

struct LagrangeOptions {
  double learning_rate = 1.0;
  double lambda_max = 1e3;
  int outer_iters = 200;
  double feasibility_slack = 0.05;  // relative to c_tilde
};

struct ConstrainedResult {
  CorrectionSet correction;
  std::optional<ExtractionResult> extraction;
  TabularPolicy policy;
  double lambda_cost = 0.0;
  double estimated_cost = 0.0;  // normalized, the signal driving lambda
  double exact_cost = 0.0;      // normalized, on the MLE model
  double exact_return = 0.0;    // normalized, on the MLE model
  std::vector<double> lambda_history;
  bool feasible = false;
  bool converged = true;        // every inner solve converged
};

// Puts cost_value on every action of n_cost_states states drawn without
// replacement among the states that pay no reward.
TabularMdp attach_random_costs(const TabularMdp& mdp, std::uint64_t seed, int n_cost_states,
                               double cost_value = 1.0);

// One projected step lambda <- clip(lambda + lr (estimate - c_tilde), 0, lambda_max).
double lagrange_step(double lambda, double estimate, double c_tilde, const LagrangeOptions& opts);

ConstrainedResult coptidice_solve(const MleModel& model, const FGenerator& g, const CostSpec& spec,
                                  const OptimizerConfig& cfg, const LagrangeOptions& opts = {});

// Negative control: SemiDICE on r - lambda c with lambda driven by E_{d_D}[w(a|s) c].
ConstrainedResult naive_constrained_semidice(const MleModel& model, const FGenerator& g,
                                             const CostSpec& spec, const OptimizerConfig& cfg,
                                             const LagrangeOptions& opts = {});

// SemiDICE on r - lambda c, state-correction extraction, and a lambda step on
// E_{d_D}[w(s) w(a|s) c], repeated for opts.outer_iters rounds.
ConstrainedResult corsdice_solve(const MleModel& model, const FGenerator& g_policy,
                                 const FGenerator& g_state, const CostSpec& spec,
                                 const OptimizerConfig& cfg, const LagrangeOptions& opts = {});

// SemiDICE at a fixed multiplier; the building block of the CORSDICE loop.
CorrectionSet corsdice_fixed_lambda(const MleModel& model, const FGenerator& g_policy, const Matrix& cost,
                                    double lambda, const OptimizerConfig& cfg,
                                    const Vector* nu_init = nullptr);

// Smallest normalized cost any policy over observed actions reaches on the
// MLE model.
double minimum_cost(const MleModel& model, const Matrix& cost);

struct ConstrainedInstance {
  TabularMdp mdp;  // true MDP with costs
  TabularPolicy behavior;
  MleModel model;
  CostSpec spec;
  double cost_min = 0.0;
  double cost_unconstrained = 0.0;
  bool binding = false;
};

struct InstanceParams {
  RandomMdpParams mdp;
  int n_trajectories = 30;
  int horizon = 100;
  int n_cost_states = 5;
  double cost_value = 1.0;
  double alpha = 0.01;       // SemiDICE regularization used to probe the unconstrained cost
  double budget_fraction = 0.5;
};

// Budget placed at cost_min + budget_fraction (cost_unconstrained - cost_min).
ConstrainedInstance make_constrained_instance(std::uint64_t mdp_seed, std::uint64_t data_seed,
                                              const InstanceParams& params);

}  // namespace dicekit

#endif  // DICEKIT_CONSTRAINED_HPP_
