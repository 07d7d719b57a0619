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

#include "dicekit/constrained.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dicekit/errors.hpp"
#include "dicekit/metrics.hpp"
#include "dicekit/rng.hpp"

namespace dicekit {
namespace {

void finalize(ConstrainedResult& out, const MleModel& model, const CostSpec& spec,
              const LagrangeOptions& opts) {
  const TabularMdp mle = model.as_mdp();
  out.exact_cost = exact_policy_value(mle, out.policy, spec.cost).normalized;
  out.exact_return = exact_policy_value(mle, out.policy, model.reward_hat).normalized;
  out.feasible = out.exact_cost <= spec.c_tilde * (1.0 + opts.feasibility_slack);
}

void check_options(const LagrangeOptions& opts) {
  if (!(opts.learning_rate > 0.0)) throw ParameterError("lambda learning rate must be positive");
  if (!(opts.lambda_max >= 0.0)) throw ParameterError("lambda_max must be nonnegative");
  if (opts.outer_iters < 1) throw ParameterError("outer_iters must be at least 1");
  if (!(opts.feasibility_slack >= 0.0)) throw ParameterError("feasibility slack must be nonnegative");
}

Matrix penalized(const MleModel& model, const Matrix& cost, double lambda) {
  return model.reward_hat - lambda * cost;
}

}  // namespace

CostSpec CostSpec::from_limit(Matrix cost, double c_lim, double gamma) {
  CostSpec spec;
  spec.cost = std::move(cost);
  spec.c_lim = c_lim;
  spec.c_tilde = (1.0 - gamma) * c_lim;
  return spec;
}

CostSpec CostSpec::from_normalized(Matrix cost, double c_tilde, double gamma) {
  CostSpec spec;
  spec.cost = std::move(cost);
  spec.c_lim = c_tilde / (1.0 - gamma);
  spec.c_tilde = (1.0 - gamma) * spec.c_lim;
  return spec;
}

void CostSpec::validate(const MleModel& model) const {
  if (cost.rows() != model.n_states || cost.cols() != model.n_actions) {
    throw ParameterError("cost matrix shape mismatch");
  }
  if ((cost.array() < 0.0).any()) throw ParameterError("costs must be nonnegative");
  if (!(c_lim > 0.0)) throw ParameterError("cost limit must be positive");
}

TabularMdp attach_random_costs(const TabularMdp& mdp, std::uint64_t seed, int n_cost_states, double cost_value) {
  if (n_cost_states < 0 || n_cost_states >= mdp.n_states) {
    throw ParameterError("attach_random_costs: need 0 <= n_cost_states < n_states");
  }
  if (!(cost_value >= 0.0)) throw ParameterError("attach_random_costs: cost must be nonnegative");
  std::vector<int> candidates;
  for (int s = 0; s < mdp.n_states; ++s) {
    if ((mdp.reward.row(s).array() <= 0.0).all()) candidates.push_back(s);
  }
  if (static_cast<int>(candidates.size()) < n_cost_states) {
    throw ParameterError("attach_random_costs: not enough reward-free states");
  }
  // Partial Fisher-Yates.
  Rng rng(seed);
  for (int k = 0; k < n_cost_states; ++k) {
    const auto j = k + static_cast<int>(rng.below(candidates.size() - static_cast<std::size_t>(k)));
    std::swap(candidates[k], candidates[j]);
  }
  TabularMdp out = mdp;
  out.cost = Matrix::Zero(mdp.n_states, mdp.n_actions);
  for (int k = 0; k < n_cost_states; ++k) out.cost.row(candidates[k]).setConstant(cost_value);
  return out;
}

double lagrange_step(double lambda, double estimate, double c_tilde, const LagrangeOptions& opts) {
  return std::clamp(lambda + opts.learning_rate * (estimate - c_tilde), 0.0, opts.lambda_max);
}

ConstrainedResult coptidice_solve(const MleModel& model, const FGenerator& g, const CostSpec& spec,
                                  const OptimizerConfig& cfg, const LagrangeOptions& opts) {
  spec.validate(model);
  check_options(opts);
  ConstrainedResult out;
  double lambda = 0.0;
  Vector nu = Vector::Zero(model.n_states);
  for (int k = 0; k < opts.outer_iters; ++k) {
    out.correction = optidice_solve_penalized(model, g, cfg, penalized(model, spec.cost, lambda), &nu);
    nu = out.correction.nu;
    out.converged = out.converged && out.correction.status.converged;
    out.estimated_cost = ope_estimate(*out.correction.w_sa, model, spec.cost);
    out.lambda_cost = lambda;
    out.lambda_history.push_back(lambda);
    lambda = lagrange_step(lambda, out.estimated_cost, spec.c_tilde, opts);
  }
  out.correction.lambda_cost = out.lambda_cost;
  out.policy = extract_tabular_policy(out.correction, model).policy;
  finalize(out, model, spec, opts);
  return out;
}

ConstrainedResult naive_constrained_semidice(const MleModel& model, const FGenerator& g, const CostSpec& spec,
                                             const OptimizerConfig& cfg, const LagrangeOptions& opts) {
  spec.validate(model);
  check_options(opts);
  ConstrainedResult out;
  double lambda = 0.0;
  Vector nu = Vector::Zero(model.n_states);
  for (int k = 0; k < opts.outer_iters; ++k) {
    const Matrix reward = penalized(model, spec.cost, lambda);
    out.correction = semidice_solve(model, g, cfg, &reward, &nu);
    nu = out.correction.nu;
    out.converged = out.converged && out.correction.status.converged;
    // Treats the policy correction as if it were an occupancy ratio.
    out.estimated_cost = ope_estimate(*out.correction.w_a_given_s, model, spec.cost);
    out.lambda_cost = lambda;
    out.lambda_history.push_back(lambda);
    lambda = lagrange_step(lambda, out.estimated_cost, spec.c_tilde, opts);
  }
  out.correction.lambda_cost = out.lambda_cost;
  out.policy = extract_tabular_policy(out.correction, model).policy;
  finalize(out, model, spec, opts);
  return out;
}

CorrectionSet corsdice_fixed_lambda(const MleModel& model, const FGenerator& g_policy, const Matrix& cost,
                                    double lambda, const OptimizerConfig& cfg, const Vector* nu_init) {
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");
  const Matrix reward = penalized(model, cost, lambda);
  CorrectionSet corr = semidice_solve(model, g_policy, cfg, &reward, nu_init);
  corr.lambda_cost = lambda;
  return corr;
}

ConstrainedResult corsdice_solve(const MleModel& model, const FGenerator& g_policy, const FGenerator& g_state,
                                 const CostSpec& spec, const OptimizerConfig& cfg, const LagrangeOptions& opts) {
  spec.validate(model);
  check_options(opts);
  ConstrainedResult out;
  double lambda = 0.0;
  Vector nu = Vector::Zero(model.n_states);
  Vector mu = Vector::Zero(model.n_states);
  for (int k = 0; k < opts.outer_iters; ++k) {
    out.correction = corsdice_fixed_lambda(model, g_policy, spec.cost, lambda, cfg, &nu);
    nu = out.correction.nu;
    const Matrix& w_policy = *out.correction.w_a_given_s;
    out.extraction = extract_direct(model, w_policy, g_state, cfg, &mu);
    mu = out.extraction->mu;
    out.converged = out.converged && out.correction.status.converged && out.extraction->converged;
    out.estimated_cost = ope_estimate(marginal_correction(*out.extraction, w_policy), model, spec.cost);
    out.lambda_cost = lambda;
    out.lambda_history.push_back(lambda);
    lambda = lagrange_step(lambda, out.estimated_cost, spec.c_tilde, opts);
  }
  out.correction.w_s = out.extraction->w_s;
  out.correction.mu = out.extraction->mu;
  out.policy = extract_tabular_policy(out.correction, model).policy;
  finalize(out, model, spec, opts);
  return out;
}

double minimum_cost(const MleModel& model, const Matrix& cost) {
  TabularMdp mdp = model.as_mdp();
  // Maximize -cost; unobserved actions at visited states are priced out.
  const double exclude = 10.0 * (1.0 + cost.cwiseAbs().maxCoeff()) / (1.0 - model.gamma);
  mdp.reward = -cost;
  for (int s = 0; s < model.n_states; ++s) {
    if (!model.state_supported(s)) continue;
    for (int a = 0; a < model.n_actions; ++a) {
      if (!model.supported(s, a)) mdp.reward(s, a) = -exclude;
    }
  }
  const PlanningResult plan = policy_iteration(mdp);
  return exact_policy_value(model.as_mdp(), plan.policy, cost).normalized;
}

ConstrainedInstance make_constrained_instance(std::uint64_t mdp_seed, std::uint64_t data_seed,
                                              const InstanceParams& params) {
  if (!(params.budget_fraction > 0.0 && params.budget_fraction < 1.0)) {
    throw ParameterError("budget_fraction must lie in (0,1)");
  }
  ConstrainedInstance inst;
  inst.mdp = attach_random_costs(generate_random_mdp(mdp_seed, params.mdp), mdp_seed ^ 0x9e3779b97f4a7c15ULL,
                                 params.n_cost_states, params.cost_value);
  inst.behavior = benchmark_behavior_policy(inst.mdp);
  const Dataset data = collect_dataset(inst.mdp, inst.behavior, params.n_trajectories, params.horizon, data_seed);
  inst.model = build_mle_model(data, inst.mdp.n_states, inst.mdp.n_actions);

  OptimizerConfig cfg;
  cfg.alpha = params.alpha;
  const CorrectionSet unconstrained =
      semidice_solve(inst.model, FGenerator(FGenerator::Kind::kChi2), cfg);
  const TabularPolicy pi = extract_tabular_policy(unconstrained, inst.model).policy;
  inst.cost_unconstrained = exact_policy_value(inst.model.as_mdp(), pi, inst.model.cost_hat).normalized;
  inst.cost_min = minimum_cost(inst.model, inst.model.cost_hat);
  const double c_tilde = inst.cost_min + params.budget_fraction * (inst.cost_unconstrained - inst.cost_min);
  inst.binding = inst.cost_unconstrained - inst.cost_min > 1e-6 && c_tilde > 0.0;
  // A degenerate budget still needs a positive limit; such instances are flagged non-binding.
  inst.spec = CostSpec::from_normalized(inst.model.cost_hat, std::max(c_tilde, 1e-12), inst.model.gamma);
  return inst;
}

}  // namespace dicekit
