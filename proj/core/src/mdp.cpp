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

#include "dicekit/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "dicekit/errors.hpp"
#include "dicekit/rng.hpp"

namespace dicekit {
namespace {

constexpr double kStochasticTol = 1e-12;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reinterprets a length S*A vector indexed s*A+a as an S x A matrix.
Matrix to_state_action(const Vector& v, int n_states, int n_actions) {
  return Eigen::Map<const RowMajor>(v.data(), n_states, n_actions);
}

Matrix bellman_q(const TabularMdp& mdp, const Matrix& r, const Vector& v) {
  const Vector next = mdp.transition * v;
  return r + mdp.gamma * to_state_action(next, mdp.n_states, mdp.n_actions);
}

int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (int a = 1; a < row.size(); ++a) {
    if (row(a) > row(best)) best = a;
  }
  return best;
}

Matrix state_transition(const TabularMdp& mdp, const TabularPolicy& pi) {
  Matrix p = Matrix::Zero(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = pi(s, a);
      if (w != 0.0) p.row(s) += w * mdp.transition.row(mdp.row(s, a));
    }
  }
  return p;
}

void check_policy_shape(const TabularMdp& mdp, const TabularPolicy& pi) {
  if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions) {
    throw ParameterError("policy shape " + std::to_string(pi.n_states()) + "x" +
                         std::to_string(pi.n_actions()) + " does not match MDP " +
                         std::to_string(mdp.n_states) + "x" + std::to_string(mdp.n_actions));
  }
}

std::vector<int> reachable_from(const TabularMdp& mdp, int start) {
  std::vector<char> seen(mdp.n_states, 0);
  std::queue<int> frontier;
  frontier.push(start);
  seen[start] = 1;
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    for (int a = 0; a < mdp.n_actions; ++a) {
      for (int next = 0; next < mdp.n_states; ++next) {
        if (mdp.T(s, a, next) > 0.0 && !seen[next]) {
          seen[next] = 1;
          frontier.push(next);
        }
      }
    }
  }
  std::vector<int> out;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (seen[s]) out.push_back(s);
  }
  return out;
}

}  // namespace

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw ParameterError("MDP needs positive state and action counts");
  if (transition.rows() != static_cast<Eigen::Index>(n_states) * n_actions ||
      transition.cols() != n_states) {
    throw ParameterError("transition tensor has the wrong shape");
  }
  if (reward.rows() != n_states || reward.cols() != n_actions) throw ParameterError("reward has the wrong shape");
  if (cost.rows() != n_states || cost.cols() != n_actions) throw ParameterError("cost has the wrong shape");
  if (p0.size() != n_states) throw ParameterError("p0 has the wrong length");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in [0, 1)");
  if ((transition.array() < 0.0).any()) throw ParameterError("negative transition probability");
  for (Eigen::Index r = 0; r < transition.rows(); ++r) {
    if (std::abs(transition.row(r).sum() - 1.0) > kStochasticTol) {
      throw ParameterError("transition row " + std::to_string(r) + " does not sum to 1");
    }
  }
  if ((p0.array() < 0.0).any() || std::abs(p0.sum() - 1.0) > kStochasticTol) {
    throw ParameterError("p0 is not a distribution");
  }
  if ((cost.array() < 0.0).any()) throw ParameterError("negative cost entry");
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  return {Matrix::Constant(n_states, n_actions, 1.0 / n_actions)};
}

TabularPolicy TabularPolicy::deterministic(const Eigen::VectorXi& actions, int n_actions) {
  TabularPolicy pi{Matrix::Zero(actions.size(), n_actions)};
  for (Eigen::Index s = 0; s < actions.size(); ++s) pi.probs(s, actions(s)) = 1.0;
  return pi;
}

void TabularPolicy::validate() const {
  if ((probs.array() < 0.0).any()) throw ParameterError("negative policy probability");
  for (Eigen::Index s = 0; s < probs.rows(); ++s) {
    if (std::abs(probs.row(s).sum() - 1.0) > kStochasticTol) {
      throw ParameterError("policy row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

TabularMdp generate_random_mdp(std::uint64_t seed, const RandomMdpParams& params) {
  const int S = params.n_states;
  const int A = params.n_actions;
  if (S <= 0 || A <= 0) throw ParameterError("generate_random_mdp: sizes must be positive");
  if (params.n_successors < 1 || params.n_successors > S) {
    throw ParameterError("generate_random_mdp: n_successors must lie in [1, n_states]");
  }
  if (!(params.gamma >= 0.0 && params.gamma < 1.0)) {
    throw ParameterError("generate_random_mdp: gamma must lie in [0, 1)");
  }

  Rng rng(seed);
  TabularMdp mdp;
  mdp.n_states = S;
  mdp.n_actions = A;
  mdp.gamma = params.gamma;
  mdp.transition = Matrix::Zero(static_cast<Eigen::Index>(S) * A, S);
  mdp.cost = Matrix::Zero(S, A);
  mdp.p0 = Vector::Zero(S);
  mdp.p0(0) = 1.0;

  std::vector<int> order(S);
  std::vector<double> draws(params.n_successors);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      std::iota(order.begin(), order.end(), 0);
      for (int i = 0; i < params.n_successors; ++i) {
        const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(S - i)));
        std::swap(order[i], order[j]);
      }
      double total = 0.0;
      for (auto& x : draws) {
        x = rng.exponential();
        total += x;
      }
      for (int i = 0; i < params.n_successors; ++i) {
        mdp.transition(mdp.row(s, a), order[i]) += draws[i] / total;
      }
    }
  }

  std::vector<int> candidates;
  for (int s : reachable_from(mdp, 0)) {
    if (s != 0) candidates.push_back(s);
  }
  if (candidates.empty()) candidates.push_back(0);

  int goal = candidates.front();
  double best = std::numeric_limits<double>::infinity();
  for (int g : candidates) {
    mdp.reward = Matrix::Zero(S, A);
    mdp.reward.row(g).setOnes();
    const double v0 = policy_iteration(mdp).v(0);
    if (v0 < best) {
      best = v0;
      goal = g;
    }
  }
  mdp.reward = Matrix::Zero(S, A);
  mdp.reward.row(goal).setOnes();
  return mdp;
}

Eigen::VectorXi reward_states(const TabularMdp& mdp) {
  std::vector<int> out;
  for (int s = 0; s < mdp.n_states; ++s) {
    if ((mdp.reward.row(s).array() > 0.0).any()) out.push_back(s);
  }
  return Eigen::Map<Eigen::VectorXi>(out.data(), static_cast<Eigen::Index>(out.size()));
}

PlanningResult value_iteration(const TabularMdp& mdp, double tol) {
  if (!(tol > 0.0)) throw ParameterError("value_iteration: tol must be positive");
  PlanningResult out;
  Vector v = Vector::Zero(mdp.n_states);
  while (true) {
    const Matrix q = bellman_q(mdp, mdp.reward, v);
    const Vector next = q.rowwise().maxCoeff();
    const double diff = (next - v).lpNorm<Eigen::Infinity>();
    v = next;
    ++out.iterations;
    if (diff <= tol) break;
  }
  out.q = bellman_q(mdp, mdp.reward, v);
  out.v = v;
  Eigen::VectorXi greedy(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) greedy(s) = argmax_lowest(out.q.row(s));
  out.policy = TabularPolicy::deterministic(greedy, mdp.n_actions);
  return out;
}

PlanningResult policy_iteration(const TabularMdp& mdp) {
  const int S = mdp.n_states;
  Eigen::VectorXi actions = Eigen::VectorXi::Zero(S);
  PlanningResult out;
  const Matrix identity = Matrix::Identity(S, S);
  for (int iter = 0; iter < 10 * S * mdp.n_actions + 10; ++iter) {
    const TabularPolicy pi = TabularPolicy::deterministic(actions, mdp.n_actions);
    Vector r_pi(S);
    for (int s = 0; s < S; ++s) r_pi(s) = mdp.reward(s, actions(s));
    const Vector v = (identity - mdp.gamma * state_transition(mdp, pi)).partialPivLu().solve(r_pi);
    const Matrix q = bellman_q(mdp, mdp.reward, v);
    bool changed = false;
    for (int s = 0; s < S; ++s) {
      const int best = argmax_lowest(q.row(s));
      const double slack = 1e-12 * (1.0 + std::abs(q(s, best)));
      if (q(s, best) > q(s, actions(s)) + slack) {
        actions(s) = best;
        changed = true;
      }
    }
    ++out.iterations;
    out.v = v;
    out.q = q;
    if (!changed) break;
  }
  out.policy = TabularPolicy::deterministic(actions, mdp.n_actions);
  return out;
}

TabularPolicy mixture_policy(const TabularPolicy& p1, const TabularPolicy& p2, double weight) {
  if (p1.probs.rows() != p2.probs.rows() || p1.probs.cols() != p2.probs.cols()) {
    throw ParameterError("mixture_policy: shape mismatch");
  }
  if (!(weight >= 0.0 && weight <= 1.0)) throw ParameterError("mixture_policy: weight must lie in [0, 1]");
  if (weight == 1.0) return p1;
  if (weight == 0.0) return p2;
  return {weight * p1.probs + (1.0 - weight) * p2.probs};
}

TabularPolicy benchmark_behavior_policy(const TabularMdp& mdp) {
  const PlanningResult opt = policy_iteration(mdp);
  return mixture_policy(opt.policy, TabularPolicy::uniform(mdp.n_states, mdp.n_actions), 0.5);
}

Vector exact_state_distribution(const TabularMdp& mdp, const TabularPolicy& pi) {
  check_policy_shape(mdp, pi);
  const int S = mdp.n_states;
  const Matrix system = Matrix::Identity(S, S) - mdp.gamma * state_transition(mdp, pi).transpose();
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw NumericalError("exact_stationary_distribution: singular flow system");
  return lu.solve((1.0 - mdp.gamma) * mdp.p0);
}

Matrix exact_stationary_distribution(const TabularMdp& mdp, const TabularPolicy& pi) {
  const Vector ds = exact_state_distribution(mdp, pi);
  Matrix d = pi.probs.array().colwise() * ds.array();
  // Round-off can leave entries like -1e-18 on unreachable states.
  return d.cwiseMax(0.0);
}

PolicyValue exact_policy_value(const TabularMdp& mdp, const TabularPolicy& pi, const Matrix& signal) {
  if (signal.rows() != mdp.n_states || signal.cols() != mdp.n_actions) {
    throw ParameterError("exact_policy_value: signal shape mismatch");
  }
  PolicyValue out;
  out.normalized = (exact_stationary_distribution(mdp, pi).array() * signal.array()).sum();
  out.raw = out.normalized / (1.0 - mdp.gamma);
  return out;
}

PolicyValue exact_policy_value(const TabularMdp& mdp, const TabularPolicy& pi, Signal signal) {
  return exact_policy_value(mdp, pi, signal == Signal::kReward ? mdp.reward : mdp.cost);
}

double recurrence_residual(const TabularMdp& mdp, const Matrix& d) {
  Vector flat(static_cast<Eigen::Index>(mdp.n_states) * mdp.n_actions);
  Eigen::Map<RowMajor>(flat.data(), mdp.n_states, mdp.n_actions) = d;
  const Vector inflow = mdp.transition.transpose() * flat;
  const Vector lhs = d.rowwise().sum();
  return (lhs - (1.0 - mdp.gamma) * mdp.p0 - mdp.gamma * inflow).lpNorm<Eigen::Infinity>();
}

MonteCarloEstimate monte_carlo_value(const TabularMdp& mdp, const TabularPolicy& pi,
                                     const Matrix& signal, long episodes, std::uint64_t seed) {
  check_policy_shape(mdp, pi);
  if (episodes <= 0) throw ParameterError("monte_carlo_value: episodes must be positive");
  Rng rng(seed);
  const RowMajor policy = pi.probs;
  const RowMajor sig = signal;
  const RowMajor trans = mdp.transition;
  double mean = 0.0;
  double m2 = 0.0;
  for (long e = 0; e < episodes; ++e) {
    int s = static_cast<int>(rng.categorical({mdp.p0.data(), static_cast<std::size_t>(mdp.n_states)}));
    double total = 0.0;
    while (true) {
      const int a = static_cast<int>(rng.categorical(
          {policy.data() + static_cast<Eigen::Index>(s) * mdp.n_actions, static_cast<std::size_t>(mdp.n_actions)}));
      total += sig(s, a);
      if (rng.uniform() >= mdp.gamma) break;
      s = static_cast<int>(rng.categorical(
          {trans.data() + mdp.row(s, a) * mdp.n_states, static_cast<std::size_t>(mdp.n_states)}));
    }
    const double x = (1.0 - mdp.gamma) * total;
    const double delta = x - mean;
    mean += delta / static_cast<double>(e + 1);
    m2 += delta * (x - mean);
  }
  MonteCarloEstimate out;
  out.mean = mean;
  out.episodes = episodes;
  const double var = episodes > 1 ? m2 / static_cast<double>(episodes - 1) : 0.0;
  out.std_error = std::sqrt(var / static_cast<double>(episodes));
  return out;
}

}  // namespace dicekit
