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

#ifndef DICEKIT_DATASET_HPP_
#define DICEKIT_DATASET_HPP_

#include <cstdint>
#include <vector>

#include "dicekit/mdp.hpp"

namespace dicekit {

struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  double c = 0.0;
  int s_next = 0;
  int t = 0;
  int episode = 0;
};

// Offline dataset. Records are grouped by episode, in time order.
struct Dataset {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  int n_trajectories = 0;
  int horizon = 0;
  std::vector<Transition> transitions;

  void validate() const;
};

// Fixed-horizon, non-terminating episodes started from p0.
Dataset collect_dataset(const TabularMdp& mdp, const TabularPolicy& pi, int n_trajectories,
                        int horizon, std::uint64_t seed);

// Maximum-likelihood model of a dataset.
//
// d_D is the undiscounted empirical (s,a) frequency. Pairs that never occur
// are masked out of every solver expectation. Their transition_hat row is a
// placeholder: uniform for an unseen action of a visited state, and a
// self-loop for every action of a state that was never a source state. The
// latter makes as_mdp() treat such states as zero-value absorbing states,
// matching the convention that value and dual variables vanish there.
struct MleModel {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  Matrix transition_hat;  // (S*A) x S, same layout as TabularMdp::transition
  Matrix reward_hat;      // empirical mean reward, 0 off support
  Matrix cost_hat;        // empirical mean cost, 0 off support
  Matrix d_D;             // S x A, sums to 1
  Vector d_D_state;
  TabularPolicy pi_D;     // uniform on unvisited states
  Vector p0_hat;
  BoolMatrix support_mask;

  Eigen::Index row(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions + a; }
  bool supported(int s, int a) const { return support_mask(s, a); }
  bool state_supported(int s) const { return d_D_state(s) > 0.0; }
  std::vector<int> supported_states() const;
  int n_supported_states() const;

  // The model as an MDP (placeholder rows included, reward/cost zero off
  // support), for exact oracle evaluation.
  TabularMdp as_mdp() const;

  void validate() const;
};

MleModel build_mle_model(const Dataset& dataset);
MleModel build_mle_model(const Dataset& dataset, int n_states, int n_actions);

// Model with an exactly specified sampling distribution (no dataset): true
// transitions, rewards, costs and p0 of `mdp`, and d_D given directly.
MleModel model_from_distribution(const TabularMdp& mdp, const Matrix& d_D);

}  // namespace dicekit

#endif  // DICEKIT_DATASET_HPP_
