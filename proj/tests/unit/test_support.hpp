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


#pragma once

#include <cstdint>
#include <functional>

#include "dicekit/dataset.hpp"
#include "dicekit/mdp.hpp"
#include "dicekit/rng.hpp"

namespace dicekit::testing {

// A seeded benchmark-style instance: true MDP, behavior policy, data, MLE model.
struct Instance {
  TabularMdp mdp;
  TabularPolicy behavior;
  Dataset data;
  MleModel model;
};

inline Instance make_instance(std::uint64_t seed, int n_states = 5, int n_actions = 3,
                              int n_trajectories = 30, int horizon = 100) {
  Instance in;
  RandomMdpParams p;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.n_successors = n_states < 4 ? n_states : 4;
  in.mdp = generate_random_mdp(seed, p);
  in.behavior = benchmark_behavior_policy(in.mdp);
  in.data = collect_dataset(in.mdp, in.behavior, n_trajectories, horizon, seed + 1000003);
  in.model = build_mle_model(in.data, n_states, n_actions);
  return in;
}

// Model whose d_D is the discounted occupancy of the behavior policy, so every
// pair is supported and w == 1 is flow-feasible.
inline MleModel stationary_model(const TabularMdp& mdp, const TabularPolicy& pi) {
  return model_from_distribution(mdp, exact_stationary_distribution(mdp, pi));
}

inline TabularPolicy random_policy(Rng& rng, int n_states, int n_actions) {
  Matrix p(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) p(s, a) = rng.exponential();
    p.row(s) /= p.row(s).sum();
  }
  return TabularPolicy{p};
}

// Two-point central difference of a scalar function along each coordinate.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                                 double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

}  // namespace dicekit::testing
