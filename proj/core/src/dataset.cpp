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

#include "dicekit/dataset.hpp"

#include <cmath>
#include <string>

#include "dicekit/errors.hpp"
#include "dicekit/rng.hpp"

namespace dicekit {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void fill_placeholders(MleModel& m) {
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      if (m.support_mask(s, a)) continue;
      auto row = m.transition_hat.row(m.row(s, a));
      if (m.d_D_state(s) > 0.0) {
        row.setConstant(1.0 / m.n_states);
      } else {
        row.setZero();
        row(s) = 1.0;
      }
    }
  }
}

void fill_behavior_policy(MleModel& m) {
  m.d_D_state = m.d_D.rowwise().sum();
  m.pi_D.probs = Matrix::Constant(m.n_states, m.n_actions, 1.0 / m.n_actions);
  for (int s = 0; s < m.n_states; ++s) {
    if (m.d_D_state(s) > 0.0) m.pi_D.probs.row(s) = m.d_D.row(s) / m.d_D_state(s);
  }
}

}  // namespace

void Dataset::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw ParameterError("dataset needs positive state/action counts");
  for (const auto& tr : transitions) {
    if (tr.s < 0 || tr.s >= n_states || tr.s_next < 0 || tr.s_next >= n_states || tr.a < 0 ||
        tr.a >= n_actions) {
      throw ParameterError("dataset record out of bounds (episode " + std::to_string(tr.episode) +
                           ", t=" + std::to_string(tr.t) + ")");
    }
  }
}

Dataset collect_dataset(const TabularMdp& mdp, const TabularPolicy& pi, int n_trajectories,
                        int horizon, std::uint64_t seed) {
  if (horizon < 1) throw ParameterError("collect_dataset: horizon must be at least 1");
  if (n_trajectories < 0) throw ParameterError("collect_dataset: negative trajectory count");
  if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions) {
    throw ParameterError("collect_dataset: policy shape mismatch");
  }
  Rng rng(seed);
  const RowMajor trans = mdp.transition;
  const RowMajor policy = pi.probs;
  const auto S = static_cast<std::size_t>(mdp.n_states);
  const auto A = static_cast<std::size_t>(mdp.n_actions);

  Dataset out;
  out.n_states = mdp.n_states;
  out.n_actions = mdp.n_actions;
  out.gamma = mdp.gamma;
  out.n_trajectories = n_trajectories;
  out.horizon = horizon;
  out.transitions.reserve(static_cast<std::size_t>(n_trajectories) * horizon);
  for (int ep = 0; ep < n_trajectories; ++ep) {
    int s = static_cast<int>(rng.categorical({mdp.p0.data(), S}));
    for (int t = 0; t < horizon; ++t) {
      const int a = static_cast<int>(rng.categorical({policy.data() + s * A, A}));
      const int next = static_cast<int>(rng.categorical({trans.data() + mdp.row(s, a) * S, S}));
      out.transitions.push_back({s, a, mdp.reward(s, a), mdp.cost(s, a), next, t, ep});
      s = next;
    }
  }
  return out;
}

std::vector<int> MleModel::supported_states() const {
  std::vector<int> out;
  for (int s = 0; s < n_states; ++s) {
    if (state_supported(s)) out.push_back(s);
  }
  return out;
}

int MleModel::n_supported_states() const { return static_cast<int>(supported_states().size()); }

TabularMdp MleModel::as_mdp() const {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition = transition_hat;
  mdp.reward = reward_hat;
  mdp.cost = cost_hat;
  mdp.p0 = p0_hat;
  return mdp;
}

void MleModel::validate() const {
  if (std::abs(d_D.sum() - 1.0) > 1e-12) throw ParameterError("d_D does not sum to 1");
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      if ((d_D(s, a) > 0.0) != support_mask(s, a)) throw ParameterError("support mask disagrees with d_D");
      if (std::abs(transition_hat.row(row(s, a)).sum() - 1.0) > 1e-12) {
        throw ParameterError("transition_hat row does not sum to 1");
      }
    }
  }
}

MleModel build_mle_model(const Dataset& dataset) {
  if (dataset.transitions.empty()) throw ParameterError("build_mle_model: empty dataset");
  dataset.validate();
  const int S = dataset.n_states;
  const int A = dataset.n_actions;

  MleModel m;
  m.n_states = S;
  m.n_actions = A;
  m.gamma = dataset.gamma;
  m.transition_hat = Matrix::Zero(static_cast<Eigen::Index>(S) * A, S);
  m.reward_hat = Matrix::Zero(S, A);
  m.cost_hat = Matrix::Zero(S, A);
  m.p0_hat = Vector::Zero(S);
  Matrix counts = Matrix::Zero(S, A);

  int current_episode = -1;
  long n_episodes = 0;
  for (const auto& tr : dataset.transitions) {
    if (tr.episode != current_episode) {
      current_episode = tr.episode;
      m.p0_hat(tr.s) += 1.0;
      ++n_episodes;
    }
    counts(tr.s, tr.a) += 1.0;
    m.transition_hat(m.row(tr.s, tr.a), tr.s_next) += 1.0;
    m.reward_hat(tr.s, tr.a) += tr.r;
    m.cost_hat(tr.s, tr.a) += tr.c;
  }
  m.p0_hat /= static_cast<double>(n_episodes);
  m.support_mask = (counts.array() > 0.0).matrix();
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double n = counts(s, a);
      if (n <= 0.0) continue;
      m.transition_hat.row(m.row(s, a)) /= n;
      m.reward_hat(s, a) /= n;
      m.cost_hat(s, a) /= n;
    }
  }
  m.d_D = counts / static_cast<double>(dataset.transitions.size());
  fill_behavior_policy(m);
  fill_placeholders(m);
  return m;
}

MleModel build_mle_model(const Dataset& dataset, int n_states, int n_actions) {
  if (n_states != dataset.n_states || n_actions != dataset.n_actions) {
    throw ParameterError("build_mle_model: dataset dimensions do not match");
  }
  return build_mle_model(dataset);
}

MleModel model_from_distribution(const TabularMdp& mdp, const Matrix& d_D) {
  if (d_D.rows() != mdp.n_states || d_D.cols() != mdp.n_actions) {
    throw ParameterError("model_from_distribution: d_D shape mismatch");
  }
  if ((d_D.array() < 0.0).any() || !(d_D.sum() > 0.0)) {
    throw ParameterError("model_from_distribution: d_D must be a nonnegative, nonzero matrix");
  }
  MleModel m;
  m.n_states = mdp.n_states;
  m.n_actions = mdp.n_actions;
  m.gamma = mdp.gamma;
  m.transition_hat = mdp.transition;
  m.d_D = d_D / d_D.sum();
  m.support_mask = (m.d_D.array() > 0.0).matrix();
  m.reward_hat = m.support_mask.select(mdp.reward, 0.0);
  m.cost_hat = m.support_mask.select(mdp.cost, 0.0);
  m.p0_hat = mdp.p0;
  fill_behavior_policy(m);
  fill_placeholders(m);
  return m;
}

}  // namespace dicekit
