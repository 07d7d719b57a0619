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

#ifndef DICEKIT_SRC_DETAIL_HPP_
#define DICEKIT_SRC_DETAIL_HPP_

#include <vector>

#include "dicekit/dataset.hpp"

namespace dicekit::detail {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// E_{s' ~ T(.|s,a)}[v(s')] laid out as an S x A matrix.
inline Matrix expected_next(const Matrix& transition, int n_states, int n_actions, const Vector& v) {
  const Vector flat = transition * v;
  return Eigen::Map<const RowMajorMatrix>(flat.data(), n_states, n_actions);
}

// One weighted (s, a, s') triple with nonzero data mass.
struct Triple {
  int s;
  int a;
  int s_next;
  double weight;  // d_D(s,a) * T_hat(s'|s,a)
};

inline std::vector<Triple> enumerate_triples(const MleModel& m) {
  std::vector<Triple> out;
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      if (!m.supported(s, a)) continue;
      for (int sn = 0; sn < m.n_states; ++sn) {
        const double p = m.transition_hat(m.row(s, a), sn);
        if (p > 0.0) out.push_back({s, a, sn, m.d_D(s, a) * p});
      }
    }
  }
  return out;
}

// Indices of supported states, and the inverse map (-1 when unsupported).
struct StateIndex {
  std::vector<int> states;
  std::vector<int> position;

  explicit StateIndex(const MleModel& m) : states(m.supported_states()), position(m.n_states, -1) {
    for (std::size_t i = 0; i < states.size(); ++i) position[states[i]] = static_cast<int>(i);
  }
  int size() const { return static_cast<int>(states.size()); }

  Vector compress(const Vector& full) const {
    Vector out(size());
    for (int i = 0; i < size(); ++i) out(i) = full(states[i]);
    return out;
  }
  Vector expand(const Vector& reduced, int n_states) const {
    Vector out = Vector::Zero(n_states);
    for (int i = 0; i < size(); ++i) out(states[i]) = reduced(i);
    return out;
  }
};

}  // namespace dicekit::detail

#endif  // DICEKIT_SRC_DETAIL_HPP_
