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

#ifndef DICEKIT_METRICS_HPP_
#define DICEKIT_METRICS_HPP_

#include <span>
#include <string>
#include <utility>

#include "dicekit/dataset.hpp"
#include "dicekit/solvers.hpp"

namespace dicekit {

struct ViolationReport {
  double viol_bellman_flow = 0.0;
  double viol_policy_correction = 0.0;
  int n_sparse_states = 0;
  int n_unsupported_states = 0;
  std::string generator_name;
  double alpha_or_beta = 0.0;
};

// L1 residual of the flow constraint of d_w = w * d_D over states with data.
double bellman_flow_violation(const Matrix& w_sa, const MleModel& model);

// Per-state residual vector of the same constraint (0 on states without data).
Vector bellman_flow_residual(const Matrix& w_sa, const MleModel& model);

// sum_s |sum_a w(s,a) pi_D(a|s) - 1|. With a mask only the flagged states count.
double policy_correction_violation(const Matrix& w, const TabularPolicy& pi_D,
                                   const Eigen::Array<bool, Eigen::Dynamic, 1>* states = nullptr);
double policy_correction_violation(const Matrix& w, const MleModel& model);

// States with data whose weights vanish on every observed action.
int count_sparse_states(const Matrix& w, const MleModel& model);

ViolationReport violation_report(const Matrix& w, const MleModel& model, std::string generator_name,
                                 double alpha_or_beta);

// E_{d_D}[w * signal].
double ope_estimate(const Matrix& w_sa, const MleModel& model, const Matrix& signal);

// Root mean square of (estimate - exact); throws ParameterError when empty.
double ope_rmse(std::span<const std::pair<double, double>> runs);

}  // namespace dicekit

#endif  // DICEKIT_METRICS_HPP_
