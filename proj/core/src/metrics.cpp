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

#include "dicekit/metrics.hpp"

#include <cmath>

#include "dicekit/errors.hpp"

namespace dicekit {
namespace {

void check_shape(const Matrix& w, const MleModel& m, const char* what) {
  if (w.rows() != m.n_states || w.cols() != m.n_actions) {
    throw ParameterError(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

Vector bellman_flow_residual(const Matrix& w_sa, const MleModel& model) {
  check_shape(w_sa, model, "bellman_flow_residual");
  const int S = model.n_states;
  const int A = model.n_actions;
  Vector inflow = (1.0 - model.gamma) * model.p0_hat;
  Vector outflow = Vector::Zero(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      if (!model.supported(s, a)) continue;
      const double mass = w_sa(s, a) * model.d_D(s, a);
      outflow(s) += mass;
      inflow += model.gamma * mass * model.transition_hat.row(model.row(s, a)).transpose();
    }
  }
  Vector out = Vector::Zero(S);
  for (int s = 0; s < S; ++s) {
    if (model.state_supported(s)) out(s) = inflow(s) - outflow(s);
  }
  return out;
}

double bellman_flow_violation(const Matrix& w_sa, const MleModel& model) {
  return bellman_flow_residual(w_sa, model).lpNorm<1>();
}

double policy_correction_violation(const Matrix& w, const TabularPolicy& pi_D,
                                   const Eigen::Array<bool, Eigen::Dynamic, 1>* states) {
  if (w.rows() != pi_D.probs.rows() || w.cols() != pi_D.probs.cols()) {
    throw ParameterError("policy_correction_violation: shape mismatch");
  }
  if (states != nullptr && states->size() != w.rows()) {
    throw ParameterError("policy_correction_violation: mask length mismatch");
  }
  double total = 0.0;
  for (Eigen::Index s = 0; s < w.rows(); ++s) {
    if (states != nullptr && !(*states)(s)) continue;
    total += std::abs(w.row(s).dot(pi_D.probs.row(s)) - 1.0);
  }
  return total;
}

double policy_correction_violation(const Matrix& w, const MleModel& model) {
  const Eigen::Array<bool, Eigen::Dynamic, 1> mask = (model.d_D_state.array() > 0.0);
  return policy_correction_violation(w, model.pi_D, &mask);
}

int count_sparse_states(const Matrix& w, const MleModel& model) {
  check_shape(w, model, "count_sparse_states");
  int count = 0;
  for (int s = 0; s < model.n_states; ++s) {
    if (!model.state_supported(s)) continue;
    bool any = false;
    for (int a = 0; a < model.n_actions && !any; ++a) any = model.supported(s, a) && w(s, a) > 0.0;
    if (!any) ++count;
  }
  return count;
}

ViolationReport violation_report(const Matrix& w, const MleModel& model, std::string generator_name,
                                 double alpha_or_beta) {
  ViolationReport r;
  r.viol_bellman_flow = bellman_flow_violation(w, model);
  r.viol_policy_correction = policy_correction_violation(w, model);
  r.n_sparse_states = count_sparse_states(w, model);
  r.n_unsupported_states = model.n_states - model.n_supported_states();
  r.generator_name = std::move(generator_name);
  r.alpha_or_beta = alpha_or_beta;
  return r;
}

double ope_estimate(const Matrix& w_sa, const MleModel& model, const Matrix& signal) {
  check_shape(w_sa, model, "ope_estimate");
  check_shape(signal, model, "ope_estimate");
  double total = 0.0;
  for (int s = 0; s < model.n_states; ++s) {
    for (int a = 0; a < model.n_actions; ++a) {
      if (model.supported(s, a)) total += model.d_D(s, a) * w_sa(s, a) * signal(s, a);
    }
  }
  return total;
}

double ope_rmse(std::span<const std::pair<double, double>> runs) {
  if (runs.empty()) throw ParameterError("ope_rmse: no runs");
  double total = 0.0;
  for (const auto& [estimate, exact] : runs) total += (estimate - exact) * (estimate - exact);
  return std::sqrt(total / static_cast<double>(runs.size()));
}

}  // namespace dicekit
