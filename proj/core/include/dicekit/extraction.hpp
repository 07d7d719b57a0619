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

#ifndef DICEKIT_EXTRACTION_HPP_
#define DICEKIT_EXTRACTION_HPP_

#include <optional>

#include "dicekit/dataset.hpp"
#include "dicekit/divergence.hpp"
#include "dicekit/solvers.hpp"

namespace dicekit {

struct ExtractionResult {
  Vector w_s;                       // 0 on states without data
  Vector mu;
  std::optional<Vector> a_approx;   // bias-reduced path only
  Eigen::Array<bool, Eigen::Dynamic, 1> state_mask;  // states carrying data
  double viol_bellman_flow = 0.0;
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;
  std::optional<double> gap_to_exact;  // sample mode: ||w_s - w_s(exact)||_inf
};

enum class ExtractionSampling { kExact, kDatasetSamples };

struct SampleOptions {
  ExtractionSampling mode = ExtractionSampling::kExact;
  long n_samples = 10000;  // records drawn with replacement from d_D x T_hat
};

// Throws InputError naming the worst state when sum_a w(a|s) pi_D(a|s) is
// more than 1e-6 away from 1 on some state with data.
void check_policy_correction(const MleModel& model, const Matrix& w_policy);

// Minimizes (1-gamma) E_{p0}[mu] + E_{s~d_D}[f*_0(K_mu(s))] where
// K_mu(s) = E_{a~pi_D}[w(a|s) (gamma E_T[mu(s')] - mu(s))], by Newton's method.
ExtractionResult extract_direct(const MleModel& model, const Matrix& w_policy, const FGenerator& g,
                                const OptimizerConfig& cfg, const Vector* mu_init = nullptr);

// Alternates an exact least-squares refit of A(s) with a mu step on the
// decomposed objective. In sample mode the expectations are sample means over
// records drawn with cfg.seed; the result then carries its gap to exact mode.
ExtractionResult extract_bias_reduced(const MleModel& model, const Matrix& w_policy,
                                      const FGenerator& g, const OptimizerConfig& cfg,
                                      const SampleOptions& sampling = {});

// w(s,a) = w(s) w(a|s).
Matrix marginal_correction(const ExtractionResult& res, const Matrix& w_policy);

double extraction_objective(const MleModel& model, const Matrix& w_policy, const FGenerator& g,
                            const Vector& mu);
Vector extraction_gradient(const MleModel& model, const Matrix& w_policy, const FGenerator& g,
                           const Vector& mu);

}  // namespace dicekit

#endif  // DICEKIT_EXTRACTION_HPP_
