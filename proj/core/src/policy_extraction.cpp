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

#include <cmath>

#include "dicekit/errors.hpp"
#include "dicekit/solvers.hpp"

namespace dicekit {

void OptimizerConfig::validate() const {
  if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("beta must lie in (0,1)");
  if (!(eta >= 0.0)) throw ParameterError("eta must be nonnegative");
  if (max_iters < 1) throw ParameterError("max_iters must be at least 1");
  if (!(tol > 0.0)) throw ParameterError("tol must be positive");
  if (!(step_size > 0.0)) throw ParameterError("step_size must be positive");
}

std::string_view kind_name(CorrectionSet::Kind kind) {
  switch (kind) {
    case CorrectionSet::Kind::kStateAction: return "state_action";
    case CorrectionSet::Kind::kPerPolicy: return "per_policy";
    case CorrectionSet::Kind::kState: return "state";
  }
  return "unknown";
}

const Matrix& CorrectionSet::weights() const {
  if (kind == Kind::kStateAction && w_sa) return *w_sa;
  if (kind == Kind::kPerPolicy && w_a_given_s) return *w_a_given_s;
  throw InputError("correction set holds no state-action weights");
}

ExtractedPolicy extract_tabular_policy(const CorrectionSet& corr, const MleModel& model) {
  const Matrix& w = corr.weights();
  if (w.rows() != model.n_states || w.cols() != model.n_actions) {
    throw ParameterError("extract_tabular_policy: shape mismatch");
  }
  const Matrix& base = corr.kind == CorrectionSet::Kind::kStateAction ? model.d_D : model.pi_D.probs;
  ExtractedPolicy out{model.pi_D, 0};
  for (int s = 0; s < model.n_states; ++s) {
    if (!model.state_supported(s)) continue;
    double total = 0.0;
    for (int a = 0; a < model.n_actions; ++a) {
      if (model.supported(s, a)) total += w(s, a) * base(s, a);
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      ++out.n_fallback_states;
      continue;
    }
    for (int a = 0; a < model.n_actions; ++a) {
      out.policy.probs(s, a) = model.supported(s, a) ? w(s, a) * base(s, a) / total : 0.0;
    }
  }
  return out;
}

}  // namespace dicekit
