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

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "detail.hpp"
#include "dicekit/errors.hpp"
#include "dicekit/solvers.hpp"

namespace dicekit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kXqlSaturation = 500.0;

double normalizer_root(const FGenerator& g, const Eigen::Ref<const Eigen::RowVectorXd>& q,
                       const Eigen::Ref<const Eigen::RowVectorXd>& pi, double scale, double target,
                       int state, double* grad = nullptr) {
  double qmin = kInf;
  double qmax = -kInf;
  for (Eigen::Index a = 0; a < q.size(); ++a) {
    if (pi(a) <= 0.0) continue;
    qmin = std::min(qmin, q(a));
    qmax = std::max(qmax, q(a));
  }
  auto where = [state] { return state >= 0 ? " at state " + std::to_string(state) : std::string(); };
  if (qmin == kInf) throw NumericalError("normalizer root: no behavior mass" + where());

  // h is nonincreasing in nu; [qmin - shift, qmax - shift] brackets the root
  // in exact arithmetic, the loops below absorb round-off.
  auto h = [&](double nu) {
    double total = 0.0;
    for (Eigen::Index a = 0; a < q.size(); ++a) {
      if (pi(a) > 0.0) total += pi(a) * g.f_star0_prime((q(a) - nu) / scale);
    }
    return total - target;
  };
  const double shift = scale * g.f_prime(target);
  double lo = qmin - shift;
  double hi = qmax - shift;
  double step = std::max({hi - lo, scale, 1e-12 * (1.0 + std::abs(lo))});
  for (int i = 0; h(lo) < 0.0; ++i) {
    if (i == 200 || !std::isfinite(lo)) throw NumericalError("normalizer root: bracket failure" + where());
    lo -= step;
    step *= 2.0;
  }
  step = std::max({hi - lo, scale, 1e-12 * (1.0 + std::abs(hi))});
  for (int i = 0; h(hi) > 0.0; ++i) {
    if (i == 200 || !std::isfinite(hi)) throw NumericalError("normalizer root: bracket failure" + where());
    hi += step;
    step *= 2.0;
  }
  double h_lo = h(lo);
  double h_hi = h(hi);
  // Safeguarded Newton: Newton steps that stay inside the bracket, bisection
  // otherwise, until the bracket cannot shrink further.
  auto slope = [&](double nu) {
    double total = 0.0;
    for (Eigen::Index a = 0; a < q.size(); ++a) {
      if (pi(a) > 0.0) total -= pi(a) * g.f_star0_second((q(a) - nu) / scale) / scale;
    }
    return total;
  };
  // d root / d q(a) is the curvature-weighted share of action a.
  auto finish = [&](double root) {
    if (grad == nullptr) return root;
    double total = 0.0;
    for (Eigen::Index a = 0; a < q.size(); ++a) {
      grad[a] = pi(a) > 0.0 ? pi(a) * g.f_star0_second((q(a) - root) / scale) : 0.0;
      total += grad[a];
    }
    for (Eigen::Index a = 0; a < q.size(); ++a) grad[a] = total > 0.0 ? grad[a] / total : 0.0;
    return root;
  };
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 2000; ++iter) {
    const double hx = h(x);
    if (hx == 0.0) return finish(x);
    if (hx > 0.0) {
      lo = x;
      h_lo = hx;
    } else {
      hi = x;
      h_hi = hx;
    }
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double d = slope(x);
    const double newton = d < 0.0 ? x - hx / d : mid;
    x = (newton > lo && newton < hi && newton != x) ? newton : mid;
  }
  return finish(std::abs(h_lo) <= std::abs(h_hi) ? lo : hi);
}

// Damped fixed-point iteration v <- update(r + gamma E_T[v]). `update` fills
// the per-state value for supported states. On return `q` is built from the
// last iterate and `v` holds update(q).
// Solves v = T(v), where T(v)(s) = update(r + gamma * T_hat v, s) on supported
// states. update also returns d T(v)(s) / d q(s, .) so each iteration can take
// a Newton step on v - T(v); a step that fails to shrink the residual falls
// back to a damped plain iteration.
template <class Update>
Convergence fixed_point(const MleModel& m, const Matrix& reward, const OptimizerConfig& cfg,
                        Vector& v, Matrix& q, Update&& update) {
  Convergence status;
  const auto states = m.supported_states();
  const int n = static_cast<int>(states.size());
  const int A = m.n_actions;
  for (int s = 0; s < m.n_states; ++s) {
    if (!m.state_supported(s)) v(s) = 0.0;
  }
  Matrix share(m.n_states, A);
  Vector next = v;
  auto residual = [&](const Vector& x) {
    q = reward + m.gamma * detail::expected_next(m.transition_hat, m.n_states, A, x);
    for (int s : states) next(s) = update(q, s, nullptr);
    return (next - x).lpNorm<Eigen::Infinity>();
  };
  std::vector<double> row_buffer(A);
  auto update_with_share = [&](const Vector& x) {
    q = reward + m.gamma * detail::expected_next(m.transition_hat, m.n_states, A, x);
    for (int s : states) {
      next(s) = update(q, s, row_buffer.data());
      for (int a = 0; a < A; ++a) share(s, a) = row_buffer[a];
    }
    return (next - x).lpNorm<Eigen::Infinity>();
  };
  double diff = update_with_share(v);
  double damping = 1.0;
  Matrix jacobian(n, n);
  for (int k = 1; k <= cfg.max_iters; ++k) {
    if (!std::isfinite(diff)) {
      status.message = "fixed-point iterate diverged";
      break;
    }
    status.final_residual = diff;
    if (diff <= cfg.tol) {
      status.converged = true;
      break;
    }
    status.iterations = k;
    // (I - gamma * share * T_hat) restricted to supported states.
    jacobian.setIdentity();
    Vector rhs(n);
    for (int i = 0; i < n; ++i) {
      const int s = states[i];
      rhs(i) = next(s) - v(s);
      for (int a = 0; a < A; ++a) {
        const double c = share(s, a);
        if (c == 0.0) continue;
        const auto t = m.transition_hat.row(m.row(s, a));
        for (int j = 0; j < n; ++j) jacobian(i, j) -= m.gamma * c * t(states[j]);
      }
    }
    const Vector delta = jacobian.partialPivLu().solve(rhs);
    Vector trial = v;
    for (int i = 0; i < n; ++i) trial(states[i]) += delta(i);
    const Vector plain = next;
    const double trial_diff = delta.allFinite() ? residual(trial) : kInf;
    if (trial_diff < diff) {
      v = trial;
      damping = 1.0;
    } else {
      // Plain (possibly damped) contraction step from the last good point.
      for (int s : states) v(s) += damping * (plain(s) - v(s));
      if (damping > 1e-3) damping *= 0.5;
    }
    diff = update_with_share(v);
  }
  if (!status.converged && status.message.empty()) status.message = "max_iters reached";
  q = reward + m.gamma * detail::expected_next(m.transition_hat, m.n_states, A, v);
  for (int s : states) v(s) = update(q, s, nullptr);
  return status;
}

Matrix masked(const MleModel& m, Matrix w) {
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      if (!m.supported(s, a)) w(s, a) = 0.0;
    }
  }
  return w;
}

CorrectionSet per_policy(const MleModel& m, Matrix w, Vector v, Matrix q, Convergence status) {
  CorrectionSet out;
  out.kind = CorrectionSet::Kind::kPerPolicy;
  out.w_a_given_s = masked(m, std::move(w));
  out.nu = std::move(v);
  out.q = std::move(q);
  out.status = std::move(status);
  return out;
}

// Shared by SemiDICE and f-DVL: root of sum_a pi_D max(0, (f')^{-1}((Q-nu)/scale)) = target.
CorrectionSet root_iteration(const MleModel& m, const FGenerator& g, const OptimizerConfig& cfg,
                             const Matrix& reward, double scale, double target, const Vector* nu_init) {
  Vector nu = nu_init != nullptr ? *nu_init : Vector::Zero(m.n_states);
  if (nu.size() != m.n_states) throw ParameterError("warm start has the wrong length");
  Matrix q;
  Convergence status = fixed_point(m, reward, cfg, nu, q, [&](const Matrix& qq, int s, double* grad) {
    return normalizer_root(g, qq.row(s), m.pi_D.probs.row(s), scale, target, s, grad);
  });
  Matrix w = Matrix::Zero(m.n_states, m.n_actions);
  for (int s = 0; s < m.n_states; ++s) {
    if (!m.state_supported(s)) continue;
    for (int a = 0; a < m.n_actions; ++a) {
      const double y = (q(s, a) - nu(s)) / scale;
      if (g.saturated(y) && m.supported(s, a)) ++status.saturated_evaluations;
      w(s, a) = g.f_star0_prime(y);
    }
  }
  return per_policy(m, std::move(w), std::move(nu), std::move(q), std::move(status));
}

}  // namespace

double solve_state_normalizer(const FGenerator& g, const Eigen::Ref<const Eigen::RowVectorXd>& q,
                              const Eigen::Ref<const Eigen::RowVectorXd>& pi_D, double scale,
                              double target) {
  if (!(scale > 0.0) || !(target > 0.0)) throw ParameterError("normalizer root: scale and target must be positive");
  if (q.size() != pi_D.size()) throw ParameterError("normalizer root: shape mismatch");
  return normalizer_root(g, q, pi_D, scale, target, -1);
}

CorrectionSet semidice_solve(const MleModel& model, const FGenerator& g, const OptimizerConfig& cfg,
                             const Matrix* penalized_reward, const Vector* nu_init) {
  cfg.validate();
  const Matrix& reward = penalized_reward != nullptr ? *penalized_reward : model.reward_hat;
  if (reward.rows() != model.n_states || reward.cols() != model.n_actions) {
    throw ParameterError("semidice_solve: reward shape mismatch");
  }
  return root_iteration(model, g, cfg, reward, cfg.alpha, 1.0, nu_init);
}

CorrectionSet fdvl_solve(const MleModel& model, const FGenerator& g, double beta, const OptimizerConfig& cfg) {
  cfg.validate();
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("fdvl_solve: beta must lie in (0,1)");
  return root_iteration(model, g, cfg, model.reward_hat, 1.0, (1.0 - beta) / beta, nullptr);
}

CorrectionSet sql_solve(const MleModel& model, double alpha, const OptimizerConfig& cfg) {
  cfg.validate();
  if (!(alpha > 0.0)) throw ParameterError("sql_solve: alpha must be positive");
  const FGenerator g(FGenerator::Kind::kSqlChi2);
  // The stationarity condition of the V-loss is the sql_chi2 normalizer
  // shifted by alpha.
  Vector v = Vector::Zero(model.n_states);
  Matrix q;
  Convergence status = fixed_point(model, model.reward_hat, cfg, v, q, [&](const Matrix& qq, int s, double* grad) {
    return normalizer_root(g, qq.row(s), model.pi_D.probs.row(s), alpha, 1.0, s, grad) + alpha;
  });
  Matrix w = Matrix::Zero(model.n_states, model.n_actions);
  for (int s = 0; s < model.n_states; ++s) {
    if (!model.state_supported(s)) continue;
    for (int a = 0; a < model.n_actions; ++a) {
      w(s, a) = std::max(0.0, 1.0 + (q(s, a) - v(s)) / (2.0 * alpha));
    }
  }
  return per_policy(model, std::move(w), std::move(v), std::move(q), std::move(status));
}

CorrectionSet xql_solve(const MleModel& model, double alpha, const OptimizerConfig& cfg) {
  cfg.validate();
  if (!(alpha > 0.0)) throw ParameterError("xql_solve: alpha must be positive");
  const Matrix& pi = model.pi_D.probs;
  Vector v = Vector::Zero(model.n_states);
  Matrix q;
  Convergence status = fixed_point(model, model.reward_hat, cfg, v, q, [&](const Matrix& qq, int s, double* grad) {
    double top = -kInf;
    for (int a = 0; a < model.n_actions; ++a) {
      if (pi(s, a) > 0.0) top = std::max(top, qq(s, a) / alpha);
    }
    double total = 0.0;
    for (int a = 0; a < model.n_actions; ++a) {
      if (pi(s, a) > 0.0) total += pi(s, a) * std::exp(qq(s, a) / alpha - top);
    }
    if (grad != nullptr) {
      for (int a = 0; a < model.n_actions; ++a) {
        grad[a] = pi(s, a) > 0.0 ? pi(s, a) * std::exp(qq(s, a) / alpha - top) / total : 0.0;
      }
    }
    return alpha * (top + std::log(total));
  });
  Matrix w = Matrix::Zero(model.n_states, model.n_actions);
  for (int s = 0; s < model.n_states; ++s) {
    if (!model.state_supported(s)) continue;
    for (int a = 0; a < model.n_actions; ++a) {
      if (!model.supported(s, a)) continue;
      // An unshifted exp(Q/alpha) would overflow here.
      if (std::abs(q(s, a) / alpha) > kXqlSaturation) ++status.saturated_evaluations;
      w(s, a) = std::exp((q(s, a) - v(s)) / alpha);
    }
  }
  return per_policy(model, std::move(w), std::move(v), std::move(q), std::move(status));
}

}  // namespace dicekit
