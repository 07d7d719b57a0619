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

#include "dicekit/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "detail.hpp"
#include "dicekit/convex.hpp"
#include "dicekit/errors.hpp"
#include "dicekit/metrics.hpp"
#include "dicekit/rng.hpp"

namespace dicekit {
namespace {

// K = B mu on the states that carry data; the dual objective is
// (1-gamma) p0'mu + sum_i d_i f*_0((B mu)_i).
struct LinearDual {
  std::vector<int> states;
  std::vector<int> position;
  Matrix B;
  Vector d;
  Vector p0;

  int size() const { return static_cast<int>(states.size()); }

  Vector expand(const Vector& x, int n_states) const {
    Vector out = Vector::Zero(n_states);
    for (int i = 0; i < size(); ++i) out(states[i]) = x(i);
    return out;
  }

  double value(const FGenerator& g, double gamma, const Vector& mu) const {
    const Vector k = B * mu;
    double total = (1.0 - gamma) * p0.dot(mu);
    for (int i = 0; i < size(); ++i) total += d(i) * g.f_star0(k(i));
    return total;
  }

  // Gradient and Hessian of the decomposed objective at a given A.
  void derivatives_at(const FGenerator& g, double gamma, const Vector& a, Vector* grad, Matrix* hess) const {
    Vector slope(size());
    for (int i = 0; i < size(); ++i) slope(i) = d(i) * g.f_star0_prime(a(i));
    *grad = (1.0 - gamma) * p0 + B.transpose() * slope;
    if (hess == nullptr) return;
    Vector curvature(size());
    for (int i = 0; i < size(); ++i) curvature(i) = d(i) * g.f_star0_second(a(i));
    *hess = B.transpose() * curvature.asDiagonal() * B;
  }
};

LinearDual exact_dual(const MleModel& m, const Matrix& w) {
  LinearDual dual;
  dual.states = m.supported_states();
  dual.position.assign(m.n_states, -1);
  for (int i = 0; i < dual.size(); ++i) dual.position[dual.states[i]] = i;
  const int n = dual.size();
  dual.B = Matrix::Zero(n, n);
  dual.d.resize(n);
  dual.p0.resize(n);
  for (int i = 0; i < n; ++i) {
    const int s = dual.states[i];
    dual.d(i) = m.d_D_state(s);
    dual.p0(i) = m.p0_hat(s);
    for (int a = 0; a < m.n_actions; ++a) {
      if (!m.supported(s, a)) continue;
      const double coef = m.pi_D(s, a) * w(s, a);
      dual.B(i, i) -= coef;
      for (int j = 0; j < n; ++j) dual.B(i, j) += m.gamma * coef * m.transition_hat(m.row(s, a), dual.states[j]);
    }
  }
  return dual;
}

LinearDual sampled_dual(const MleModel& m, const Matrix& w, long n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("extraction: n_samples must be positive");
  const auto triples = detail::enumerate_triples(m);
  std::vector<double> cumulative(triples.size());
  double running = 0.0;
  for (std::size_t k = 0; k < triples.size(); ++k) cumulative[k] = (running += triples[k].weight);

  Rng rng(seed);
  std::vector<long> draws(triples.size(), 0);
  for (long k = 0; k < n_samples; ++k) {
    const double u = rng.uniform() * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    ++draws[static_cast<std::size_t>(it - cumulative.begin())];
  }

  std::vector<long> per_state(m.n_states, 0);
  for (std::size_t k = 0; k < triples.size(); ++k) per_state[triples[k].s] += draws[k];
  LinearDual dual;
  dual.position.assign(m.n_states, -1);
  for (int s = 0; s < m.n_states; ++s) {
    if (per_state[s] > 0) {
      dual.position[s] = dual.size();
      dual.states.push_back(s);
    }
  }
  const int n = dual.size();
  dual.B = Matrix::Zero(n, n);
  dual.d.resize(n);
  dual.p0.resize(n);
  for (int i = 0; i < n; ++i) {
    dual.d(i) = static_cast<double>(per_state[dual.states[i]]) / static_cast<double>(n_samples);
    dual.p0(i) = m.p0_hat(dual.states[i]);
  }
  for (std::size_t k = 0; k < triples.size(); ++k) {
    if (draws[k] == 0) continue;
    const auto& t = triples[k];
    const int i = dual.position[t.s];
    const double coef = w(t.s, t.a) * static_cast<double>(draws[k]) / static_cast<double>(per_state[t.s]);
    dual.B(i, i) -= coef;
    const int j = dual.position[t.s_next];
    if (j >= 0) dual.B(i, j) += m.gamma * coef;
  }
  return dual;
}

void check_shape(const MleModel& m, const Matrix& w) {
  if (w.rows() != m.n_states || w.cols() != m.n_actions) throw ParameterError("extraction: shape mismatch");
}

ExtractionResult finish(const MleModel& m, const Matrix& w, const FGenerator& g, const LinearDual& dual,
                        const Vector& mu_reduced, const Vector& k) {
  ExtractionResult res;
  res.mu = dual.expand(mu_reduced, m.n_states);
  res.w_s = Vector::Zero(m.n_states);
  res.state_mask = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(m.n_states, false);
  for (int i = 0; i < dual.size(); ++i) {
    res.w_s(dual.states[i]) = g.f_star0_prime(k(i));
    res.state_mask(dual.states[i]) = true;
  }
  res.viol_bellman_flow = bellman_flow_violation(marginal_correction(res, w), m);
  return res;
}

}  // namespace

void check_policy_correction(const MleModel& model, const Matrix& w_policy) {
  check_shape(model, w_policy);
  int worst = -1;
  double worst_gap = 0.0;
  for (int s = 0; s < model.n_states; ++s) {
    if (!model.state_supported(s)) continue;
    double total = 0.0;
    for (int a = 0; a < model.n_actions; ++a) {
      if (model.supported(s, a)) total += w_policy(s, a) * model.pi_D(s, a);
    }
    const double gap = std::abs(total - 1.0);
    if (!(gap <= worst_gap)) {
      worst_gap = gap;
      worst = s;
    }
  }
  if (worst >= 0 && !(worst_gap <= 1e-6)) {
    throw InputError("extraction needs a policy correction: state " + std::to_string(worst) +
                     " has sum_a w(a|s) pi_D(a|s) off by " + std::to_string(worst_gap));
  }
}

double extraction_objective(const MleModel& model, const Matrix& w_policy, const FGenerator& g, const Vector& mu) {
  check_shape(model, w_policy);
  const LinearDual dual = exact_dual(model, w_policy);
  Vector reduced(dual.size());
  for (int i = 0; i < dual.size(); ++i) reduced(i) = mu(dual.states[i]);
  return dual.value(g, model.gamma, reduced);
}

Vector extraction_gradient(const MleModel& model, const Matrix& w_policy, const FGenerator& g, const Vector& mu) {
  check_shape(model, w_policy);
  const LinearDual dual = exact_dual(model, w_policy);
  Vector reduced(dual.size());
  for (int i = 0; i < dual.size(); ++i) reduced(i) = mu(dual.states[i]);
  Vector grad;
  dual.derivatives_at(g, model.gamma, dual.B * reduced, &grad, nullptr);
  return dual.expand(grad, model.n_states);
}

ExtractionResult extract_direct(const MleModel& model, const Matrix& w_policy, const FGenerator& g,
                                const OptimizerConfig& cfg, const Vector* mu_init) {
  cfg.validate();
  check_policy_correction(model, w_policy);
  const LinearDual dual = exact_dual(model, w_policy);
  const double gamma = model.gamma;

  ConvexObjective problem;
  problem.value = [&](const Vector& mu) { return dual.value(g, gamma, mu); };
  problem.derivatives = [&](const Vector& mu, Vector* grad, Matrix* hess) {
    dual.derivatives_at(g, gamma, dual.B * mu, grad, hess);
  };
  // K = B mu with B = -(I - gamma P) on supported states, so B is well
  // conditioned; factoring through it avoids squaring its condition number.
  const Eigen::PartialPivLU<Matrix> lu(dual.B);
  const bool factored = dual.size() > 0 && std::abs(lu.determinant()) > 0.0 &&
                        (lu.solve(dual.B) - Matrix::Identity(dual.size(), dual.size())).lpNorm<Eigen::Infinity>() < 1e-8;
  if (factored) {
    problem.direction = [&](const Vector& mu, const Vector& grad, double lm, Vector* dir) {
      const Vector k = dual.B * mu;
      const Vector y = lu.transpose().solve(-grad);
      Vector z(dual.size());
      for (int i = 0; i < dual.size(); ++i) z(i) = y(i) / (dual.d(i) * g.f_star0_second(k(i)) + lm);
      *dir = lu.solve(z);
      return dir->allFinite();
    };
  }
  Vector x0 = Vector::Zero(dual.size());
  if (mu_init != nullptr) {
    for (int i = 0; i < dual.size(); ++i) x0(i) = (*mu_init)(dual.states[i]);
  }
  NewtonOptions opts;
  opts.max_iters = cfg.max_iters;
  opts.grad_tol = cfg.tol;
  const NewtonResult nr = minimize_newton(problem, x0, opts);

  ExtractionResult res = finish(model, w_policy, g, dual, nr.x, dual.B * nr.x);
  res.converged = nr.converged;
  res.iterations = nr.iterations;
  res.final_grad_norm = nr.grad_norm;
  return res;
}

ExtractionResult extract_bias_reduced(const MleModel& model, const Matrix& w_policy, const FGenerator& g,
                                      const OptimizerConfig& cfg, const SampleOptions& sampling) {
  cfg.validate();
  check_policy_correction(model, w_policy);
  const bool exact = sampling.mode == ExtractionSampling::kExact;
  const LinearDual dual = exact ? exact_dual(model, w_policy)
                                : sampled_dual(model, w_policy, sampling.n_samples, cfg.seed);
  const double gamma = model.gamma;
  const int n = dual.size();

  Vector mu = Vector::Zero(n);
  Vector a = Vector::Constant(n, g.f_prime(1.0));
  double fx = dual.value(g, gamma, mu);
  Vector grad(n);
  Matrix hess(n, n);
  double lm = 0.0;
  int iter = 0;
  double grad_norm = 0.0;
  bool converged = false;
  for (; iter < cfg.max_iters; ++iter) {
    // mu step on the decomposed objective at the current A.
    dual.derivatives_at(g, gamma, a, &grad, &hess);
    const double scale = std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
    lm = std::max(lm * 0.1, 1e-14 * scale);
    bool stepped = false;
    for (int attempt = 0; attempt < 30 && !stepped; ++attempt) {
      if (attempt > 0) lm *= 10.0;
      Matrix reg = hess;
      reg.diagonal().array() += lm;
      const Eigen::LDLT<Matrix> ldlt(reg);
      if (ldlt.info() != Eigen::Success) continue;
      const Vector dir = ldlt.solve(-grad);
      const double slope = grad.dot(dir);
      if (!dir.allFinite() || !(slope < 0.0)) continue;
      double t = 1.0;
      const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fx));
      for (int ls = 0; ls < 60 && !stepped && -1e-4 * t * slope > noise; ++ls, t *= 0.5) {
        const Vector trial = mu + t * dir;
        const double ft = dual.value(g, gamma, trial);
        if (std::isfinite(ft) && ft <= fx + 1e-4 * t * slope) {
          mu = trial;
          fx = ft;
          stepped = true;
        }
      }
      // Round-off regime: backtrack on the gradient norm instead.
      Vector trial_grad;
      t = 1.0;
      for (int ls = 0; ls < 20 && !stepped; ++ls, t *= 0.5) {
        const Vector trial = mu + t * dir;
        dual.derivatives_at(g, gamma, dual.B * trial, &trial_grad, nullptr);
        if (trial_grad.lpNorm<Eigen::Infinity>() < grad.lpNorm<Eigen::Infinity>()) {
          mu = trial;
          fx = dual.value(g, gamma, mu);
          stepped = true;
        }
      }
    }
    // Exact least-squares refit: A(s) is the (sample) mean of w(a|s) e_mu(s,s').
    a = dual.B * mu;
    dual.derivatives_at(g, gamma, a, &grad, nullptr);
    grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (grad_norm <= cfg.tol) {
      converged = true;
      ++iter;
      break;
    }
    if (!stepped && iter > 0) break;
  }

  ExtractionResult res = finish(model, w_policy, g, dual, mu, a);
  res.a_approx = dual.expand(a, model.n_states);
  res.converged = converged;
  res.iterations = iter;
  res.final_grad_norm = grad_norm;
  if (!exact) {
    const ExtractionResult reference = extract_direct(model, w_policy, g, cfg);
    res.gap_to_exact = (res.w_s - reference.w_s).lpNorm<Eigen::Infinity>();
  }
  return res;
}

Matrix marginal_correction(const ExtractionResult& res, const Matrix& w_policy) {
  if (res.w_s.size() != w_policy.rows()) throw ParameterError("marginal_correction: shape mismatch");
  return res.w_s.asDiagonal() * w_policy;
}

}  // namespace dicekit
