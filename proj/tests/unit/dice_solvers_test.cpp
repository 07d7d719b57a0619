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

#include "doctest.h"
#include "dicekit/divergence.hpp"
#include "dicekit/errors.hpp"
#include "dicekit/metrics.hpp"
#include "dicekit/serialization.hpp"
#include "dicekit/solvers.hpp"
#include "test_support.hpp"

using namespace dicekit;
using dicekit::testing::central_difference;
using dicekit::testing::make_instance;
using dicekit::testing::stationary_model;

namespace {

const FGenerator kChi2(FGenerator::Kind::kChi2);
const FGenerator kKl(FGenerator::Kind::kKl);

// Every action shares the transition row and reward of action 0, so Q is
// constant across actions at any nu.
TabularMdp action_symmetric_mdp(std::uint64_t seed) {
  RandomMdpParams p;
  p.n_states = 6;
  p.n_actions = 3;
  TabularMdp m = generate_random_mdp(seed, p);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 1; a < m.n_actions; ++a) {
      m.transition.row(m.row(s, a)) = m.transition.row(m.row(s, 0));
      m.reward(s, a) = m.reward(s, 0);
    }
  }
  m.p0 = Vector::Constant(m.n_states, 1.0 / m.n_states);
  return m;
}

MleModel symmetric_model(std::uint64_t seed) {
  const TabularMdp m = action_symmetric_mdp(seed);
  Matrix pi = Matrix::Zero(m.n_states, m.n_actions);
  for (int s = 0; s < m.n_states; ++s) pi.row(s) << 0.2, 0.3, 0.5;
  return stationary_model(m, TabularPolicy{pi});
}

double max_state_sum_gap(const Matrix& w, const MleModel& m, double target) {
  double worst = 0.0;
  for (int s : m.supported_states()) {
    worst = std::max(worst, std::abs(w.row(s).dot(m.pi_D.probs.row(s)) - target));
  }
  return worst;
}

OptimizerConfig config(double alpha) {
  OptimizerConfig c;
  c.alpha = alpha;
  return c;
}

}  // namespace

TEST_SUITE("dice_solvers") {

TEST_CASE("configuration validation") {
  OptimizerConfig c;
  CHECK_NOTHROW(c.validate());
  c.tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.max_iters = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  const auto in = make_instance(1);
  CHECK_THROWS_AS(fdvl_solve(in.model, kChi2, 1.0, {}), ParameterError);
  CHECK_THROWS_AS(xql_solve(in.model, 0.0, {}), ParameterError);
  CHECK_THROWS_AS(odice_solve(in.model, kChi2, 0.5, -1.0, {}), ParameterError);
}

TEST_CASE("OptiDICE on a single absorbing pair") {
  TabularMdp m;
  m.n_states = 1;
  m.n_actions = 1;
  m.transition = Matrix::Ones(1, 1);
  m.reward = Matrix::Zero(1, 1);
  m.cost = Matrix::Zero(1, 1);
  m.p0 = Vector::Ones(1);
  m.gamma = 0.9;
  const MleModel model = model_from_distribution(m, Matrix::Ones(1, 1));
  const CorrectionSet c = optidice_solve(model, kChi2, config(0.1));
  CHECK(c.status.converged);
  CHECK((*c.w_sa)(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("OptiDICE gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = make_instance(seed);
    Rng rng(seed);
    Vector nu(in.model.n_states);
    for (int s = 0; s < nu.size(); ++s) nu(s) = rng.uniform() - 0.5;
    for (const FGenerator& g : {kChi2, kKl}) {
      const double alpha = 0.3;
      const Vector analytic = optidice_gradient(in.model, g, alpha, in.model.reward_hat, nu);
      const Vector fd = central_difference(
          [&](const Vector& x) { return optidice_objective(in.model, g, alpha, in.model.reward_hat, x); }, nu);
      CHECK((analytic - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("OptiDICE output is flow feasible and matches the extracted policy occupancy") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = make_instance(seed);
    const CorrectionSet c = optidice_solve(in.model, kChi2, config(0.01));
    REQUIRE(c.status.converged);
    CHECK(c.status.final_residual <= 1e-10);
    CHECK(c.w_sa->minCoeff() >= 0.0);
    CHECK(bellman_flow_violation(*c.w_sa, in.model) < 1e-3);
    const TabularPolicy pi = extract_tabular_policy(c, in.model).policy;
    const Matrix d = exact_stationary_distribution(in.model.as_mdp(), pi);
    const Matrix dw = c.w_sa->cwiseProduct(in.model.d_D);
    CHECK((d - dw).lpNorm<1>() < 1e-3);
  }
}

TEST_CASE("symmetric Q gives uniform corrections") {
  const MleModel m = symmetric_model(3);
  OptimizerConfig c = config(0.05);
  const CorrectionSet semi = semidice_solve(m, kChi2, c);
  CHECK((semi.w_a_given_s->array() - 1.0).abs().maxCoeff() < 1e-9);
  const CorrectionSet fdvl = fdvl_solve(m, kChi2, 0.5, c);
  CHECK((fdvl.w_a_given_s->array() - 1.0).abs().maxCoeff() < 1e-9);
  const CorrectionSet xql = xql_solve(m, 0.05, c);
  CHECK((xql.w_a_given_s->array() - 1.0).abs().maxCoeff() < 1e-9);
  for (int s = 0; s < m.n_states; ++s) {
    CHECK(std::abs(xql.nu(s) - (*xql.q)(s, 0)) < 1e-9);
  }
  const CorrectionSet sql = sql_solve(m, 0.05, c);
  for (int s = 0; s < m.n_states; ++s) {
    const auto row = sql.w_a_given_s->row(s);
    CHECK(row.maxCoeff() - row.minCoeff() < 1e-12);
  }
}

TEST_CASE("SemiDICE returns a policy correction that is not flow feasible") {
  const auto in = make_instance(4, 30, 4);
  OptimizerConfig c = config(0.01);
  const CorrectionSet semi = semidice_solve(in.model, kChi2, c);
  REQUIRE(semi.status.converged);
  CHECK(semi.kind == CorrectionSet::Kind::kPerPolicy);
  CHECK(max_state_sum_gap(*semi.w_a_given_s, in.model, 1.0) <= 1e-9);
  CHECK(policy_correction_violation(*semi.w_a_given_s, in.model) < 1e-6);
  CHECK(bellman_flow_violation(*semi.w_a_given_s, in.model) > 10.0 * c.tol);
  for (int s : in.model.supported_states()) CHECK(semi.w_a_given_s->row(s).maxCoeff() > 0.0);
  CHECK(count_sparse_states(*semi.w_a_given_s, in.model) == 0);
}

TEST_CASE("f-DVL scaling law") {
  const auto in = make_instance(5, 30, 4);
  for (double beta : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    CAPTURE(beta);
    const CorrectionSet f = fdvl_solve(in.model, kChi2, beta, {});
    REQUIRE(f.status.converged);
    CHECK(max_state_sum_gap(*f.w_a_given_s, in.model, (1.0 - beta) / beta) <= 1e-9);
  }
  const CorrectionSet f9 = fdvl_solve(in.model, kChi2, 0.9, {});
  const double expected = in.model.n_supported_states() * 8.0 / 9.0;
  CHECK(policy_correction_violation(*f9.w_a_given_s, in.model) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("SQL is a policy correction shifted by alpha") {
  const auto in = make_instance(6, 30, 4);
  const double alpha = 0.01;
  const CorrectionSet sql = sql_solve(in.model, alpha, {});
  REQUIRE(sql.status.converged);
  CHECK(policy_correction_violation(*sql.w_a_given_s, in.model) < 1e-6);
  const FGenerator sq(FGenerator::Kind::kSqlChi2);
  for (int s : in.model.supported_states()) {
    const double nu = solve_state_normalizer(sq, sql.q->row(s), in.model.pi_D.probs.row(s), alpha, 1.0);
    CHECK(std::abs(sql.nu(s) - nu - alpha) < 1e-9);
  }
}

TEST_CASE("XQL value is the log-sum-exp of Q and matches the KL normalizer") {
  const auto in = make_instance(7, 30, 4);
  const double alpha = 0.1;
  const CorrectionSet xql = xql_solve(in.model, alpha, {});
  REQUIRE(xql.status.converged);
  CHECK(policy_correction_violation(*xql.w_a_given_s, in.model) < 1e-9);
  for (int s : in.model.supported_states()) {
    double lse = 0.0;
    for (int a = 0; a < in.model.n_actions; ++a) lse += in.model.pi_D(s, a) * std::exp((*xql.q)(s, a) / alpha);
    CHECK(std::abs(xql.nu(s) - alpha * std::log(lse)) < 1e-8);
    const double nu = solve_state_normalizer(kKl, xql.q->row(s), in.model.pi_D.probs.row(s), alpha, 1.0);
    CHECK(std::abs(nu - (xql.nu(s) - alpha)) < 1e-8);
  }
  // At their own fixed points the two differ by the discounted sum of the shift.
  OptimizerConfig c = config(alpha);
  const CorrectionSet semi = semidice_solve(in.model, kKl, c);
  for (int s : in.model.supported_states()) {
    CHECK(std::abs(semi.nu(s) - (xql.nu(s) - alpha / (1.0 - in.model.gamma))) < 1e-8);
  }
  CHECK((*semi.w_a_given_s - *xql.w_a_given_s).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("XQL correction flattens for large alpha") {
  const auto in = make_instance(8, 30, 4);
  const CorrectionSet xql = xql_solve(in.model, 1e4, {});
  for (int s : in.model.supported_states()) {
    for (int a = 0; a < in.model.n_actions; ++a) {
      if (in.model.supported(s, a)) CHECK(std::abs((*xql.w_a_given_s)(s, a) - 1.0) < 1e-3);
    }
  }
}

TEST_CASE("ODICE without projection follows the f-DVL semi-gradient") {
  const auto in = make_instance(9);
  const MleModel& m = in.model;
  Rng rng(3);
  Vector nu(m.n_states);
  for (int s = 0; s < nu.size(); ++s) nu(s) = rng.uniform();
  const double beta = 0.7;
  Vector expected = Vector::Zero(m.n_states);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      if (!m.supported(s, a)) continue;
      for (int sn = 0; sn < m.n_states; ++sn) {
        const double p = m.d_D(s, a) * m.transition_hat(m.row(s, a), sn);
        if (p == 0.0) continue;
        const double e = m.reward_hat(s, a) + m.gamma * nu(sn) - nu(s);
        expected(s) += p * ((1.0 - beta) - beta * kChi2.f_star0_prime(e));
      }
    }
  }
  const Vector dir = odice_direction(m, kChi2, beta, 0.0, nu, OdiceDirection::kOrthogonal);
  CHECK((dir - expected).cwiseAbs().maxCoeff() < 1e-14);

  const Vector full = odice_direction(m, kChi2, beta, 1.0, nu, OdiceDirection::kFullGradient);
  const Vector fd = central_difference([&](const Vector& x) { return odice_objective(m, kChi2, beta, x); }, nu);
  CHECK((full - fd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("ODICE generally violates both constraints") {
  const auto in = make_instance(10, 30, 4);
  const CorrectionSet o = odice_solve(in.model, kChi2, 0.5, 1.0, {});
  CHECK(o.status.converged);
  CHECK(bellman_flow_violation(*o.w_a_given_s, in.model) > 1e-6);
  CHECK(policy_correction_violation(*o.w_a_given_s, in.model) > 1e-6);
}

TEST_CASE("tabular policy extraction") {
  const auto in = make_instance(11, 30, 4);
  CorrectionSet ones;
  ones.kind = CorrectionSet::Kind::kPerPolicy;
  ones.w_a_given_s = Matrix::Ones(in.model.n_states, in.model.n_actions);
  ones.nu = Vector::Zero(in.model.n_states);
  const ExtractedPolicy id = extract_tabular_policy(ones, in.model);
  CHECK((id.policy.probs - in.model.pi_D.probs).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(id.n_fallback_states == 0);

  const double alpha = 0.05;
  const CorrectionSet xql = xql_solve(in.model, alpha, {});
  const TabularPolicy pi = extract_tabular_policy(xql, in.model).policy;
  for (int s : in.model.supported_states()) {
    for (int a = 0; a < in.model.n_actions; ++a) {
      const double softmax = in.model.pi_D(s, a) * std::exp(((*xql.q)(s, a) - xql.nu(s)) / alpha);
      CHECK(std::abs(pi(s, a) - softmax) < 1e-9);
    }
  }
}

TEST_CASE("sparse OptiDICE corrections fall back on some states") {
  // First benchmark run at the smallest alpha of the sweep grid.
  const TabularMdp mdp = generate_random_mdp(0);
  const Dataset d = collect_dataset(mdp, benchmark_behavior_policy(mdp), 30, 100, 1000000);
  const MleModel m = build_mle_model(d, mdp.n_states, mdp.n_actions);
  const CorrectionSet c = optidice_solve(m, kChi2, config(1e-4));
  CHECK(extract_tabular_policy(c, m).n_fallback_states >= 1);
}

TEST_CASE("extracted policies improve on the behavior policy") {
  int improved = 0;
  const int n = 20;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto in = make_instance(seed, 30, 4);
    const double base = exact_policy_value(in.mdp, in.behavior, Signal::kReward).normalized;
    double best = -INFINITY;
    for (double alpha : {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
      const CorrectionSet c = semidice_solve(in.model, kChi2, config(alpha));
      best = std::max(best, exact_policy_value(in.mdp, extract_tabular_policy(c, in.model).policy, Signal::kReward).normalized);
    }
    improved += best >= base;
  }
  CHECK(improved >= 16);
}

TEST_CASE("correction sets round-trip through JSON") {
  const auto in = make_instance(12);
  const CorrectionSet c = semidice_solve(in.model, kChi2, config(0.01));
  const CorrectionSet back = correction_from_json(to_json(c));
  CHECK(back.kind == c.kind);
  CHECK(*back.w_a_given_s == *c.w_a_given_s);
  CHECK(back.nu == c.nu);
  CHECK(*back.q == *c.q);
  CHECK(back.status.converged == c.status.converged);
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(correction_from_json("{\"schema\": \"dicekit.mdp\", \"version\": 1}"), ParseError);
}

}  // TEST_SUITE
