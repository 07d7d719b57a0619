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
#include <string>

#include "doctest.h"
#include "dicekit/errors.hpp"
#include "dicekit/extraction.hpp"
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

Matrix semidice_correction(const MleModel& m, double alpha = 0.01) {
  OptimizerConfig c;
  c.alpha = alpha;
  return *semidice_solve(m, kChi2, c).w_a_given_s;
}

double masked_gap(const ExtractionResult& a, const ExtractionResult& b) {
  double worst = 0.0;
  for (Eigen::Index s = 0; s < a.w_s.size(); ++s) {
    if (a.state_mask(s)) worst = std::max(worst, std::abs(a.w_s(s) - b.w_s(s)));
  }
  return worst;
}

}  // namespace

TEST_SUITE("extraction") {

TEST_CASE("identity correction on a stationary dataset") {
  const TabularMdp mdp = generate_random_mdp(2);
  const MleModel m = stationary_model(mdp, benchmark_behavior_policy(mdp));
  const Matrix ones = Matrix::Ones(m.n_states, m.n_actions);
  const ExtractionResult direct = extract_direct(m, ones, kKl, {});
  CHECK(direct.converged);
  const ExtractionResult reduced = extract_bias_reduced(m, ones, kKl, {});
  CHECK(reduced.converged);
  REQUIRE(reduced.a_approx.has_value());
  for (int s : m.supported_states()) {
    CHECK(std::abs(direct.w_s(s) - 1.0) < 1e-8);
    CHECK(std::abs(reduced.w_s(s) - 1.0) < 1e-8);
    CHECK(std::abs((*reduced.a_approx)(s) - kKl.f_prime(1.0)) < 1e-6);
  }
  CHECK(direct.viol_bellman_flow < 1e-10);
}

TEST_CASE("extracted occupancy equals the stationary distribution of the extracted policy") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = make_instance(seed);
    const Matrix w = semidice_correction(in.model);
    const ExtractionResult res = extract_direct(in.model, w, kKl, {});
    REQUIRE(res.converged);
    CHECK(res.w_s.minCoeff() >= 0.0);
    const Matrix w_sa = marginal_correction(res, w);
    CHECK(bellman_flow_violation(w_sa, in.model) <= 1e-3);
    CorrectionSet corr;
    corr.kind = CorrectionSet::Kind::kPerPolicy;
    corr.w_a_given_s = w;
    corr.nu = Vector::Zero(in.model.n_states);
    const TabularPolicy pi = extract_tabular_policy(corr, in.model).policy;
    const Matrix d = exact_stationary_distribution(in.model.as_mdp(), pi);
    CHECK((d - w_sa.cwiseProduct(in.model.d_D)).lpNorm<1>() < 1e-3);
  }
}

TEST_CASE("flow feasibility on benchmark-size instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = make_instance(seed, 30, 4);
    OptimizerConfig c;
    c.tol = 1e-8;
    const ExtractionResult res = extract_direct(in.model, semidice_correction(in.model), kKl, c);
    CHECK(res.viol_bellman_flow <= 1e-3);
  }
}

TEST_CASE("dual objective is convex along segments") {
  const auto in = make_instance(3);
  const Matrix w = semidice_correction(in.model);
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Vector a(in.model.n_states), b(in.model.n_states);
    for (int s = 0; s < a.size(); ++s) {
      a(s) = 2.0 * rng.uniform() - 1.0;
      b(s) = 2.0 * rng.uniform() - 1.0;
    }
    const double fa = extraction_objective(in.model, w, kKl, a);
    const double fb = extraction_objective(in.model, w, kKl, b);
    for (double t : {0.25, 0.5, 0.75}) {
      const double mid = extraction_objective(in.model, w, kKl, t * a + (1 - t) * b);
      CHECK(mid <= t * fa + (1 - t) * fb + 1e-12 * (1.0 + std::abs(fa) + std::abs(fb)));
    }
  }
}

TEST_CASE("dual gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = make_instance(seed);
    const Matrix w = semidice_correction(in.model);
    Rng rng(seed + 50);
    Vector mu(in.model.n_states);
    for (int s = 0; s < mu.size(); ++s) mu(s) = rng.uniform() - 0.5;
    for (const FGenerator& g : {kKl, kChi2}) {
      const Vector analytic = extraction_gradient(in.model, w, g, mu);
      const Vector fd = central_difference([&](const Vector& x) { return extraction_objective(in.model, w, g, x); }, mu);
      CHECK((analytic - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("bias-reduced and direct extraction agree") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = make_instance(seed);
    const Matrix w = semidice_correction(in.model);
    const ExtractionResult direct = extract_direct(in.model, w, kKl, {});
    const ExtractionResult reduced = extract_bias_reduced(in.model, w, kKl, {});
    CHECK(reduced.converged);
    CHECK(masked_gap(direct, reduced) < 1e-3);
  }
}

TEST_CASE("state correction does not depend on the generator") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = make_instance(seed, 30, 4);
    const Matrix w = semidice_correction(in.model);
    const ExtractionResult kl = extract_direct(in.model, w, kKl, {});
    const ExtractionResult chi2 = extract_direct(in.model, w, kChi2, {});
    CHECK(masked_gap(kl, chi2) < 1e-3);
  }
}

TEST_CASE("sampled extraction approaches the exact answer with more samples") {
  double coarse = 0.0, fine = 0.0;
  const int n_seeds = 8;
  for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
    const auto in = make_instance(seed);
    const Matrix w = semidice_correction(in.model);
    OptimizerConfig c;
    c.seed = seed;
    SampleOptions few{ExtractionSampling::kDatasetSamples, 100};
    SampleOptions many{ExtractionSampling::kDatasetSamples, 10000};
    const ExtractionResult a = extract_bias_reduced(in.model, w, kKl, c, few);
    const ExtractionResult b = extract_bias_reduced(in.model, w, kKl, c, many);
    REQUIRE(a.gap_to_exact.has_value());
    REQUIRE(b.gap_to_exact.has_value());
    coarse += *a.gap_to_exact;
    fine += *b.gap_to_exact;
  }
  CHECK(fine < coarse);
  CHECK(fine / n_seeds < 0.1);
}

TEST_CASE("marginal correction") {
  ExtractionResult res;
  res.w_s = Vector::Ones(3);
  Matrix w(3, 2);
  w << 1.0, 2.0, 0.5, 1.5, 3.0, 0.0;
  CHECK(marginal_correction(res, w) == w);
  res.w_s << 2.0, 0.0, 1.0;
  const Matrix m = marginal_correction(res, w);
  CHECK(m.row(0) == 2.0 * w.row(0));
  CHECK(m.row(1).isZero(0.0));
  CHECK(m.row(2) == w.row(2));
  CHECK_THROWS_AS(marginal_correction(res, Matrix::Ones(4, 2)), ParameterError);
}

TEST_CASE("non-policy corrections are rejected with the worst state") {
  const auto in = make_instance(4);
  Matrix w = semidice_correction(in.model);
  const int s = in.model.supported_states().back();
  w.row(s) *= 3.0;
  try {
    extract_direct(in.model, w, kKl, {});
    FAIL("expected an input error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("state " + std::to_string(s)) != std::string::npos);
  }
}

TEST_CASE("unsupported states carry zero correction and are masked") {
  const auto in = make_instance(5, 30, 4, 2, 20);
  REQUIRE(in.model.n_supported_states() < in.model.n_states);
  const ExtractionResult res = extract_direct(in.model, semidice_correction(in.model), kKl, {});
  for (int s = 0; s < in.model.n_states; ++s) {
    CHECK(res.state_mask(s) == in.model.state_supported(s));
    if (!in.model.state_supported(s)) CHECK(res.w_s(s) == 0.0);
  }
  const std::string text = to_json(res);
  CHECK(text.find("\"w_s\"") != std::string::npos);
}

}  // TEST_SUITE
