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

// Microbenchmarks for the tabular solvers on a benchmark-sized instance
// (30 states, 4 actions, 30 trajectories of length 100).

#include <benchmark/benchmark.h>

#include "dicekit/constrained.hpp"
#include "dicekit/dataset.hpp"
#include "dicekit/divergence.hpp"
#include "dicekit/experiments.hpp"
#include "dicekit/extraction.hpp"
#include "dicekit/mdp.hpp"
#include "dicekit/solvers.hpp"

namespace {

using namespace dicekit;

struct Instance {
  TabularMdp mdp;
  MleModel model;
  CorrectionSet semidice;
};

const Instance& instance() {
  static const Instance inst = [] {
    Instance out;
    out.mdp = generate_random_mdp(11);
    const Dataset data = collect_dataset(out.mdp, benchmark_behavior_policy(out.mdp), 30, 100, 1000011);
    out.model = build_mle_model(data, out.mdp.n_states, out.mdp.n_actions);
    OptimizerConfig cfg;
    out.semidice = semidice_solve(out.model, FGenerator(FGenerator::Kind::kChi2), cfg);
    return out;
  }();
  return inst;
}

OptimizerConfig with_alpha(double alpha) {
  OptimizerConfig cfg;
  cfg.alpha = alpha;
  return cfg;
}

void BM_ExactStationaryDistribution(benchmark::State& state) {
  const Instance& inst = instance();
  const TabularPolicy pi = benchmark_behavior_policy(inst.mdp);
  for (auto _ : state) benchmark::DoNotOptimize(exact_stationary_distribution(inst.mdp, pi));
}
BENCHMARK(BM_ExactStationaryDistribution);

void BM_OptiDice(benchmark::State& state) {
  const Instance& inst = instance();
  const FGenerator g(FGenerator::Kind::kChi2);
  const OptimizerConfig cfg = with_alpha(0.01);
  for (auto _ : state) benchmark::DoNotOptimize(optidice_solve(inst.model, g, cfg));
}
BENCHMARK(BM_OptiDice)->Unit(benchmark::kMicrosecond);

void BM_SemiDice(benchmark::State& state) {
  const Instance& inst = instance();
  const FGenerator g(FGenerator::Kind::kChi2);
  const OptimizerConfig cfg = with_alpha(0.01);
  for (auto _ : state) benchmark::DoNotOptimize(semidice_solve(inst.model, g, cfg));
}
BENCHMARK(BM_SemiDice)->Unit(benchmark::kMicrosecond);

void BM_Xql(benchmark::State& state) {
  const Instance& inst = instance();
  const OptimizerConfig cfg = with_alpha(0.01);
  for (auto _ : state) benchmark::DoNotOptimize(xql_solve(inst.model, 0.01, cfg));
}
BENCHMARK(BM_Xql)->Unit(benchmark::kMicrosecond);

void BM_Odice(benchmark::State& state) {
  const Instance& inst = instance();
  const FGenerator g(FGenerator::Kind::kChi2);
  OptimizerConfig cfg;
  cfg.max_iters = 20000;
  const double beta = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(odice_solve(inst.model, g, beta, 1.0, cfg));
}
BENCHMARK(BM_Odice)->Arg(1)->Arg(5)->Arg(9)->Unit(benchmark::kMillisecond);

void BM_ExtractDirect(benchmark::State& state) {
  const Instance& inst = instance();
  const FGenerator g(FGenerator::Kind::kKl);
  const OptimizerConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_direct(inst.model, *inst.semidice.w_a_given_s, g, cfg));
  }
}
BENCHMARK(BM_ExtractDirect)->Unit(benchmark::kMicrosecond);

void BM_ExtractBiasReducedSampled(benchmark::State& state) {
  const Instance& inst = instance();
  const FGenerator g(FGenerator::Kind::kKl);
  const OptimizerConfig cfg;
  SampleOptions sampling;
  sampling.mode = ExtractionSampling::kDatasetSamples;
  sampling.n_samples = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_bias_reduced(inst.model, *inst.semidice.w_a_given_s, g, cfg, sampling));
  }
}
BENCHMARK(BM_ExtractBiasReducedSampled)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Corsdice(benchmark::State& state) {
  InstanceParams params;
  const ConstrainedInstance inst = make_constrained_instance(5, 1000005, params);
  const FGenerator chi2(FGenerator::Kind::kChi2);
  const FGenerator kl(FGenerator::Kind::kKl);
  const OptimizerConfig cfg = with_alpha(0.01);
  const LagrangeOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(corsdice_solve(inst.model, chi2, kl, inst.spec, cfg, opts));
}
BENCHMARK(BM_Corsdice)->Unit(benchmark::kMillisecond);

void BM_Fig1SingleRun(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.n_runs = 1;
  cfg.algorithms = ExperimentConfig::default_fig1_algorithms();
  for (auto _ : state) benchmark::DoNotOptimize(fig1_single_run(cfg, 0));
}
BENCHMARK(BM_Fig1SingleRun)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
