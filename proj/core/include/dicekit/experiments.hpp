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

#ifndef DICEKIT_EXPERIMENTS_HPP_
#define DICEKIT_EXPERIMENTS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dicekit/constrained.hpp"
#include "dicekit/mdp.hpp"

namespace dicekit {

struct AlgorithmSpec {
  std::string name;       // optidice | semidice | fdvl | odice | sql | xql | extraction
  std::string generator;  // ignored by sql/xql
  std::string param_name; // alpha | beta
  std::vector<double> grid;
  double eta = 1.0;
};

struct ExperimentConfig {
  std::string experiment = "fig1_sweep";  // fig1_sweep | ope_compare | constrained | single_run
  int n_runs = 300;
  std::uint64_t base_seed = 0;
  RandomMdpParams mdp;
  int n_trajectories = 30;
  int horizon = 100;
  std::vector<AlgorithmSpec> algorithms;
  std::string extraction_generator = "kl";

  double tol = 1e-10;
  int max_iters = 100000;
  int newton_max_iters = 500;
  int odice_max_iters = 20000;
  double step_size = 0.5;

  // ope_compare
  std::vector<double> ope_alphas = {0.01};
  // constrained
  int n_cost_states = 5;
  double cost_value = 1.0;
  double budget_fraction = 0.5;
  double constrained_alpha = 0.01;
  LagrangeOptions lagrange;

  std::string output_dir = "dicekit_out";
  int workers = 1;
  bool record_timing = false;

  void validate() const;
  // The benchmark grid over all seven algorithms.
  static std::vector<AlgorithmSpec> default_fig1_algorithms();
};

// Parses a JSON config; absent fields keep their defaults. An empty algorithm
// list is replaced by the default benchmark grid.
ExperimentConfig config_from_json(std::string_view text);
std::string config_to_json(const ExperimentConfig& cfg);

// Worker count from DICEKIT_WORKERS (fallback when unset or invalid).
int workers_from_env(int fallback = 1);

// Seeds: run i draws its MDP from base + i and its data from base + i + 10^6.
std::uint64_t mdp_seed(const ExperimentConfig& cfg, int run);
std::uint64_t data_seed(const ExperimentConfig& cfg, int run);

struct BenchRow {
  int run = 0;
  std::string algorithm;
  std::string generator;
  std::string param_name;
  double param_value = 0.0;
  double exact_return = 0.0;  // raw discounted return on the true MDP
  double viol_bf = 0.0;
  double viol_pc = 0.0;
  double ope_reward = 0.0;
  double ope_cost = 0.0;
  std::optional<double> lambda;
  std::optional<bool> feasible;
  bool converged = false;
  double wall_ms = 0.0;
  // Diagnostics kept out of the CSV.
  long saturated = 0;
  int fallback_states = 0;
  int sparse_states = 0;
  double max_pc_state_gap = 0.0;  // max_s |sum_a w pi_D - target|
  std::string error;
};

struct OpeRow {
  int run = 0;
  double alpha = 0.0;
  std::string estimator;  // raw_correction | extraction | behavior
  double estimate = 0.0;
  double exact_mle = 0.0;   // normalized value of the evaluated policy on the MLE MDP
  double exact_true = 0.0;  // same on the true MDP
  double viol_bf = 0.0;
  bool converged = false;
  std::string error;
};

struct ConstrainedRow {
  int run = 0;
  std::string algorithm;  // corsdice | coptidice | naive_semidice
  bool binding = false;
  double c_tilde = 0.0;
  double lambda = 0.0;
  double estimated_cost = 0.0;
  double exact_cost = 0.0;
  double exact_return = 0.0;
  double true_cost = 0.0;
  double true_return = 0.0;
  bool feasible = false;
  bool converged = false;
  double wall_ms = 0.0;
  std::string error;
};

std::vector<BenchRow> fig1_rows(const ExperimentConfig& cfg);
std::vector<OpeRow> ope_rows(const ExperimentConfig& cfg);
std::vector<ConstrainedRow> constrained_rows(const ExperimentConfig& cfg);

// One run of the benchmark sweep (exposed for tests and the CLI).
std::vector<BenchRow> fig1_single_run(const ExperimentConfig& cfg, int run);

std::string fig1_csv(const std::vector<BenchRow>& rows);
std::string ope_csv(const std::vector<OpeRow>& rows);
std::string constrained_csv(const std::vector<ConstrainedRow>& rows);

std::string fig1_summary_json(const std::vector<BenchRow>& rows);
std::string ope_summary_json(const std::vector<OpeRow>& rows);
std::string constrained_summary_json(const std::vector<ConstrainedRow>& rows);

struct ExperimentOutput {
  std::string csv_path;
  std::string summary_path;
  int n_rows = 0;
  int n_failed = 0;  // rows carrying an error or a non-converged solve
};

ExperimentOutput run_fig1_sweep(const ExperimentConfig& cfg);
ExperimentOutput run_ope_compare(const ExperimentConfig& cfg);
ExperimentOutput run_constrained(const ExperimentConfig& cfg);

// Writes SVG panels next to the CSV and returns their paths.
// kind: fig1 (return, viol_bf, viol_pc), ope (rmse), constrained (cost scatter, feasibility).
std::vector<std::string> emit_plots(const std::string& csv_path, std::string_view kind,
                                    const std::string& output_dir = "");

}  // namespace dicekit

#endif  // DICEKIT_EXPERIMENTS_HPP_
