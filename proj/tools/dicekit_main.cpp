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

// dicekit: command line driver for the tabular DICE toolkit.
//
//   dicekit gen-mdp --seed 7 -o mdp.json --dataset data.json
//   dicekit solve --mdp mdp.json --dataset data.json --algorithm semidice --alpha 0.01
//   dicekit extract --mdp mdp.json --dataset data.json --correction corr.json
//   dicekit fig1 --config sweep.json --runs 10 --output out/
//   dicekit plot --csv out/fig1.csv --kind fig1
//
// The worker count comes from DICEKIT_WORKERS unless --workers is given.

#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dicekit/constrained.hpp"
#include "dicekit/dataset.hpp"
#include "dicekit/divergence.hpp"
#include "dicekit/errors.hpp"
#include "dicekit/experiments.hpp"
#include "dicekit/extraction.hpp"
#include "dicekit/mdp.hpp"
#include "dicekit/metrics.hpp"
#include "dicekit/serialization.hpp"
#include "dicekit/solvers.hpp"

namespace {

using namespace dicekit;

constexpr int kExitError = 2;
constexpr int kExitFlagged = 3;

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
  } else {
    write_text_file(path, text + "\n");
  }
}

// Inputs shared by solve and extract.
struct ModelArgs {
  std::string mdp_path;
  std::string dataset_path;
  std::string model_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mdp", mdp_path, "true MDP (enables exact returns)");
    cmd->add_option("--dataset", dataset_path, "dataset to build the MLE model from");
    cmd->add_option("--model", model_path, "precomputed MLE model");
  }

  MleModel load(std::optional<TabularMdp>& mdp) const {
    if (!mdp_path.empty()) mdp = mdp_from_json(read_text_file(mdp_path));
    if (!model_path.empty()) return model_from_json(read_text_file(model_path));
    if (dataset_path.empty()) throw ParameterError("one of --dataset or --model is required");
    const Dataset data = dataset_from_json(read_text_file(dataset_path));
    if (mdp) return build_mle_model(data, mdp->n_states, mdp->n_actions);
    return build_mle_model(data);
  }
};

struct SweepArgs {
  std::string config_path;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string output_dir;
  bool timing = false;
  bool dry_run = false;
  bool strict = false;
  bool plots = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--runs", runs, "override n_runs")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "override the base seed");
    cmd->add_option("--workers", workers, "worker threads (default: $DICEKIT_WORKERS or 1)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("-o,--output", output_dir, "output directory");
    cmd->add_flag("--timing", timing, "record wall-clock time per row");
    cmd->add_flag("--dry-run", dry_run, "print the resolved config and exit");
    cmd->add_flag("--strict", strict, "exit nonzero when any row is flagged");
    cmd->add_flag("--plot", plots, "write SVG panels next to the CSV");
  }

  ExperimentConfig resolve(const std::string& experiment) const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = config_from_json(read_text_file(config_path));
    if (cfg.algorithms.empty()) cfg.algorithms = ExperimentConfig::default_fig1_algorithms();
    cfg.experiment = experiment;
    if (runs) cfg.n_runs = *runs;
    if (seed) cfg.base_seed = *seed;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    cfg.workers = workers ? *workers : workers_from_env(cfg.workers);
    cfg.record_timing = cfg.record_timing || timing;
    cfg.validate();
    return cfg;
  }
};

int finish_sweep(const SweepArgs& args, const ExperimentOutput& out, std::string_view plot_kind) {
  std::cout << "wrote " << out.csv_path << " (" << out.n_rows << " rows)\n"
            << "wrote " << out.summary_path << '\n';
  if (args.plots) {
    for (const auto& path : emit_plots(out.csv_path, plot_kind)) std::cout << "wrote " << path << '\n';
  }
  if (out.n_failed > 0) {
    std::cerr << "warning: " << out.n_failed << " flagged row(s) (solver error or non-convergence)\n";
    if (args.strict) return kExitFlagged;
  }
  return 0;
}

CorrectionSet run_solver(const MleModel& m, const std::string& algorithm, const FGenerator& g,
                         const OptimizerConfig& cfg) {
  if (algorithm == "optidice") return optidice_solve(m, g, cfg);
  if (algorithm == "semidice") return semidice_solve(m, g, cfg);
  if (algorithm == "fdvl") return fdvl_solve(m, g, cfg.beta, cfg);
  if (algorithm == "odice") return odice_solve(m, g, cfg.beta, cfg.eta, cfg);
  if (algorithm == "sql") return sql_solve(m, cfg.alpha, cfg);
  if (algorithm == "xql") return xql_solve(m, cfg.alpha, cfg);
  throw ParameterError("unknown algorithm '" + algorithm + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dicekit: tabular stationary distribution correction estimation"};
  app.require_subcommand(1);

  // gen-mdp
  auto* gen = app.add_subcommand("gen-mdp", "generate a random benchmark MDP (and optionally a dataset)");
  std::uint64_t gen_seed = 0;
  RandomMdpParams mdp_params;
  std::string gen_out;
  std::string gen_dataset;
  std::optional<std::uint64_t> gen_data_seed;
  int gen_trajectories = 30;
  int gen_horizon = 100;
  int gen_cost_states = 0;
  gen->add_option("--seed", gen_seed, "MDP seed");
  gen->add_option("--states", mdp_params.n_states)->check(CLI::PositiveNumber);
  gen->add_option("--actions", mdp_params.n_actions)->check(CLI::PositiveNumber);
  gen->add_option("--successors", mdp_params.n_successors)->check(CLI::PositiveNumber);
  gen->add_option("--gamma", mdp_params.gamma)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--cost-states", gen_cost_states, "attach unit costs to this many random states");
  gen->add_option("-o,--output", gen_out, "MDP JSON path (default stdout)");
  gen->add_option("--dataset", gen_dataset, "also collect a dataset with the benchmark behavior policy");
  gen->add_option("--data-seed", gen_data_seed, "dataset seed (default seed + 10^6)");
  gen->add_option("--trajectories", gen_trajectories)->check(CLI::PositiveNumber);
  gen->add_option("--horizon", gen_horizon)->check(CLI::PositiveNumber);

  // solve
  auto* solve = app.add_subcommand("solve", "run one DICE solver on an MLE model");
  ModelArgs solve_in;
  solve_in.attach(solve);
  std::string algorithm = "semidice";
  std::string generator = "chi2";
  OptimizerConfig solve_cfg;
  std::string solve_out;
  std::string report_out;
  solve->add_option("--algorithm", algorithm)
      ->check(CLI::IsMember({"optidice", "semidice", "fdvl", "odice", "sql", "xql"}));
  solve->add_option("--generator", generator, "f-divergence (ignored by sql/xql)");
  solve->add_option("--alpha", solve_cfg.alpha);
  solve->add_option("--beta", solve_cfg.beta);
  solve->add_option("--eta", solve_cfg.eta);
  solve->add_option("--tol", solve_cfg.tol);
  solve->add_option("--max-iters", solve_cfg.max_iters);
  solve->add_option("-o,--output", solve_out, "correction JSON path");
  solve->add_option("--report", report_out, "solve report JSON path (default stdout)");

  // extract
  auto* extract = app.add_subcommand("extract", "recover w(s) from a policy correction");
  ModelArgs extract_in;
  extract_in.attach(extract);
  std::string correction_path;
  std::string extract_generator = "kl";
  bool bias_reduced = false;
  long samples = 0;
  OptimizerConfig extract_cfg;
  std::string extract_out;
  extract->add_option("--correction", correction_path, "per-policy correction JSON")->required();
  extract->add_option("--generator", extract_generator);
  extract->add_flag("--bias-reduced", bias_reduced, "alternating A-refit solver");
  extract->add_option("--samples", samples, "sample this many records instead of exact expectations");
  extract->add_option("--seed", extract_cfg.seed, "sampling seed");
  extract->add_option("--tol", extract_cfg.tol);
  extract->add_option("--max-iters", extract_cfg.max_iters);
  extract->add_option("-o,--output", extract_out, "extraction JSON path (default stdout)");

  // sweeps
  auto* fig1 = app.add_subcommand("fig1", "random-MDP sweep over all algorithms and grids");
  SweepArgs fig1_args;
  fig1_args.attach(fig1);
  auto* ope = app.add_subcommand("ope", "raw correction vs extraction off-policy evaluation");
  SweepArgs ope_args;
  ope_args.attach(ope);
  auto* constrained = app.add_subcommand("constrained", "CORSDICE vs COptiDICE vs naive SemiDICE");
  SweepArgs constrained_args;
  constrained_args.attach(constrained);

  // plot
  auto* plot = app.add_subcommand("plot", "render SVG panels from an experiment CSV");
  std::string plot_csv;
  std::string plot_kind = "fig1";
  std::string plot_dir;
  plot->add_option("--csv", plot_csv)->required()->check(CLI::ExistingFile);
  plot->add_option("--kind", plot_kind)->check(CLI::IsMember({"fig1", "ope", "constrained"}));
  plot->add_option("-o,--output", plot_dir, "output directory (default: next to the CSV)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      TabularMdp mdp = generate_random_mdp(gen_seed, mdp_params);
      if (gen_cost_states > 0) mdp = attach_random_costs(mdp, gen_seed, gen_cost_states);
      emit(to_json(mdp), gen_out);
      if (!gen_dataset.empty()) {
        const std::uint64_t seed = gen_data_seed ? *gen_data_seed : gen_seed + 1000000;
        const Dataset data = collect_dataset(mdp, benchmark_behavior_policy(mdp), gen_trajectories, gen_horizon, seed);
        write_text_file(gen_dataset, to_json(data) + "\n");
      }
      return 0;
    }

    if (solve->parsed()) {
      std::optional<TabularMdp> mdp;
      const MleModel model = solve_in.load(mdp);
      const auto start = std::chrono::steady_clock::now();
      const CorrectionSet corr = run_solver(model, algorithm, make_generator(generator), solve_cfg);
      SolveReport report;
      report.wall_time_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      const Matrix& w = corr.weights();
      report.converged = corr.status.converged;
      report.iterations = corr.status.iterations;
      report.final_grad_norm = corr.status.final_residual;
      report.viol_bellman_flow = bellman_flow_violation(w, model);
      report.viol_policy_correction = policy_correction_violation(w, model);
      report.ope_reward = ope_estimate(w, model, model.reward_hat);
      report.ope_cost = ope_estimate(w, model, model.cost_hat);
      if (mdp) {
        const TabularPolicy pi = extract_tabular_policy(corr, model).policy;
        report.exact_return = exact_policy_value(*mdp, pi, Signal::kReward).raw;
      }
      if (!solve_out.empty()) write_text_file(solve_out, to_json(corr) + "\n");
      emit(to_json(report), report_out);
      if (!corr.status.converged) std::cerr << "warning: " << corr.status.message << '\n';
      return 0;
    }

    if (extract->parsed()) {
      std::optional<TabularMdp> mdp;
      const MleModel model = extract_in.load(mdp);
      const CorrectionSet corr = correction_from_json(read_text_file(correction_path));
      if (!corr.w_a_given_s) throw InputError("extract: the correction has no w(a|s)");
      const FGenerator g = make_generator(extract_generator);
      ExtractionResult res;
      if (bias_reduced || samples > 0) {
        SampleOptions sampling;
        if (samples > 0) {
          sampling.mode = ExtractionSampling::kDatasetSamples;
          sampling.n_samples = samples;
        }
        res = extract_bias_reduced(model, *corr.w_a_given_s, g, extract_cfg, sampling);
      } else {
        res = extract_direct(model, *corr.w_a_given_s, g, extract_cfg);
      }
      emit(to_json(res), extract_out);
      if (!res.converged) std::cerr << "warning: extraction did not converge\n";
      return 0;
    }

    if (fig1->parsed() || ope->parsed() || constrained->parsed()) {
      const SweepArgs& args = fig1->parsed() ? fig1_args : ope->parsed() ? ope_args : constrained_args;
      const char* experiment = fig1->parsed() ? "fig1_sweep" : ope->parsed() ? "ope_compare" : "constrained";
      const ExperimentConfig cfg = args.resolve(experiment);
      if (args.dry_run) {
        std::cout << config_to_json(cfg) << '\n';
        return 0;
      }
      if (fig1->parsed()) return finish_sweep(args, run_fig1_sweep(cfg), "fig1");
      if (ope->parsed()) return finish_sweep(args, run_ope_compare(cfg), "ope");
      return finish_sweep(args, run_constrained(cfg), "constrained");
    }

    if (plot->parsed()) {
      for (const auto& path : emit_plots(plot_csv, plot_kind, plot_dir)) std::cout << "wrote " << path << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
