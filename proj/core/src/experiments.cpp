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

#include "dicekit/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string_view>
#include <thread>
#include <utility>

#include "dicekit/errors.hpp"
#include "dicekit/extraction.hpp"
#include "dicekit/metrics.hpp"
#include "dicekit/serialization.hpp"
#include "json.hpp"

namespace dicekit {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const std::set<std::string> kAlgorithms = {"optidice", "semidice", "fdvl", "odice", "sql", "xql", "extraction"};

const std::vector<double> kAlphaGrid = {0.0001, 0.001, 0.01, 0.1, 1.0, 10.0};
const std::vector<double> kBetaGrid = {0.1, 0.3, 0.5, 0.7, 0.9, 0.99};

template <class Row>
std::vector<Row> run_parallel(int n_runs, int workers, const std::function<std::vector<Row>(int)>& body) {
  std::vector<std::vector<Row>> per_run(static_cast<std::size_t>(n_runs));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < n_runs; i = next++) {
      try {
        per_run[static_cast<std::size_t>(i)] = body(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min(workers, n_runs));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<Row> rows;
  for (auto& chunk : per_run) {
    for (auto& row : chunk) rows.push_back(std::move(row));
  }
  return rows;
}

struct RunContext {
  TabularMdp mdp;
  TabularPolicy behavior;
  MleModel model;
};

RunContext make_context(const ExperimentConfig& cfg, int run) {
  RunContext ctx;
  ctx.mdp = generate_random_mdp(mdp_seed(cfg, run), cfg.mdp);
  ctx.behavior = benchmark_behavior_policy(ctx.mdp);
  const Dataset data = collect_dataset(ctx.mdp, ctx.behavior, cfg.n_trajectories, cfg.horizon, data_seed(cfg, run));
  ctx.model = build_mle_model(data, ctx.mdp.n_states, ctx.mdp.n_actions);
  return ctx;
}

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// SemiDICE solutions shared between the semidice and extraction cells of a run.
using SemidiceKey = std::pair<std::string_view, double>;
using SemidiceCache = std::map<SemidiceKey, CorrectionSet>;

double max_normalizer_gap(const Matrix& w, const MleModel& m, double target) {
  double worst = 0.0;
  for (int s = 0; s < m.n_states; ++s) {
    if (m.state_supported(s)) worst = std::max(worst, std::abs(w.row(s).dot(m.pi_D.probs.row(s)) - target));
  }
  return worst;
}

OptimizerConfig optimizer_for(const ExperimentConfig& cfg, const std::string& algorithm) {
  OptimizerConfig opt;
  opt.tol = cfg.tol;
  opt.step_size = cfg.step_size;
  opt.max_iters = cfg.max_iters;
  if (algorithm == "optidice") opt.max_iters = cfg.newton_max_iters;
  if (algorithm == "odice") opt.max_iters = cfg.odice_max_iters;
  return opt;
}

void fill_from_correction(BenchRow& row, const RunContext& ctx, const Matrix& w, const TabularPolicy& policy) {
  row.exact_return = exact_policy_value(ctx.mdp, policy, Signal::kReward).raw;
  row.viol_bf = bellman_flow_violation(w, ctx.model);
  row.viol_pc = policy_correction_violation(w, ctx.model);
  row.ope_reward = ope_estimate(w, ctx.model, ctx.model.reward_hat);
  row.ope_cost = ope_estimate(w, ctx.model, ctx.model.cost_hat);
  row.sparse_states = count_sparse_states(w, ctx.model);
}

BenchRow evaluate_cell(const ExperimentConfig& cfg, const RunContext& ctx, const AlgorithmSpec& spec,
                       double value, SemidiceCache& semidice_cache) {
  BenchRow row;
  row.algorithm = spec.name;
  row.generator = (spec.name == "sql") ? "sql_chi2" : (spec.name == "xql") ? "kl" : spec.generator;
  row.param_name = spec.param_name;
  row.param_value = value;
  const auto start = Clock::now();
  try {
    OptimizerConfig opt = optimizer_for(cfg, spec.name);
    if (spec.param_name == "alpha") opt.alpha = value;
    if (spec.param_name == "beta") opt.beta = value;
    opt.eta = spec.eta;
    const FGenerator g = make_generator(row.generator);
    const MleModel& m = ctx.model;

    auto semidice_at = [&](double alpha) -> const CorrectionSet& {
      auto it = semidice_cache.find({g.name(), alpha});
      if (it == semidice_cache.end()) {
        OptimizerConfig o = optimizer_for(cfg, "semidice");
        o.alpha = alpha;
        it = semidice_cache.emplace(SemidiceKey{g.name(), alpha}, semidice_solve(m, g, o)).first;
      }
      return it->second;
    };

    CorrectionSet corr;
    double target = 1.0;
    if (spec.name == "optidice") {
      corr = optidice_solve(m, g, opt);
    } else if (spec.name == "semidice") {
      corr = semidice_at(value);
    } else if (spec.name == "fdvl") {
      corr = fdvl_solve(m, g, value, opt);
      target = (1.0 - value) / value;
    } else if (spec.name == "odice") {
      corr = odice_solve(m, g, value, spec.eta, opt);
      target = (1.0 - value) / value;
    } else if (spec.name == "sql") {
      corr = sql_solve(m, value, opt);
    } else if (spec.name == "xql") {
      corr = xql_solve(m, value, opt);
    } else if (spec.name == "extraction") {
      const CorrectionSet& base = semidice_at(value);
      const ExtractedPolicy pol = extract_tabular_policy(base, m);
      const ExtractionResult ext =
          extract_direct(m, *base.w_a_given_s, make_generator(cfg.extraction_generator), optimizer_for(cfg, "optidice"));
      const Matrix w = marginal_correction(ext, *base.w_a_given_s);
      fill_from_correction(row, ctx, w, pol.policy);
      row.converged = base.status.converged && ext.converged;
      row.fallback_states = pol.n_fallback_states;
      row.saturated = base.status.saturated_evaluations;
      row.max_pc_state_gap = max_normalizer_gap(w, m, 1.0);
      if (cfg.record_timing) row.wall_ms = elapsed_ms(start);
      return row;
    } else {
      throw ParameterError("unknown algorithm '" + spec.name + "'");
    }
    const ExtractedPolicy pol = extract_tabular_policy(corr, m);
    const Matrix& w = corr.weights();
    fill_from_correction(row, ctx, w, pol.policy);
    row.converged = corr.status.converged;
    row.fallback_states = pol.n_fallback_states;
    row.saturated = corr.status.saturated_evaluations;
    row.max_pc_state_gap = max_normalizer_gap(w, m, target);
  } catch (const std::exception& e) {
    row.error = e.what();
    row.converged = false;
    row.exact_return = row.viol_bf = row.viol_pc = row.ope_reward = row.ope_cost = kNaN;
  }
  if (cfg.record_timing) row.wall_ms = elapsed_ms(start);
  return row;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string opt_bool(const std::optional<bool>& v) { return v ? (*v ? "1" : "0") : std::string(); }

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) {
    if (std::isfinite(x)) {
      m.mean += x;
      ++m.n;
    }
  }
  if (m.n == 0) return {kNaN, kNaN, 0};
  m.mean /= m.n;
  double ss = 0.0;
  for (double x : xs) {
    if (std::isfinite(x)) ss += (x - m.mean) * (x - m.mean);
  }
  m.std = m.n > 1 ? std::sqrt(ss / (m.n - 1)) : 0.0;
  return m;
}

json moments_json(const std::vector<double>& xs) {
  const Moments m = moments(xs);
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"mean", finite_or_null(m.mean)}, {"std", finite_or_null(m.std)}, {"n", m.n}};
}

std::string write_outputs(const ExperimentConfig& cfg, const std::string& stem, const std::string& csv,
                          const std::string& summary, ExperimentOutput& out) {
  std::filesystem::create_directories(cfg.output_dir);
  out.csv_path = (std::filesystem::path(cfg.output_dir) / (stem + ".csv")).string();
  out.summary_path = (std::filesystem::path(cfg.output_dir) / (stem + "_summary.json")).string();
  write_text_file(out.csv_path, csv);
  write_text_file(out.summary_path, summary);
  return out.csv_path;
}

}  // namespace

void ExperimentConfig::validate() const {
  static const std::set<std::string> kExperiments = {"fig1_sweep", "ope_compare", "constrained", "single_run"};
  if (!kExperiments.count(experiment)) throw ParameterError("unknown experiment '" + experiment + "'");
  if (n_runs < 1) throw ParameterError("n_runs must be at least 1");
  if (n_trajectories < 1 || horizon < 1) throw ParameterError("dataset needs positive trajectory count and horizon");
  if (workers < 1) throw ParameterError("workers must be at least 1");
  for (const auto& a : algorithms) {
    if (!kAlgorithms.count(a.name)) throw ParameterError("unknown algorithm '" + a.name + "'");
    if (a.grid.empty()) throw ParameterError("empty hyperparameter grid for '" + a.name + "'");
    if (a.param_name != "alpha" && a.param_name != "beta") throw ParameterError("param_name must be alpha or beta");
    if (a.name != "sql" && a.name != "xql") make_generator(a.generator);
  }
  make_generator(extraction_generator);
  if (ope_alphas.empty()) throw ParameterError("ope_alphas must be non-empty");
}

std::vector<AlgorithmSpec> ExperimentConfig::default_fig1_algorithms() {
  return {
      {"optidice", "chi2", "alpha", kAlphaGrid, 1.0},
      {"semidice", "chi2", "alpha", kAlphaGrid, 1.0},
      {"extraction", "chi2", "alpha", kAlphaGrid, 1.0},
      {"sql", "sql_chi2", "alpha", kAlphaGrid, 1.0},
      {"xql", "kl", "alpha", kAlphaGrid, 1.0},
      {"fdvl", "chi2", "beta", kBetaGrid, 1.0},
      {"odice", "chi2", "beta", kBetaGrid, 1.0},
  };
}

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    throw ParseError(e.what(), 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n')));
  }
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  ExperimentConfig c;
  try {
    c.experiment = j.value("experiment", c.experiment);
    c.n_runs = j.value("n_runs", c.n_runs);
    c.base_seed = j.value("base_seed", c.base_seed);
    if (j.contains("mdp")) {
      const json& m = j.at("mdp");
      c.mdp.n_states = m.value("n_states", c.mdp.n_states);
      c.mdp.n_actions = m.value("n_actions", c.mdp.n_actions);
      c.mdp.n_successors = m.value("n_successors", c.mdp.n_successors);
      c.mdp.gamma = m.value("gamma", c.mdp.gamma);
    }
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      c.n_trajectories = d.value("n_trajectories", c.n_trajectories);
      c.horizon = d.value("horizon", c.horizon);
    }
    if (j.contains("algorithms")) {
      for (const json& a : j.at("algorithms")) {
        AlgorithmSpec spec;
        spec.name = a.at("name").get<std::string>();
        spec.generator = a.value("generator", std::string(spec.name == "sql" ? "sql_chi2" : spec.name == "xql" ? "kl" : "chi2"));
        spec.eta = a.value("eta", 1.0);
        if (a.contains("alpha")) {
          spec.param_name = "alpha";
          spec.grid = a.at("alpha").get<std::vector<double>>();
        } else if (a.contains("beta")) {
          spec.param_name = "beta";
          spec.grid = a.at("beta").get<std::vector<double>>();
        } else {
          const bool beta = spec.name == "fdvl" || spec.name == "odice";
          spec.param_name = beta ? "beta" : "alpha";
          spec.grid = beta ? kBetaGrid : kAlphaGrid;
        }
        c.algorithms.push_back(std::move(spec));
      }
    }
    c.extraction_generator = j.value("extraction_generator", c.extraction_generator);
    if (j.contains("optimizer")) {
      const json& o = j.at("optimizer");
      c.tol = o.value("tol", c.tol);
      c.max_iters = o.value("max_iters", c.max_iters);
      c.newton_max_iters = o.value("newton_max_iters", c.newton_max_iters);
      c.odice_max_iters = o.value("odice_max_iters", c.odice_max_iters);
      c.step_size = o.value("step_size", c.step_size);
    }
    c.ope_alphas = j.value("ope_alphas", c.ope_alphas);
    if (j.contains("cost")) {
      const json& k = j.at("cost");
      c.n_cost_states = k.value("n_cost_states", c.n_cost_states);
      c.cost_value = k.value("cost_value", c.cost_value);
      c.budget_fraction = k.value("budget_fraction", c.budget_fraction);
      c.constrained_alpha = k.value("alpha", c.constrained_alpha);
      c.lagrange.learning_rate = k.value("learning_rate", c.lagrange.learning_rate);
      c.lagrange.lambda_max = k.value("lambda_max", c.lagrange.lambda_max);
      c.lagrange.outer_iters = k.value("outer_iters", c.lagrange.outer_iters);
      c.lagrange.feasibility_slack = k.value("feasibility_slack", c.lagrange.feasibility_slack);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.workers = j.value("workers", c.workers);
    c.record_timing = j.value("record_timing", c.record_timing);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (c.algorithms.empty()) c.algorithms = ExperimentConfig::default_fig1_algorithms();
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json algos = json::array();
  for (const auto& a : c.algorithms) {
    algos.push_back(json{{"name", a.name}, {"generator", a.generator}, {a.param_name, a.grid}, {"eta", a.eta}});
  }
  const json j = {
      {"experiment", c.experiment},
      {"n_runs", c.n_runs},
      {"base_seed", c.base_seed},
      {"mdp", {{"n_states", c.mdp.n_states}, {"n_actions", c.mdp.n_actions}, {"n_successors", c.mdp.n_successors}, {"gamma", c.mdp.gamma}}},
      {"dataset", {{"n_trajectories", c.n_trajectories}, {"horizon", c.horizon}}},
      {"algorithms", algos},
      {"extraction_generator", c.extraction_generator},
      {"optimizer", {{"tol", c.tol}, {"max_iters", c.max_iters}, {"newton_max_iters", c.newton_max_iters},
                     {"odice_max_iters", c.odice_max_iters}, {"step_size", c.step_size}}},
      {"ope_alphas", c.ope_alphas},
      {"cost", {{"n_cost_states", c.n_cost_states}, {"cost_value", c.cost_value}, {"budget_fraction", c.budget_fraction},
                {"alpha", c.constrained_alpha}, {"learning_rate", c.lagrange.learning_rate},
                {"lambda_max", c.lagrange.lambda_max}, {"outer_iters", c.lagrange.outer_iters},
                {"feasibility_slack", c.lagrange.feasibility_slack}}},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
      {"record_timing", c.record_timing},
  };
  return j.dump(2);
}

int workers_from_env(int fallback) {
  const char* raw = std::getenv("DICEKIT_WORKERS");
  if (raw == nullptr || *raw == '\0') return fallback;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 1 || v > 1024) return fallback;
  return static_cast<int>(v);
}

std::uint64_t mdp_seed(const ExperimentConfig& cfg, int run) { return cfg.base_seed + static_cast<std::uint64_t>(run); }

std::uint64_t data_seed(const ExperimentConfig& cfg, int run) {
  return cfg.base_seed + static_cast<std::uint64_t>(run) + 1000000ULL;
}

std::vector<BenchRow> fig1_single_run(const ExperimentConfig& cfg, int run) {
  const RunContext ctx = make_context(cfg, run);
  SemidiceCache cache;
  std::vector<BenchRow> rows;
  for (const auto& spec : cfg.algorithms) {
    for (double v : spec.grid) {
      BenchRow row = evaluate_cell(cfg, ctx, spec, v, cache);
      row.run = run;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<BenchRow> fig1_rows(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_parallel<BenchRow>(cfg.n_runs, cfg.workers, [&](int run) { return fig1_single_run(cfg, run); });
}

std::vector<OpeRow> ope_rows(const ExperimentConfig& cfg) {
  cfg.validate();
  const FGenerator chi2(FGenerator::Kind::kChi2);
  const FGenerator g_state = make_generator(cfg.extraction_generator);
  return run_parallel<OpeRow>(cfg.n_runs, cfg.workers, [&](int run) {
    const RunContext ctx = make_context(cfg, run);
    const MleModel& m = ctx.model;
    const TabularMdp mle = m.as_mdp();
    std::vector<OpeRow> rows;
    for (double alpha : cfg.ope_alphas) {
      auto make_row = [&](const char* estimator) {
        OpeRow r;
        r.run = run;
        r.alpha = alpha;
        r.estimator = estimator;
        return r;
      };
      OpeRow raw = make_row("raw_correction");
      OpeRow ext = make_row("extraction");
      OpeRow beh = make_row("behavior");
      try {
        OptimizerConfig opt = optimizer_for(cfg, "semidice");
        opt.alpha = alpha;
        const CorrectionSet corr = semidice_solve(m, chi2, opt);
        const TabularPolicy pi = extract_tabular_policy(corr, m).policy;
        const double exact_mle = exact_policy_value(mle, pi, m.reward_hat).normalized;
        const double exact_true = exact_policy_value(ctx.mdp, pi, Signal::kReward).normalized;
        const Matrix& w = *corr.w_a_given_s;

        raw.estimate = ope_estimate(w, m, m.reward_hat);
        raw.viol_bf = bellman_flow_violation(w, m);
        raw.converged = corr.status.converged;

        const ExtractionResult res = extract_direct(m, w, g_state, optimizer_for(cfg, "optidice"));
        const Matrix w_sa = marginal_correction(res, w);
        ext.estimate = ope_estimate(w_sa, m, m.reward_hat);
        ext.viol_bf = res.viol_bellman_flow;
        ext.converged = corr.status.converged && res.converged;
        for (OpeRow* r : {&raw, &ext}) {
          r->exact_mle = exact_mle;
          r->exact_true = exact_true;
        }

        const Matrix ones = Matrix::Ones(m.n_states, m.n_actions);
        beh.estimate = ope_estimate(ones, m, m.reward_hat);
        beh.exact_mle = exact_policy_value(mle, m.pi_D, m.reward_hat).normalized;
        beh.exact_true = exact_policy_value(ctx.mdp, ctx.behavior, Signal::kReward).normalized;
        beh.viol_bf = bellman_flow_violation(ones, m);
        beh.converged = true;
      } catch (const std::exception& e) {
        for (OpeRow* r : {&raw, &ext, &beh}) {
          r->error = e.what();
          r->converged = false;
          r->estimate = r->exact_mle = r->exact_true = r->viol_bf = kNaN;
        }
      }
      rows.push_back(std::move(raw));
      rows.push_back(std::move(ext));
      rows.push_back(std::move(beh));
    }
    return rows;
  });
}

std::vector<ConstrainedRow> constrained_rows(const ExperimentConfig& cfg) {
  cfg.validate();
  InstanceParams params;
  params.mdp = cfg.mdp;
  params.n_trajectories = cfg.n_trajectories;
  params.horizon = cfg.horizon;
  params.n_cost_states = cfg.n_cost_states;
  params.cost_value = cfg.cost_value;
  params.alpha = cfg.constrained_alpha;
  params.budget_fraction = cfg.budget_fraction;
  const FGenerator chi2(FGenerator::Kind::kChi2);
  const FGenerator g_state = make_generator(cfg.extraction_generator);
  return run_parallel<ConstrainedRow>(cfg.n_runs, cfg.workers, [&](int run) {
    std::vector<ConstrainedRow> rows;
    const ConstrainedInstance inst = make_constrained_instance(mdp_seed(cfg, run), data_seed(cfg, run), params);
    for (const char* name : {"corsdice", "coptidice", "naive_semidice"}) {
      ConstrainedRow row;
      row.run = run;
      row.algorithm = name;
      row.binding = inst.binding;
      row.c_tilde = inst.spec.c_tilde;
      const auto start = Clock::now();
      try {
        OptimizerConfig opt = optimizer_for(cfg, "semidice");
        opt.alpha = cfg.constrained_alpha;
        ConstrainedResult res;
        if (row.algorithm == "corsdice") {
          res = corsdice_solve(inst.model, chi2, g_state, inst.spec, opt, cfg.lagrange);
        } else if (row.algorithm == "coptidice") {
          opt.max_iters = cfg.newton_max_iters;
          res = coptidice_solve(inst.model, chi2, inst.spec, opt, cfg.lagrange);
        } else {
          res = naive_constrained_semidice(inst.model, chi2, inst.spec, opt, cfg.lagrange);
        }
        row.lambda = res.lambda_cost;
        row.estimated_cost = res.estimated_cost;
        row.exact_cost = res.exact_cost;
        row.exact_return = res.exact_return;
        row.true_cost = exact_policy_value(inst.mdp, res.policy, Signal::kCost).normalized;
        row.true_return = exact_policy_value(inst.mdp, res.policy, Signal::kReward).normalized;
        row.feasible = res.feasible;
        row.converged = res.converged;
      } catch (const std::exception& e) {
        row.error = e.what();
        row.lambda = row.estimated_cost = row.exact_cost = row.exact_return = row.true_cost = row.true_return = kNaN;
      }
      if (cfg.record_timing) row.wall_ms = elapsed_ms(start);
      rows.push_back(std::move(row));
    }
    return rows;
  });
}

std::string fig1_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "run,algorithm,generator,param_name,param_value,exact_return,viol_bf,viol_pc,ope_reward,ope_cost,lambda,"
         "feasible,converged,wall_ms\n";
  for (const auto& r : rows) {
    out << r.run << ',' << r.algorithm << ',' << r.generator << ',' << r.param_name << ',' << num(r.param_value) << ','
        << num(r.exact_return) << ',' << num(r.viol_bf) << ',' << num(r.viol_pc) << ',' << num(r.ope_reward) << ','
        << num(r.ope_cost) << ',' << opt_num(r.lambda) << ',' << opt_bool(r.feasible) << ',' << (r.converged ? 1 : 0)
        << ',' << num(r.wall_ms) << '\n';
  }
  return out.str();
}

std::string ope_csv(const std::vector<OpeRow>& rows) {
  std::ostringstream out;
  out << "run,estimator,alpha,estimate,exact_mle,exact_true,viol_bf,converged\n";
  for (const auto& r : rows) {
    out << r.run << ',' << r.estimator << ',' << num(r.alpha) << ',' << num(r.estimate) << ',' << num(r.exact_mle)
        << ',' << num(r.exact_true) << ',' << num(r.viol_bf) << ',' << (r.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string constrained_csv(const std::vector<ConstrainedRow>& rows) {
  std::ostringstream out;
  out << "run,algorithm,binding,c_tilde,lambda,estimated_cost,exact_cost,exact_return,true_cost,true_return,feasible,"
         "converged,wall_ms\n";
  for (const auto& r : rows) {
    out << r.run << ',' << r.algorithm << ',' << (r.binding ? 1 : 0) << ',' << num(r.c_tilde) << ',' << num(r.lambda)
        << ',' << num(r.estimated_cost) << ',' << num(r.exact_cost) << ',' << num(r.exact_return) << ','
        << num(r.true_cost) << ',' << num(r.true_return) << ',' << (r.feasible ? 1 : 0) << ','
        << (r.converged ? 1 : 0) << ',' << num(r.wall_ms) << '\n';
  }
  return out.str();
}

std::string fig1_summary_json(const std::vector<BenchRow>& rows) {
  struct Cell {
    std::vector<double> ret, bf, pc, ope;
    int failed = 0;
    int saturated = 0;
    int fallback = 0;
  };
  std::vector<std::tuple<std::string, std::string, std::string, double>> order;
  std::map<std::tuple<std::string, std::string, std::string, double>, Cell> cells;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.algorithm, r.generator, r.param_name, r.param_value);
    if (!cells.count(key)) order.push_back(key);
    Cell& c = cells[key];
    c.ret.push_back(r.exact_return);
    c.bf.push_back(r.viol_bf);
    c.pc.push_back(r.viol_pc);
    c.ope.push_back(r.ope_reward);
    if (!r.error.empty() || !r.converged) ++c.failed;
    if (r.saturated > 0) ++c.saturated;
    if (r.fallback_states > 0) ++c.fallback;
  }
  json out = {{"schema", "dicekit.fig1_summary"}, {"version", kSchemaVersion}};
  json arr = json::array();
  for (const auto& key : order) {
    const Cell& c = cells.at(key);
    arr.push_back(json{{"algorithm", std::get<0>(key)},
                       {"generator", std::get<1>(key)},
                       {"param_name", std::get<2>(key)},
                       {"param_value", std::get<3>(key)},
                       {"exact_return", moments_json(c.ret)},
                       {"viol_bf", moments_json(c.bf)},
                       {"viol_pc", moments_json(c.pc)},
                       {"ope_reward", moments_json(c.ope)},
                       {"n_failed", c.failed},
                       {"n_saturated", c.saturated},
                       {"n_fallback", c.fallback}});
  }
  out["cells"] = std::move(arr);
  return out.dump(2);
}

std::string ope_summary_json(const std::vector<OpeRow>& rows) {
  std::vector<std::pair<std::string, double>> order;
  std::map<std::pair<std::string, double>, std::pair<std::vector<std::pair<double, double>>, std::vector<std::pair<double, double>>>> groups;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : rows) {
    if (!std::isfinite(r.estimate)) continue;
    const auto key = std::make_pair(r.estimator, r.alpha);
    if (!groups.count(key)) order.push_back(key);
    groups[key].first.emplace_back(r.estimate, r.exact_mle);
    groups[key].second.emplace_back(r.estimate, r.exact_true);
    if (r.estimator != "behavior") {
      lo = std::min(lo, r.exact_mle);
      hi = std::max(hi, r.exact_mle);
    }
  }
  json arr = json::array();
  for (const auto& key : order) {
    const auto& g = groups.at(key);
    arr.push_back(json{{"estimator", key.first},
                       {"alpha", key.second},
                       {"n", g.first.size()},
                       {"rmse_mle", ope_rmse(g.first)},
                       {"rmse_true", ope_rmse(g.second)}});
  }
  json out = {{"schema", "dicekit.ope_summary"}, {"version", kSchemaVersion}, {"estimators", arr}};
  out["rho_range"] = std::isfinite(hi - lo) ? json(hi - lo) : json(nullptr);
  return out.dump(2);
}

std::string constrained_summary_json(const std::vector<ConstrainedRow>& rows) {
  struct Agg {
    int n = 0, feasible = 0, failed = 0;
    std::vector<double> ret_feasible, gap;
  };
  std::vector<std::string> order;
  std::map<std::string, Agg> aggs;
  int binding = 0;
  std::set<int> runs;
  for (const auto& r : rows) {
    if (runs.insert(r.run).second && r.binding) ++binding;
    if (!r.binding) continue;
    if (!aggs.count(r.algorithm)) order.push_back(r.algorithm);
    Agg& a = aggs[r.algorithm];
    ++a.n;
    if (!r.error.empty() || !r.converged) ++a.failed;
    if (r.feasible) {
      ++a.feasible;
      a.ret_feasible.push_back(r.exact_return);
    }
    a.gap.push_back(std::abs(r.estimated_cost - r.exact_cost));
  }
  json arr = json::array();
  for (const auto& name : order) {
    const Agg& a = aggs.at(name);
    std::vector<double> gaps = a.gap;
    std::sort(gaps.begin(), gaps.end());
    const double median = gaps.empty() ? kNaN : (gaps.size() % 2 ? gaps[gaps.size() / 2]
                                                                  : 0.5 * (gaps[gaps.size() / 2 - 1] + gaps[gaps.size() / 2]));
    arr.push_back(json{{"algorithm", name},
                       {"n_binding", a.n},
                       {"feasibility_rate", a.n ? static_cast<double>(a.feasible) / a.n : 0.0},
                       {"return_among_feasible", moments_json(a.ret_feasible)},
                       {"median_cost_gap", std::isfinite(median) ? json(median) : json(nullptr)},
                       {"n_failed", a.failed}});
  }
  return json{{"schema", "dicekit.constrained_summary"}, {"version", kSchemaVersion}, {"n_runs", runs.size()},
              {"n_binding", binding}, {"algorithms", arr}}
      .dump(2);
}

ExperimentOutput run_fig1_sweep(const ExperimentConfig& cfg) {
  const auto rows = fig1_rows(cfg);
  ExperimentOutput out;
  out.n_rows = static_cast<int>(rows.size());
  for (const auto& r : rows) out.n_failed += (!r.error.empty() || !r.converged) ? 1 : 0;
  write_outputs(cfg, "fig1", fig1_csv(rows), fig1_summary_json(rows), out);
  return out;
}

ExperimentOutput run_ope_compare(const ExperimentConfig& cfg) {
  const auto rows = ope_rows(cfg);
  ExperimentOutput out;
  out.n_rows = static_cast<int>(rows.size());
  for (const auto& r : rows) out.n_failed += (!r.error.empty() || !r.converged) ? 1 : 0;
  write_outputs(cfg, "ope", ope_csv(rows), ope_summary_json(rows), out);
  return out;
}

ExperimentOutput run_constrained(const ExperimentConfig& cfg) {
  const auto rows = constrained_rows(cfg);
  ExperimentOutput out;
  out.n_rows = static_cast<int>(rows.size());
  for (const auto& r : rows) out.n_failed += (!r.error.empty() || !r.converged) ? 1 : 0;
  write_outputs(cfg, "constrained", constrained_csv(rows), constrained_summary_json(rows), out);
  return out;
}

}  // namespace dicekit
