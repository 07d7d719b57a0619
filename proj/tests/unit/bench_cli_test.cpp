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
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "dicekit/errors.hpp"
#include "dicekit/experiments.hpp"
#include "dicekit/metrics.hpp"
#include "dicekit/serialization.hpp"
#include "test_support.hpp"

using namespace dicekit;
namespace fs = std::filesystem;

namespace {

const std::string kGolden = DICEKIT_GOLDEN_DIR;

ExperimentConfig mini_config() {
  return config_from_json(read_text_file(kGolden + "/mini_fig1.json"));
}

ExperimentConfig small_config(const std::string& experiment, int runs) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.n_runs = runs;
  c.mdp.n_states = 10;
  c.mdp.n_actions = 3;
  c.n_trajectories = 10;
  c.horizon = 50;
  c.algorithms = {{"semidice", "chi2", "alpha", {0.01, 0.1}, 1.0}, {"extraction", "chi2", "alpha", {0.01}, 1.0}};
  return c;
}

// Minimal well-formedness check: balanced, properly nested tags with quoted attributes.
bool well_formed_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool seen_root = false;
  while ((i = text.find('<', i)) != std::string::npos) {
    if (text.compare(i, 4, "<!--") == 0) {
      const std::size_t end = text.find("-->", i);
      if (end == std::string::npos) return false;
      i = end + 3;
      continue;
    }
    const std::size_t end = text.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty()) {
      if (seen_root) return false;
      seen_root = true;
    }
    if (!self_closing) stack.push_back(name);
  }
  return seen_root && stack.empty();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dicekit_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0, end;
  while ((end = text.find('\n', start)) != std::string::npos) {
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

TEST_SUITE("bench_cli") {

TEST_CASE("default configuration matches the benchmark protocol") {
  const ExperimentConfig c;
  CHECK(c.n_runs == 300);
  CHECK(c.mdp.n_states == 30);
  CHECK(c.mdp.n_actions == 4);
  CHECK(c.mdp.n_successors == 4);
  CHECK(c.mdp.gamma == 0.95);
  CHECK(c.n_trajectories == 30);
  const auto algos = ExperimentConfig::default_fig1_algorithms();
  std::map<std::string, std::vector<double>> grids;
  for (const auto& a : algos) grids[a.name] = a.grid;
  CHECK(grids["semidice"] == std::vector<double>{0.0001, 0.001, 0.01, 0.1, 1.0, 10.0});
  CHECK(grids["odice"] == std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9, 0.99});
  for (const auto& a : algos) {
    if (a.name == "odice") CHECK(a.eta == 1.0);
  }
}

TEST_CASE("config JSON round trip and errors") {
  const ExperimentConfig c = mini_config();
  CHECK(c.n_runs == 2);
  CHECK(c.base_seed == 7u);
  CHECK(c.mdp.n_states == 8);
  REQUIRE(c.algorithms.size() == 7u);
  CHECK(c.algorithms[5].param_name == "beta");
  CHECK(c.algorithms[3].generator == "sql_chi2");
  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));

  try {
    config_from_json("{\n  \"n_runs\": 2,\n  \"mdp\": {\n    \"n_states\": 5,,\n  }\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).rfind("line 4: ", 0) == 0);
  }
  CHECK_THROWS_AS(config_from_json("[1, 2]"), ParseError);
  CHECK_THROWS_AS(config_from_json("{\"n_runs\": \"many\"}"), ParseError);
  CHECK_THROWS_AS(config_from_json("{\"n_runs\": 0}"), ParameterError);
  CHECK_THROWS_AS(config_from_json("{\"algorithms\": [{\"name\": \"dqn\"}]}"), ParameterError);
  CHECK_THROWS_AS(config_from_json("{\"algorithms\": [{\"name\": \"semidice\", \"alpha\": []}]}"), ParameterError);
}

TEST_CASE("seed derivation and worker count") {
  ExperimentConfig c;
  c.base_seed = 100;
  CHECK(mdp_seed(c, 3) == 103u);
  CHECK(data_seed(c, 3) == 1000103u);
  setenv("DICEKIT_WORKERS", "3", 1);
  CHECK(workers_from_env() == 3);
  unsetenv("DICEKIT_WORKERS");
  CHECK(workers_from_env(2) == 2);
}

TEST_CASE("single run with one algorithm yields one row per hyperparameter") {
  ExperimentConfig c = small_config("fig1_sweep", 1);
  c.algorithms = {{"xql", "kl", "alpha", {0.01, 0.1, 1.0}, 1.0}};
  const auto rows = fig1_rows(c);
  REQUIRE(rows.size() == 3u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].run == 0);
    CHECK(rows[i].param_value == c.algorithms[0].grid[i]);
    CHECK(rows[i].converged);
    CHECK(rows[i].error.empty());
  }
  const auto csv = lines(fig1_csv(rows));
  CHECK(csv.front() ==
        "run,algorithm,generator,param_name,param_value,exact_return,viol_bf,viol_pc,ope_reward,ope_cost,lambda,"
        "feasible,converged,wall_ms");
  CHECK(csv.size() == 4u);
}

TEST_CASE("miniature sweep matches the golden CSV") {
  const ExperimentConfig c = mini_config();
  const std::string csv = fig1_csv(fig1_rows(c));
  CHECK(csv == read_text_file(kGolden + "/mini_fig1.csv"));
}

TEST_CASE("outputs are identical across reruns and worker counts") {
  for (const char* experiment : {"fig1_sweep", "ope_compare", "constrained"}) {
    CAPTURE(experiment);
    ExperimentConfig c = small_config(experiment, 3);
    c.lagrange.outer_iters = 20;
    auto render = [&](int workers) {
      c.workers = workers;
      if (c.experiment == "fig1_sweep") return fig1_csv(fig1_rows(c));
      if (c.experiment == "ope_compare") return ope_csv(ope_rows(c));
      return constrained_csv(constrained_rows(c));
    };
    const std::string one = render(1);
    CHECK(one == render(1));
    CHECK(one == render(3));
  }
}

TEST_CASE("a diverging cell is flagged and the sweep completes") {
  ExperimentConfig c = small_config("fig1_sweep", 2);
  c.step_size = 1e6;  // blows up the first-order ODICE iteration
  c.odice_max_iters = 50;
  c.algorithms.push_back({"odice", "chi2", "beta", {0.5}, 1.0});
  const auto rows = fig1_rows(c);
  REQUIRE(rows.size() == 2u * 4u);
  int flagged = 0, healthy = 0;
  for (const auto& r : rows) {
    if (r.algorithm == "odice") {
      flagged += !r.converged;
    } else {
      healthy += r.converged && r.error.empty();
    }
  }
  CHECK(flagged == 2);
  CHECK(healthy == 6);
}

TEST_CASE("sweep writes CSV and summary files") {
  ExperimentConfig c = small_config("fig1_sweep", 1);
  c.output_dir = scratch_dir("sweep").string();
  const ExperimentOutput out = run_fig1_sweep(c);
  CHECK(out.n_rows == 3);
  CHECK(out.n_failed == 0);
  CHECK(fs::exists(out.csv_path));
  const std::string summary = read_text_file(out.summary_path);
  CHECK(summary.find("semidice") != std::string::npos);
  CHECK_THROWS_AS(read_text_file((fs::path(c.output_dir) / "missing.csv").string()), InputError);
}

TEST_CASE("OPE comparison favors extraction") {
  ExperimentConfig c = small_config("ope_compare", 6);
  const auto rows = ope_rows(c);
  REQUIRE(rows.size() == 18u);
  std::map<std::string, std::vector<std::pair<double, double>>> pairs;
  double recomputed_behavior = 0.0;
  for (const auto& r : rows) {
    CHECK(r.error.empty());
    pairs[r.estimator].emplace_back(r.estimate, r.exact_mle);
    if (r.estimator == "behavior") recomputed_behavior += (r.estimate - r.exact_mle) * (r.estimate - r.exact_mle);
  }
  CHECK(ope_rmse(pairs["extraction"]) < ope_rmse(pairs["raw_correction"]));
  CHECK(ope_rmse(pairs["behavior"]) == doctest::Approx(std::sqrt(recomputed_behavior / 6.0)).epsilon(1e-12));
  const std::string summary = ope_summary_json(rows);
  CHECK(summary.find("extraction") != std::string::npos);
}

TEST_CASE("zero-cost constrained runs are trivially feasible") {
  ExperimentConfig c = small_config("constrained", 2);
  c.n_cost_states = 0;
  c.lagrange.outer_iters = 5;
  const auto rows = constrained_rows(c);
  REQUIRE(rows.size() == 6u);
  for (const auto& r : rows) {
    CAPTURE(r.algorithm);
    CHECK(r.feasible);
    CHECK(r.lambda == 0.0);
    CHECK_FALSE(r.binding);
  }
}

TEST_CASE("plots") {
  const fs::path dir = scratch_dir("plots");
  SUBCASE("fig1 panels") {
    const std::string csv = (dir / "fig1.csv").string();
    write_text_file(csv, read_text_file(kGolden + "/mini_fig1.csv"));
    const auto files = emit_plots(csv, "fig1", dir.string());
    REQUIRE(files.size() == 3u);
    for (const auto& f : files) CHECK(well_formed_xml(read_text_file(f)));
  }
  SUBCASE("header only") {
    const std::string csv = (dir / "empty.csv").string();
    write_text_file(csv, fig1_csv({}));
    const auto files = emit_plots(csv, "fig1", dir.string());
    REQUIRE(files.size() == 3u);
    for (const auto& f : files) CHECK(well_formed_xml(read_text_file(f)));
  }
  SUBCASE("other experiments") {
    ExperimentConfig c = small_config("ope_compare", 2);
    const std::string ope = (dir / "ope.csv").string();
    write_text_file(ope, ope_csv(ope_rows(c)));
    for (const auto& f : emit_plots(ope, "ope", dir.string())) CHECK(well_formed_xml(read_text_file(f)));
    c.experiment = "constrained";
    c.lagrange.outer_iters = 10;
    const std::string con = (dir / "constrained.csv").string();
    write_text_file(con, constrained_csv(constrained_rows(c)));
    for (const auto& f : emit_plots(con, "constrained", dir.string())) CHECK(well_formed_xml(read_text_file(f)));
  }
  SUBCASE("malformed CSV names the line") {
    const std::string csv = (dir / "bad.csv").string();
    std::string text = read_text_file(kGolden + "/mini_fig1.csv");
    const auto rows = lines(text);
    text = rows[0] + "\n" + rows[1] + "\n" + "0,semidice,chi2\n";
    write_text_file(csv, text);
    try {
      emit_plots(csv, "fig1", dir.string());
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  CHECK(well_formed_xml("<svg><g/><text x=\"1\">a</text></svg>"));
  CHECK_FALSE(well_formed_xml("<svg><g></svg>"));
}

TEST_CASE("MDP, dataset and model documents round trip") {
  const auto in = testing::make_instance(3, 6, 2, 4, 10);
  const TabularMdp mdp = mdp_from_json(to_json(in.mdp));
  CHECK(mdp.transition == in.mdp.transition);
  CHECK(mdp.reward == in.mdp.reward);
  CHECK(mdp.p0 == in.mdp.p0);
  CHECK(mdp.gamma == in.mdp.gamma);
  const Dataset data = dataset_from_json(to_json(in.data));
  CHECK(to_json(data) == to_json(in.data));
  const MleModel model = model_from_json(to_json(in.model));
  CHECK(model.d_D == in.model.d_D);
  CHECK(model.transition_hat == in.model.transition_hat);
  CHECK(to_json(policy_from_json(to_json(in.behavior))) == to_json(in.behavior));

  const std::string text = to_json(in.mdp);
  for (const char* field : {"\"n_states\"", "\"n_actions\"", "\"transition\"", "\"reward\"", "\"cost\"", "\"p0\"", "\"gamma\""}) {
    CHECK(text.find(field) != std::string::npos);
  }
  try {
    mdp_from_json("{\n\"schema\": \"dicekit.mdp\",\n\"version\": 1,\n\"n_states\": [\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 5);
  }
  CHECK_THROWS_AS(dataset_from_json(text), ParseError);
}

}  // TEST_SUITE
