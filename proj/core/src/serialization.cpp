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

#include "dicekit/serialization.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "dicekit/errors.hpp"
#include "json.hpp"

namespace dicekit {
namespace {

using nlohmann::json;

json header(const char* type) {
  return json{{"schema", std::string("dicekit.") + type}, {"version", kSchemaVersion}};
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json bool_matrix_json(const BoolMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(static_cast<bool>(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

// (S*A) x S  ->  [s][a][s'].
json tensor_json(const Matrix& t, int n_states, int n_actions) {
  json out = json::array();
  for (int s = 0; s < n_states; ++s) {
    json per_action = json::array();
    for (int a = 0; a < n_actions; ++a) {
      json row = json::array();
      for (int sn = 0; sn < t.cols(); ++sn) row.push_back(t(static_cast<Eigen::Index>(s) * n_actions + a, sn));
      per_action.push_back(std::move(row));
    }
    out.push_back(std::move(per_action));
  }
  return out;
}

json parse(std::string_view text, const char* type) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // byte offset -> line number
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    throw ParseError(e.what(), line);
  }
  const std::string expected = std::string("dicekit.") + type;
  if (!doc.is_object() || doc.value("schema", std::string()) != expected) {
    throw ParseError("expected a document with schema '" + expected + "'");
  }
  if (doc.value("version", -1) != kSchemaVersion) {
    throw ParseError("unsupported " + expected + " version");
  }
  return doc;
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

Matrix matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ParseError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

Vector vector_from(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

BoolMatrix bool_matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  BoolMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ParseError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<bool>();
  }
  return m;
}

Matrix tensor_from(const json& j, int n_states, int n_actions) {
  if (static_cast<int>(j.size()) != n_states) throw ParseError("transition tensor has the wrong state count");
  Matrix t(static_cast<Eigen::Index>(n_states) * n_actions, n_states);
  for (int s = 0; s < n_states; ++s) {
    const json& per_action = j.at(static_cast<std::size_t>(s));
    if (static_cast<int>(per_action.size()) != n_actions) throw ParseError("transition tensor has the wrong action count");
    for (int a = 0; a < n_actions; ++a) {
      const json& row = per_action.at(static_cast<std::size_t>(a));
      if (static_cast<int>(row.size()) != n_states) throw ParseError("transition row has the wrong length");
      for (int sn = 0; sn < n_states; ++sn) {
        t(static_cast<Eigen::Index>(s) * n_actions + a, sn) = row.at(static_cast<std::size_t>(sn)).get<double>();
      }
    }
  }
  return t;
}

json convergence_json(const Convergence& c) {
  return json{{"converged", c.converged},
              {"iterations", c.iterations},
              {"final_residual", c.final_residual},
              {"saturated_evaluations", c.saturated_evaluations},
              {"message", c.message}};
}

json extraction_json(const ExtractionResult& r) {
  json j = header("extraction");
  j["w_s"] = vector_json(r.w_s);
  j["mu"] = vector_json(r.mu);
  j["a_approx"] = r.a_approx ? vector_json(*r.a_approx) : json(nullptr);
  json mask = json::array();
  for (Eigen::Index i = 0; i < r.state_mask.size(); ++i) mask.push_back(static_cast<bool>(r.state_mask(i)));
  j["state_mask"] = std::move(mask);
  j["viol_bellman_flow"] = r.viol_bellman_flow;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["final_grad_norm"] = r.final_grad_norm;
  j["gap_to_exact"] = r.gap_to_exact ? json(*r.gap_to_exact) : json(nullptr);
  return j;
}

json correction_json(const CorrectionSet& c) {
  json j = header("correction");
  j["kind"] = std::string(kind_name(c.kind));
  j["w_sa"] = c.w_sa ? matrix_json(*c.w_sa) : json(nullptr);
  j["w_a_given_s"] = c.w_a_given_s ? matrix_json(*c.w_a_given_s) : json(nullptr);
  j["w_s"] = c.w_s ? vector_json(*c.w_s) : json(nullptr);
  j["nu"] = vector_json(c.nu);
  j["q"] = c.q ? matrix_json(*c.q) : json(nullptr);
  j["mu"] = c.mu ? vector_json(*c.mu) : json(nullptr);
  j["a_approx"] = c.a_approx ? vector_json(*c.a_approx) : json(nullptr);
  j["lambda_cost"] = c.lambda_cost ? json(*c.lambda_cost) : json(nullptr);
  j["status"] = convergence_json(c.status);
  return j;
}

}  // namespace

std::string to_json(const TabularMdp& mdp) {
  json j = header("mdp");
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["transition"] = tensor_json(mdp.transition, mdp.n_states, mdp.n_actions);
  j["reward"] = matrix_json(mdp.reward);
  j["cost"] = matrix_json(mdp.cost);
  j["p0"] = vector_json(mdp.p0);
  j["gamma"] = mdp.gamma;
  return j.dump(1);
}

std::string to_json(const TabularPolicy& policy) {
  json j = header("policy");
  j["probs"] = matrix_json(policy.probs);
  return j.dump(1);
}

std::string to_json(const Dataset& d) {
  json j = header("dataset");
  j["n_states"] = d.n_states;
  j["n_actions"] = d.n_actions;
  j["gamma"] = d.gamma;
  j["n_trajectories"] = d.n_trajectories;
  j["horizon"] = d.horizon;
  json records = json::array();
  for (const auto& t : d.transitions) {
    records.push_back(json::array({t.s, t.a, t.r, t.c, t.s_next, t.t, t.episode}));
  }
  j["record_fields"] = json::array({"s", "a", "r", "c", "s_next", "t", "episode"});
  j["transitions"] = std::move(records);
  return j.dump();
}

std::string to_json(const MleModel& m) {
  json j = header("mle_model");
  j["n_states"] = m.n_states;
  j["n_actions"] = m.n_actions;
  j["gamma"] = m.gamma;
  j["transition_hat"] = tensor_json(m.transition_hat, m.n_states, m.n_actions);
  j["reward_hat"] = matrix_json(m.reward_hat);
  j["cost_hat"] = matrix_json(m.cost_hat);
  j["d_D"] = matrix_json(m.d_D);
  j["d_D_state"] = vector_json(m.d_D_state);
  j["pi_D"] = matrix_json(m.pi_D.probs);
  j["p0_hat"] = vector_json(m.p0_hat);
  j["support_mask"] = bool_matrix_json(m.support_mask);
  return j.dump(1);
}

std::string to_json(const CorrectionSet& c) { return correction_json(c).dump(1); }

std::string to_json(const SolveReport& r) {
  json j = header("solve_report");
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["final_grad_norm"] = r.final_grad_norm;
  j["viol_bellman_flow"] = r.viol_bellman_flow;
  j["viol_policy_correction"] = r.viol_policy_correction;
  j["ope_reward"] = r.ope_reward;
  j["ope_cost"] = r.ope_cost;
  j["exact_return"] = r.exact_return;
  j["wall_time_ms"] = r.wall_time_ms;
  return j.dump(1);
}

std::string to_json(const ExtractionResult& r) { return extraction_json(r).dump(1); }

std::string to_json(const ConstrainedResult& r) {
  json j = header("constrained_result");
  j["correction"] = correction_json(r.correction);
  j["extraction"] = r.extraction ? extraction_json(*r.extraction) : json(nullptr);
  j["policy"] = matrix_json(r.policy.probs);
  j["lambda_cost"] = r.lambda_cost;
  j["estimated_cost"] = r.estimated_cost;
  j["exact_cost"] = r.exact_cost;
  j["exact_return"] = r.exact_return;
  j["lambda_history"] = r.lambda_history;
  j["feasible"] = r.feasible;
  j["converged"] = r.converged;
  return j.dump(1);
}

TabularMdp mdp_from_json(std::string_view text) {
  const json j = parse(text, "mdp");
  return guarded("mdp", [&] {
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.transition = tensor_from(j.at("transition"), mdp.n_states, mdp.n_actions);
    mdp.reward = matrix_from(j.at("reward"));
    mdp.cost = j.contains("cost") ? matrix_from(j.at("cost")) : Matrix::Zero(mdp.n_states, mdp.n_actions);
    mdp.p0 = vector_from(j.at("p0"));
    mdp.gamma = j.at("gamma").get<double>();
    try {
      mdp.validate();
    } catch (const ParameterError& e) {
      throw ParseError(std::string("invalid mdp: ") + e.what());
    }
    return mdp;
  });
}

TabularPolicy policy_from_json(std::string_view text) {
  const json j = parse(text, "policy");
  return guarded("policy", [&] {
    TabularPolicy p{matrix_from(j.at("probs"))};
    try {
      p.validate();
    } catch (const ParameterError& e) {
      throw ParseError(std::string("invalid policy: ") + e.what());
    }
    return p;
  });
}

Dataset dataset_from_json(std::string_view text) {
  const json j = parse(text, "dataset");
  return guarded("dataset", [&] {
    Dataset d;
    d.n_states = j.at("n_states").get<int>();
    d.n_actions = j.at("n_actions").get<int>();
    d.gamma = j.at("gamma").get<double>();
    d.n_trajectories = j.at("n_trajectories").get<int>();
    d.horizon = j.at("horizon").get<int>();
    for (const json& r : j.at("transitions")) {
      if (r.size() != 7) throw ParseError("dataset record must have 7 fields");
      d.transitions.push_back(Transition{r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<double>(),
                                         r.at(3).get<double>(), r.at(4).get<int>(), r.at(5).get<int>(),
                                         r.at(6).get<int>()});
    }
    try {
      d.validate();
    } catch (const ParameterError& e) {
      throw ParseError(std::string("invalid dataset: ") + e.what());
    }
    return d;
  });
}

MleModel model_from_json(std::string_view text) {
  const json j = parse(text, "mle_model");
  return guarded("mle_model", [&] {
    MleModel m;
    m.n_states = j.at("n_states").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    m.gamma = j.at("gamma").get<double>();
    m.transition_hat = tensor_from(j.at("transition_hat"), m.n_states, m.n_actions);
    m.reward_hat = matrix_from(j.at("reward_hat"));
    m.cost_hat = matrix_from(j.at("cost_hat"));
    m.d_D = matrix_from(j.at("d_D"));
    m.d_D_state = vector_from(j.at("d_D_state"));
    m.pi_D.probs = matrix_from(j.at("pi_D"));
    m.p0_hat = vector_from(j.at("p0_hat"));
    m.support_mask = bool_matrix_from(j.at("support_mask"));
    try {
      m.validate();
    } catch (const ParameterError& e) {
      throw ParseError(std::string("invalid model: ") + e.what());
    }
    return m;
  });
}

CorrectionSet correction_from_json(std::string_view text) {
  const json j = parse(text, "correction");
  return guarded("correction", [&] {
    CorrectionSet c;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "state_action") {
      c.kind = CorrectionSet::Kind::kStateAction;
    } else if (kind == "per_policy") {
      c.kind = CorrectionSet::Kind::kPerPolicy;
    } else if (kind == "state") {
      c.kind = CorrectionSet::Kind::kState;
    } else {
      throw ParseError("unknown correction kind '" + kind + "'");
    }
    auto opt_matrix = [&](const char* key, std::optional<Matrix>& out) {
      if (j.contains(key) && !j.at(key).is_null()) out = matrix_from(j.at(key));
    };
    auto opt_vector = [&](const char* key, std::optional<Vector>& out) {
      if (j.contains(key) && !j.at(key).is_null()) out = vector_from(j.at(key));
    };
    opt_matrix("w_sa", c.w_sa);
    opt_matrix("w_a_given_s", c.w_a_given_s);
    opt_vector("w_s", c.w_s);
    c.nu = vector_from(j.at("nu"));
    opt_matrix("q", c.q);
    opt_vector("mu", c.mu);
    opt_vector("a_approx", c.a_approx);
    if (j.contains("lambda_cost") && !j.at("lambda_cost").is_null()) c.lambda_cost = j.at("lambda_cost").get<double>();
    if (j.contains("status")) {
      const json& st = j.at("status");
      c.status.converged = st.value("converged", false);
      c.status.iterations = st.value("iterations", 0);
      c.status.final_residual = st.value("final_residual", 0.0);
      c.status.saturated_evaluations = st.value("saturated_evaluations", 0L);
      c.status.message = st.value("message", std::string());
    }
    if (c.kind == CorrectionSet::Kind::kStateAction && !c.w_sa) throw ParseError("state_action correction without w_sa");
    if (c.kind == CorrectionSet::Kind::kPerPolicy && !c.w_a_given_s) {
      throw ParseError("per_policy correction without w_a_given_s");
    }
    return c;
  });
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("write failed for '" + path + "'");
}

}  // namespace dicekit
