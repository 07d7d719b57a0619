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

#ifndef DICEKIT_SERIALIZATION_HPP_
#define DICEKIT_SERIALIZATION_HPP_

#include <string>
#include <string_view>

#include "dicekit/constrained.hpp"
#include "dicekit/dataset.hpp"
#include "dicekit/extraction.hpp"
#include "dicekit/mdp.hpp"
#include "dicekit/solvers.hpp"

namespace dicekit {

// Every document carries {"schema": "dicekit.<type>", "version": N}.
// Tensors are row-major nested arrays: transition[s][a][s'], reward[s][a].
inline constexpr int kSchemaVersion = 1;

std::string to_json(const TabularMdp& mdp);
std::string to_json(const TabularPolicy& policy);
std::string to_json(const Dataset& dataset);
std::string to_json(const MleModel& model);
std::string to_json(const CorrectionSet& corr);
std::string to_json(const SolveReport& report);
std::string to_json(const ExtractionResult& res);
std::string to_json(const ConstrainedResult& res);

// Parsers throw ParseError on malformed text or a schema/version mismatch.
TabularMdp mdp_from_json(std::string_view text);
TabularPolicy policy_from_json(std::string_view text);
Dataset dataset_from_json(std::string_view text);
MleModel model_from_json(std::string_view text);
CorrectionSet correction_from_json(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace dicekit

#endif  // DICEKIT_SERIALIZATION_HPP_
