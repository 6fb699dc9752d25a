// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kgvip {

// Versioned prompt template ids. A template change must bump the version,
// since recorded cassettes are keyed on the rendered text.
namespace templates {
inline constexpr std::string_view kSceneGraph = "scene_graph.v1";
inline constexpr std::string_view kQueryPruning = "query_pruning.v1";
inline constexpr std::string_view kGraphRefinement = "graph_refinement.v1";
inline constexpr std::string_view kVqaGenerator = "vqa_generator.v1";
inline constexpr std::string_view kQueryEntities = "query_entities.v1";
inline constexpr std::string_view kTripleExtraction = "triple_extraction.v1";
inline constexpr std::string_view kJudge = "judge.v1";
inline constexpr std::string_view kAnswer = "answer.v1";
inline constexpr std::string_view kRetrySuffix = "retry_suffix.v1";
}  // namespace templates

using Bindings = std::map<std::string, std::string, std::less<>>;

// Raw template text. Throws DataError for an unknown id.
const std::string& prompt_template(std::string_view template_id);
std::vector<std::string> template_ids();

// Slot names in order of first appearance. A slot is `{name}` where name
// matches [A-Za-z_][A-Za-z0-9_]*; every other brace is literal text.
std::vector<std::string> template_slots(std::string_view text);

// Substitutes every slot. Throws DataError naming the slot for a missing
// binding, and naming the key for an unused binding.
std::string render_template(std::string_view text, const Bindings& bindings);
std::string render_prompt(std::string_view template_id, const Bindings& bindings);

}  // namespace kgvip
