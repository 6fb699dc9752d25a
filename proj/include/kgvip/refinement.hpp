// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// Bounded Expand/Prune/Terminate loop over the unified graph. Each step is
// one vision-model call (no retries): the model sees the query, the image
// and the serialized graph and names nodes to expand or prune.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "kgvip/fusion.hpp"
#include "kgvip/gateway.hpp"

namespace kgvip {

enum class Recommendation { expand, prune, terminate };

std::string_view to_string(Recommendation r);

struct RefinementAction {
  Recommendation recommendation = Recommendation::terminate;
  std::vector<std::string> nodes_to_expand;
  std::vector<std::string> nodes_to_prune;
  std::string analysis;
  std::string reason;
  double confidence = 0.0;

  // Throws OutputParseError on schema violations.
  static RefinementAction parse(std::string_view body);
  json to_json() const;
};

struct ApplyOutcome {
  std::vector<std::string> added;
  std::vector<std::string> removed;
  std::vector<std::string> warnings;
};

// Adds the 1-hop neighbours in `commonsense` of each named commonsense-backed
// node, as commonsense-only nodes, along with the relations joining the
// named node to its neighbours. Other ids are ignored with a warning.
ApplyOutcome apply_expand(UnifiedGraph& graph, const std::vector<std::string>& node_ids,
                          const Graph& commonsense);

// Removes named nodes and their incident edges; unknown ids are warnings.
ApplyOutcome apply_prune(UnifiedGraph& graph, const std::vector<std::string>& node_ids);

struct RefinementStep {
  std::size_t index = 0;
  RefinementAction action;
  std::vector<std::string> added;
  std::vector<std::string> removed;
  std::size_t nodes = 0;
  std::size_t edges = 0;

  json to_json() const;
};

struct RefinementResult {
  UnifiedGraph graph;
  std::vector<RefinementStep> trace;
  std::vector<std::string> warnings;
  // A gateway error ended the loop; graph is the last valid one.
  bool error = false;
  std::string error_message;
};

// Runs at most `max_steps` rounds; Terminate or unparseable output stops
// the loop (the latter is traced as Terminate with a warning).
RefinementResult refine(UnifiedGraph graph, const Graph& commonsense, Gateway& gateway,
                        std::size_t max_steps, ContextMode mode = ContextMode::fused);

std::string render_refinement_prompt(const UnifiedGraph& graph, ContextMode mode);

}  // namespace kgvip
