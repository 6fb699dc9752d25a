// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/refinement.hpp"

#include <set>

#include "kgvip/prompts.hpp"

namespace kgvip {

std::string_view to_string(Recommendation r) {
  switch (r) {
    case Recommendation::expand: return "Expand";
    case Recommendation::prune: return "Prune";
    case Recommendation::terminate: return "Terminate";
  }
  return "Terminate";
}

RefinementAction RefinementAction::parse(std::string_view body) {
  const auto j = parse_structured(body, "refinement_action");
  RefinementAction a;
  const auto rec = j["recommendation"].get<std::string>();
  a.recommendation = rec == "Expand"  ? Recommendation::expand
                     : rec == "Prune" ? Recommendation::prune
                                      : Recommendation::terminate;
  if (a.recommendation != Recommendation::terminate) {
    a.nodes_to_expand = j["nodes_to_expand"].get<std::vector<std::string>>();
    a.nodes_to_prune = j["nodes_to_prune"].get<std::vector<std::string>>();
  }
  a.analysis = j["analysis"].get<std::string>();
  a.reason = j["reason"].get<std::string>();
  a.confidence = j["confidence"].get<double>();
  return a;
}

json RefinementAction::to_json() const {
  return {{"recommendation", to_string(recommendation)},
          {"nodes_to_expand", nodes_to_expand},
          {"nodes_to_prune", nodes_to_prune},
          {"analysis", analysis},
          {"reason", reason},
          {"confidence", confidence}};
}

json RefinementStep::to_json() const {
  return {{"index", index}, {"action", action.to_json()}, {"added", added},
          {"removed", removed}, {"nodes", nodes}, {"edges", edges}};
}

ApplyOutcome apply_expand(UnifiedGraph& graph, const std::vector<std::string>& node_ids,
                          const Graph& commonsense) {
  ApplyOutcome out;
  for (const auto& id : node_ids) {
    const auto* node = graph.find(id);
    if (!node || node->commonsense_id.empty() || !commonsense.contains(node->commonsense_id)) {
      out.warnings.push_back("expand: '" + id + "' is not a commonsense-backed node");
      continue;
    }
    const std::string anchor = node->commonsense_id;
    for (const auto& r : commonsense.relations()) {
      if (r.source != anchor && r.target != anchor) continue;
      const std::string& other = r.source == anchor ? r.target : r.source;
      if (!graph.find(other)) {
        const auto& e = *commonsense.find(other);
        UnifiedNode n;
        n.id = other;
        n.origin = NodeOrigin::commonsense;
        n.label = e.label;
        n.description = e.description;
        n.type = e.type;
        n.image_refs = e.image_refs;
        n.metadata = e.metadata;
        n.commonsense_id = other;
        graph.add_node(std::move(n));
        out.added.push_back(other);
      }
      graph.add_edge({r.source, r.target, r.predicate, r.confidence, EdgeOrigin::commonsense});
    }
  }
  return out;
}

ApplyOutcome apply_prune(UnifiedGraph& graph, const std::vector<std::string>& node_ids) {
  ApplyOutcome out;
  for (const auto& id : node_ids) {
    if (graph.remove_node(id)) {
      out.removed.push_back(id);
    } else {
      out.warnings.push_back("prune: unknown node '" + id + "'");
    }
  }
  return out;
}

namespace {

Bindings refinement_bindings(const UnifiedGraph& graph, ContextMode mode) {
  return {{"query", graph.query},
          {"query_image", graph.image_ref},
          {"node_count", std::to_string(graph.node_count())},
          {"edge_count", std::to_string(graph.edge_count())},
          {"graph", serialize_context(graph, mode)}};
}

}  // namespace

std::string render_refinement_prompt(const UnifiedGraph& graph, ContextMode mode) {
  return render_prompt(templates::kGraphRefinement, refinement_bindings(graph, mode));
}

RefinementResult refine(UnifiedGraph graph, const Graph& commonsense, Gateway& gateway,
                        std::size_t max_steps, ContextMode mode) {
  RefinementResult result;
  result.graph = std::move(graph);
  for (std::size_t step = 0; step < max_steps; ++step) {
    const auto request =
        gateway.make_request(Role::vision_chat, templates::kGraphRefinement,
                             refinement_bindings(result.graph, mode),
                             {MediaPart{result.graph.image_ref, {}, {}}});

    std::string body;
    try {
      body = gateway.chat(request);
    } catch (const GatewayError& e) {
      result.error = true;
      result.error_message = e.what();
      break;
    }

    RefinementStep entry;
    entry.index = step;
    try {
      entry.action = RefinementAction::parse(body);
    } catch (const OutputParseError& e) {
      result.warnings.push_back("refinement step " + std::to_string(step) +
                                ": unparseable output treated as Terminate: " + e.what());
    }

    // Work on a copy so a failed step leaves the last valid graph intact.
    UnifiedGraph next = result.graph;
    auto expanded = apply_expand(next, entry.action.nodes_to_expand, commonsense);
    auto pruned = apply_prune(next, entry.action.nodes_to_prune);
    next.validate();
    result.graph = std::move(next);

    // A node added then pruned in the same step is reported in neither list.
    const std::set<std::string> added_set(expanded.added.begin(), expanded.added.end());
    const std::set<std::string> removed_set(pruned.removed.begin(), pruned.removed.end());
    for (const auto& id : expanded.added) {
      if (!removed_set.contains(id)) entry.added.push_back(id);
    }
    for (const auto& id : pruned.removed) {
      if (!added_set.contains(id)) entry.removed.push_back(id);
    }
    for (auto& w : expanded.warnings) result.warnings.push_back(std::move(w));
    for (auto& w : pruned.warnings) result.warnings.push_back(std::move(w));
    entry.nodes = result.graph.node_count();
    entry.edges = result.graph.edge_count();
    const bool stop = entry.action.recommendation == Recommendation::terminate;
    result.trace.push_back(std::move(entry));
    if (stop) break;
  }
  return result;
}

}  // namespace kgvip
