// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// Scene/commonsense alignment and the unified graph.
//
// A scene entity i and commonsense entity j are scored as
//
//   S_ij = alpha * cos(crop_i, text_j) + (1 - alpha) * max_n cos(crop_i, image_jn)
//
// and entities without image vectors fall back to the cross-modal term
// alone. Pairs are matched greedily one-to-one and merged into fused nodes.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "kgvip/embedding.hpp"
#include "kgvip/graph.hpp"
#include "kgvip/retrieval.hpp"
#include "kgvip/scene_graph.hpp"

namespace kgvip {

inline constexpr double kDefaultAlpha = 0.5;
inline constexpr double kDefaultTau = 0.45;

struct AlignmentPair {
  std::string scene_id;
  std::string commonsense_id;
  double score = 0.0;
  double cross_modal = 0.0;
  double visual = 0.0;
  bool text_only = false;

  bool operator==(const AlignmentPair&) const = default;
};

// alpha * cross + (1 - alpha) * visual. Throws DataError unless alpha is in [0,1].
double combine_alignment(double alpha, double cross_modal, double visual);

// Text and per-entity image vectors of the commonsense side.
class EntityVectors {
 public:
  EntityVectors(const VectorIndex& text_index, const VectorIndex& image_index);

  const EmbeddingVector* text(std::string_view entity_id) const { return text_.find(entity_id); }
  // Nonzero image vectors for the entity, in index order.
  const std::vector<const EmbeddingVector*>& images(std::string_view entity_id) const;

 private:
  const VectorIndex& text_;
  std::map<std::string, std::vector<const EmbeddingVector*>, std::less<>> images_;
};

// Throws DataError when the entity has no text vector.
AlignmentPair alignment_score(const CropEmbedding& crop, std::string_view commonsense_id,
                              double alpha, const EntityVectors& vectors);

// Descending score, ties by scene id then commonsense id; a pair is taken
// when S >= tau and neither side is already matched.
std::vector<AlignmentPair> greedy_match(std::vector<AlignmentPair> pairs, double tau);

// Scores every (crop, commonsense node) pair and matches them. Scene
// entities without a crop embedding cannot be matched.
std::vector<AlignmentPair> match_entities(const std::vector<CropEmbedding>& crops,
                                          const SubgraphRef& commonsense, double alpha, double tau,
                                          const EntityVectors& vectors);

enum class NodeOrigin { scene, commonsense, fused };
enum class EdgeOrigin { scene, commonsense, both };

std::string_view to_string(NodeOrigin o);
std::string_view to_string(EdgeOrigin o);

struct UnifiedNode {
  std::string id;
  NodeOrigin origin = NodeOrigin::commonsense;
  std::string label;
  std::string description;
  // Scene category for scene/fused nodes, entity type otherwise.
  std::string type;
  std::optional<BBox> bbox;
  std::optional<double> scene_confidence;
  std::vector<std::string> image_refs;
  std::map<std::string, std::string> metadata;
  std::string scene_id;
  std::string commonsense_id;
  std::optional<AlignmentPair> alignment;

  bool operator==(const UnifiedNode&) const = default;
};

struct UnifiedEdge {
  std::string source;
  std::string target;
  std::string predicate;
  double confidence = 1.0;
  EdgeOrigin origin = EdgeOrigin::commonsense;

  bool operator==(const UnifiedEdge&) const = default;
};

class UnifiedGraph {
 public:
  using NodeMap = std::map<std::string, UnifiedNode, std::less<>>;

  std::string query;
  std::string image_ref;

  // Throws DataError on a duplicate id.
  void add_node(UnifiedNode node);
  // Dedups on (source, predicate, target), keeping the max confidence and
  // merging origins. Self-loops are dropped. Throws DataError on an unknown
  // endpoint.
  bool add_edge(UnifiedEdge edge);
  // Removes the node and its incident edges; false when unknown.
  bool remove_node(std::string_view id);

  const UnifiedNode* find(std::string_view id) const;
  // Attribute edits only; ids and origins must stay consistent with edges.
  UnifiedNode* mutable_node(std::string_view id);
  const UnifiedNode* find_by_commonsense_id(std::string_view commonsense_id) const;
  const NodeMap& nodes() const noexcept { return nodes_; }
  // Sorted by (source, predicate, target).
  std::vector<UnifiedEdge> edges() const;

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

  // Throws DataError on dangling edges, a scene or commonsense id claimed
  // by two nodes, or an origin tag inconsistent with the node's ids.
  void validate() const;

  bool operator==(const UnifiedGraph&) const = default;

 private:
  using EdgeKey = std::tuple<std::string, std::string, std::string>;
  NodeMap nodes_;
  std::map<EdgeKey, UnifiedEdge> edges_;
};

// Builds G_f. Fused and commonsense-only nodes take the commonsense id;
// scene-only nodes keep the scene id, prefixed "scene:" when it collides
// with an id in the commonsense graph. Throws DataError for a match naming
// an unknown or already matched id.
UnifiedGraph fuse(const SceneGraph& scene, const SubgraphRef& commonsense,
                  const std::vector<AlignmentPair>& matches);

enum class ContextMode { fused, isolated };

// Text block for prompts. Fused mode has one "UNIFIED GRAPH" section;
// isolated mode has "SCENE GRAPH" and "COMMONSENSE GRAPH" sections split
// by node origin (edges that cross sections are omitted, which only happens
// when fused nodes exist). Each section has NODES and EDGES subsections.
std::string serialize_context(const UnifiedGraph& graph, ContextMode mode);

}  // namespace kgvip
