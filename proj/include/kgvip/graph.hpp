// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// Multimodal knowledge graph storage.
//
// A Graph holds entities keyed by id and a list of directed, confidence
// weighted relations. Relations are normalized on insertion: self-loops are
// dropped and duplicate (source, predicate, target) triples collapse to the
// maximum confidence. Traversal (k-hop, components) always ignores edge
// direction.
//
// Subgraphs are lightweight views (SubgraphRef) over a shared, immutable
// parent graph: a node id set plus the indices of the induced relations.
//
// On disk a graph is a directory with nodes.jsonl, edges.jsonl and an
// optional manifest.json carrying expected counts.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace kgvip {

class Gateway;
class VectorIndex;

struct Entity {
  std::string id;
  std::string label;
  std::string description;
  std::string type;
  std::vector<std::string> image_refs;
  std::map<std::string, std::string> metadata;

  bool operator==(const Entity&) const = default;
};

struct Relation {
  std::string source;
  std::string target;
  std::string predicate;
  double confidence = 1.0;
  std::optional<std::string> evidence;

  bool operator==(const Relation&) const = default;
};

class Graph {
 public:
  using EntityMap = std::map<std::string, Entity, std::less<>>;

  // Throws DataError on empty id/label, duplicate id.
  void add_entity(Entity entity);

  // Throws DataError when an endpoint is unknown or confidence is outside
  // [0,1]. Returns false when the relation was absorbed: a self-loop, or a
  // duplicate triple (whose confidence is raised to the max of both).
  bool add_relation(Relation relation);

  const Entity* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  const EntityMap& entities() const noexcept { return entities_; }
  const std::vector<Relation>& relations() const noexcept { return relations_; }
  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t relation_count() const noexcept { return relations_.size(); }
  bool empty() const noexcept { return entities_.empty(); }

  // Full referential-integrity and normalization check.
  void validate() const;

  bool operator==(const Graph& other) const {
    return entities_ == other.entities_ && relations_ == other.relations_;
  }

 private:
  using TripleKey = std::tuple<std::string, std::string, std::string>;

  EntityMap entities_;
  std::vector<Relation> relations_;
  std::map<TripleKey, std::size_t> triple_index_;
};

using GraphPtr = std::shared_ptr<const Graph>;

enum class Provenance { text_guided, vision_guided, scene_pruned, unified, adhoc };

std::string_view to_string(Provenance p);

// Node/relation subset of a parent graph. `relations` are indices into
// parent->relations(), ascending, and always equal the relations induced
// by `nodes`.
struct SubgraphRef {
  GraphPtr parent;
  std::set<std::string, std::less<>> nodes;
  std::vector<std::size_t> relations;
  Provenance provenance = Provenance::adhoc;

  bool empty() const noexcept { return nodes.empty(); }
  bool contains(std::string_view id) const { return nodes.find(id) != nodes.end(); }

  // Copies the view out into a standalone graph.
  Graph materialize() const;
};

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t image_refs = 0;
  std::size_t components = 0;

  bool operator==(const GraphStats&) const = default;
};

struct LoadOptions {
  // Compare counts against manifest.json when present.
  bool verify_manifest = true;
};

Graph load_graph(const std::filesystem::path& dir, const LoadOptions& options = {});
void save_graph(const Graph& graph, const std::filesystem::path& dir);

GraphStats graph_stats(const Graph& graph);

// Asks the chat model for entities and relations in `document`. Returns an
// empty graph without a model call for empty input.
Graph extract_graph_from_text(std::string_view document, Gateway& gateway);

// Union of two graphs; entities with the same id keep the first graph's
// record with image refs and metadata merged.
Graph merge_graphs(const Graph& a, const Graph& b);

// Merges entities whose text vectors have cosine >= threshold. Pairs are
// computed on the input graph and closed under union-find; the merged
// entity takes the smallest member id.
Graph merge_duplicate_entities(const Graph& graph, const VectorIndex& text_index,
                               double threshold);

Graph prune_low_confidence(const Graph& graph, double threshold);

// Largest weakly-connected component; ties go to the component holding the
// lexicographically smallest id.
Graph giant_component(const Graph& graph);

struct ImageAttachment {
  std::string entity_id;
  std::vector<std::string> image_refs;
};

struct EnrichResult {
  Graph graph;
  std::size_t attached = 0;
  std::vector<std::string> unknown_entities;
};

// Appends image refs from a manifest (deduplicated, order preserving).
EnrichResult attach_images(const Graph& graph, const std::vector<ImageAttachment>& manifest);
std::vector<ImageAttachment> load_image_manifest(const std::filesystem::path& path);

SubgraphRef k_hop_subgraph(const GraphPtr& graph, const std::set<std::string, std::less<>>& seeds,
                           std::size_t k);
SubgraphRef induced_subgraph(const GraphPtr& graph,
                             const std::set<std::string, std::less<>>& nodes);
SubgraphRef subgraph_union(const SubgraphRef& a, const SubgraphRef& b);

// Undirected adjacency: neighbor ids per entity, sorted, without repeats.
std::map<std::string, std::vector<std::string>, std::less<>> undirected_neighbors(
    const Graph& graph);

}  // namespace kgvip
