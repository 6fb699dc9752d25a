// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// Two-stage retrieval over the commonsense graph.
//
// Text stage: query mentions are linked to seed entities by text-embedding
// similarity, expanded to a k-hop neighbourhood, ranked by personalized
// PageRank and cut to the top n (seeds always survive the cut).
//
// Vision stage: the scene graph is first pruned against the text-stage
// subgraph by the vision model, then every surviving scene crop is matched
// against entity images (v2v) or entity text (v2t); the best m entities
// form the vision-guided subgraph. The union of both is what fusion sees.

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kgvip/embedding.hpp"
#include "kgvip/graph.hpp"
#include "kgvip/scene_graph.hpp"

namespace kgvip {

class Gateway;

struct QueryContext {
  std::string query;
  std::string image_ref;
  std::vector<std::string> mentions;
};

struct RankingParams {
  double restart = 0.15;
  double tolerance = 1e-8;
  int max_iterations = 100;
};

struct RankedScores {
  std::map<std::string, double, std::less<>> scores;
  RankingParams params;
  int iterations = 0;
  bool converged = false;
};

enum class VisionMode { v2v, v2t };

std::string_view to_string(VisionMode m);
VisionMode vision_mode_from_string(std::string_view s);

struct RetrievalConfig {
  std::size_t k = 2;
  std::size_t n = 15;
  std::size_t m = 10;
  double link_threshold = 0.35;
  VisionMode vision_mode = VisionMode::v2v;
  RankingParams ranking;
};

using IdSet = std::set<std::string, std::less<>>;

// Text embedded for an entity in the text index: "label: description", or
// just the label when there is no description.
std::string entity_text(const Entity& entity);

// Case-insensitive, order-preserving dedup of trimmed, non-empty mentions.
std::vector<std::string> dedupe_mentions(const std::vector<std::string>& mentions);

std::vector<std::string> extract_query_entities(std::string_view query, Gateway& gateway);

struct LinkedMention {
  std::string mention;
  std::string entity_id;
  double score = 0.0;
};

// Top-1 entity per mention vector, kept when its score >= threshold.
std::vector<LinkedMention> link_mention_vectors(const std::vector<std::string>& mentions,
                                                const std::vector<EmbeddingVector>& vectors,
                                                const VectorIndex& text_index, double threshold);

IdSet link_entities(const std::vector<std::string>& mentions, const VectorIndex& text_index,
                    Embedder& embedder, double threshold);

// Power iteration of x <- c*s + (1-c)*W x on the undirected subgraph, where
// W is the degree-normalized adjacency (parallel relations add weight), s
// is uniform over the seeds, and mass on dangling nodes restarts at s.
// Stops when the L1 change drops below tolerance or at max_iterations.
RankedScores ppr_rank(const SubgraphRef& subgraph, const IdSet& seeds, const RankingParams& params);

// Top n ids by descending score (ties by ascending id), plus the seeds.
IdSet select_top_n(const RankedScores& ranking, const IdSet& seeds, std::size_t n);

struct TextStageResult {
  SubgraphRef subgraph;
  std::vector<std::string> mentions;
  IdSet seeds;
  SubgraphRef k_hop;
  RankedScores ranking;
};

// Extracts mentions through the gateway only when ctx.mentions is empty.
TextStageResult text_guided_subgraph(const GraphPtr& commonsense, QueryContext& ctx,
                                     const RetrievalConfig& config, const VectorIndex& text_index,
                                     Embedder& embedder, Gateway& gateway);

enum class PruneMode { graph, query, off };

std::string_view to_string(PruneMode m);
PruneMode prune_mode_from_string(std::string_view s);

struct PruneResult {
  SceneGraph graph;
  std::size_t unknown_entities = 0;
  std::size_t unmatched_relations = 0;
  // Output stayed unparseable after retries; graph is the unpruned input.
  bool fallback = false;
  // No model call was made (pruning off, empty scene or empty reference).
  bool skipped = false;
};

// Applies parsed keep lists to `scene`.
PruneResult apply_keep_lists(const SceneGraph& scene, const std::vector<std::string>& keep_entities,
                             const std::vector<std::array<std::string, 3>>& keep_relations);

PruneResult prune_scene_graph(const SceneGraph& scene, const SubgraphRef& text_subgraph,
                              Gateway& gateway, PruneMode mode = PruneMode::graph,
                              std::string_view query = {});

// Prompt serializations: "id: label (type)" entity lines and
// "(source, predicate, target)" relation lines, "(none)" when empty.
std::string serialize_subgraph_for_prompt(const SubgraphRef& subgraph);
std::string serialize_scene_entities(const SceneGraph& scene);
std::string serialize_scene_relations(const SceneGraph& scene);

struct CropEmbedding {
  std::string scene_id;
  EmbeddingVector vector;
};

struct CropEmbeddings {
  std::vector<CropEmbedding> crops;
  std::size_t skipped = 0;
};

// Embeds each scene entity's crop. Entities whose crop cannot be produced,
// or whose embedding is the zero vector, are skipped and counted.
CropEmbeddings embed_scene_crops(const SceneGraph& scene, const MediaResolver& media,
                                 Embedder& embedder);

// Scores every commonsense entity present in `index` (v2v: max over the
// entity's image vectors; v2t: its text vector), aggregates by max over
// crops, and returns the best m. Zero index vectors are not candidates.
std::vector<ScoredKey> rank_vision_candidates(const std::vector<CropEmbedding>& crops,
                                              const Graph& commonsense, const VectorIndex& index,
                                              VisionMode mode, std::size_t m);

struct VisionStageResult {
  SubgraphRef subgraph;
  std::vector<ScoredKey> ranked;
};

VisionStageResult vision_retrieve(const std::vector<CropEmbedding>& crops, const GraphPtr& commonsense,
                                  const VectorIndex& index, VisionMode mode, std::size_t m);

SubgraphRef unify_commonsense(const SubgraphRef& text_subgraph, const SubgraphRef& vision_subgraph);

}  // namespace kgvip
