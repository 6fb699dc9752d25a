// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "kgvip/error.hpp"
#include "kgvip/gateway.hpp"
#include "kgvip/prompts.hpp"
#include "kgvip/util.hpp"

namespace kgvip {

std::string_view to_string(VisionMode m) { return m == VisionMode::v2v ? "v2v" : "v2t"; }

VisionMode vision_mode_from_string(std::string_view s) {
  if (s == "v2v") return VisionMode::v2v;
  if (s == "v2t") return VisionMode::v2t;
  throw DataError("unknown vision mode '" + std::string(s) + "' (expected v2v or v2t)");
}

std::string_view to_string(PruneMode m) {
  switch (m) {
    case PruneMode::graph: return "graph";
    case PruneMode::query: return "query";
    case PruneMode::off: return "off";
  }
  return "graph";
}

PruneMode prune_mode_from_string(std::string_view s) {
  if (s == "graph") return PruneMode::graph;
  if (s == "query") return PruneMode::query;
  if (s == "off") return PruneMode::off;
  throw DataError("unknown pruning mode '" + std::string(s) + "' (expected graph, query or off)");
}

std::string entity_text(const Entity& entity) {
  return entity.description.empty() ? entity.label : entity.label + ": " + entity.description;
}

std::vector<std::string> dedupe_mentions(const std::vector<std::string>& mentions) {
  std::vector<std::string> out;
  std::set<std::string, std::less<>> seen;
  for (const auto& m : mentions) {
    auto t = trim(m);
    if (t.empty()) continue;
    if (seen.insert(to_lower(t)).second) out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> extract_query_entities(std::string_view query, Gateway& gateway) {
  const auto request =
      gateway.make_request(Role::chat, templates::kQueryEntities, {{"question", std::string(query)}});
  return gateway.chat_with_retries(request, [](const std::string& body) {
    const auto parsed = parse_structured(body, "entity_list");
    return dedupe_mentions(parsed["entities"].get<std::vector<std::string>>());
  });
}

std::vector<LinkedMention> link_mention_vectors(const std::vector<std::string>& mentions,
                                                const std::vector<EmbeddingVector>& vectors,
                                                const VectorIndex& text_index, double threshold) {
  if (mentions.size() != vectors.size()) throw Error("link_mention_vectors: size mismatch");
  std::vector<LinkedMention> out;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    if (vectors[i].is_zero()) continue;
    const auto best = top_k(text_index, vectors[i], 1);
    if (!best.empty() && best.front().score >= threshold) {
      out.push_back({mentions[i], best.front().key, best.front().score});
    }
  }
  return out;
}

IdSet link_entities(const std::vector<std::string>& mentions, const VectorIndex& text_index,
                    Embedder& embedder, double threshold) {
  std::vector<EmbeddingVector> vectors;
  vectors.reserve(mentions.size());
  for (const auto& m : mentions) vectors.push_back(embedder.embed(Modality::text, m));
  IdSet seeds;
  for (const auto& link : link_mention_vectors(mentions, vectors, text_index, threshold)) {
    seeds.insert(link.entity_id);
  }
  return seeds;
}

RankedScores ppr_rank(const SubgraphRef& subgraph, const IdSet& seeds, const RankingParams& params) {
  if (seeds.empty()) throw DataError("ppr_rank: seed set is empty");
  if (!(params.restart > 0.0 && params.restart <= 1.0)) {
    throw DataError("ppr_rank: restart probability must be in (0,1]");
  }
  if (!subgraph.parent) throw Error("ppr_rank: subgraph has no parent graph");

  std::vector<std::string> ids(subgraph.nodes.begin(), subgraph.nodes.end());
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], i);
  for (const auto& s : seeds) {
    if (!pos.contains(s)) throw DataError("ppr_rank: seed '" + s + "' is not in the subgraph");
  }

  const std::size_t n = ids.size();
  // adjacency[i] holds (neighbor, weight); parallel relations accumulate.
  std::vector<std::map<std::size_t, double>> adjacency(n);
  std::vector<double> degree(n, 0.0);
  for (auto ri : subgraph.relations) {
    const auto& r = subgraph.parent->relations()[ri];
    const auto a = pos.at(r.source);
    const auto b = pos.at(r.target);
    adjacency[a][b] += 1.0;
    adjacency[b][a] += 1.0;
    degree[a] += 1.0;
    degree[b] += 1.0;
  }

  std::vector<double> restart_vec(n, 0.0);
  const double seed_mass = 1.0 / static_cast<double>(seeds.size());
  for (const auto& s : seeds) restart_vec[pos.at(s)] = seed_mass;

  const double c = params.restart;
  std::vector<double> x = restart_vec;
  std::vector<double> next(n);
  RankedScores out;
  out.params = params;
  for (int it = 0; it < params.max_iterations; ++it) {
    double dangling = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (degree[j] == 0.0) {
        dangling += x[j];
        continue;
      }
      const double share = x[j] / degree[j];
      for (const auto& [i, w] : adjacency[j]) next[i] += w * share;
    }
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = c * restart_vec[i] + (1.0 - c) * (next[i] + dangling * restart_vec[i]);
      delta += std::abs(next[i] - x[i]);
    }
    x.swap(next);
    out.iterations = it + 1;
    if (delta < params.tolerance) {
      out.converged = true;
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) out.scores.emplace(ids[i], x[i]);
  return out;
}

IdSet select_top_n(const RankedScores& ranking, const IdSet& seeds, std::size_t n) {
  std::vector<std::pair<std::string, double>> ordered(ranking.scores.begin(), ranking.scores.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  IdSet keep(seeds.begin(), seeds.end());
  for (std::size_t i = 0; i < std::min(n, ordered.size()); ++i) keep.insert(ordered[i].first);
  return keep;
}

TextStageResult text_guided_subgraph(const GraphPtr& commonsense, QueryContext& ctx,
                                     const RetrievalConfig& config, const VectorIndex& text_index,
                                     Embedder& embedder, Gateway& gateway) {
  TextStageResult result;
  result.subgraph.parent = commonsense;
  result.subgraph.provenance = Provenance::text_guided;
  result.k_hop.parent = commonsense;

  if (ctx.mentions.empty()) ctx.mentions = extract_query_entities(ctx.query, gateway);
  result.mentions = ctx.mentions;
  if (ctx.mentions.empty()) return result;

  result.seeds = link_entities(ctx.mentions, text_index, embedder, config.link_threshold);
  // The index may know entities the graph lost (e.g. pruned components).
  std::erase_if(result.seeds, [&](const std::string& id) { return !commonsense->contains(id); });
  if (result.seeds.empty()) return result;

  result.k_hop = k_hop_subgraph(commonsense, result.seeds, config.k);
  result.ranking = ppr_rank(result.k_hop, result.seeds, config.ranking);
  result.subgraph = induced_subgraph(commonsense, select_top_n(result.ranking, result.seeds, config.n));
  result.subgraph.provenance = Provenance::text_guided;
  return result;
}

std::string serialize_subgraph_for_prompt(const SubgraphRef& subgraph) {
  if (subgraph.empty() || !subgraph.parent) return "(none)";
  std::string out;
  for (const auto& id : subgraph.nodes) {
    const auto* e = subgraph.parent->find(id);
    out += "\n" + id + ": " + e->label + " (" + (e->type.empty() ? "entity" : e->type) + ")";
  }
  for (auto i : subgraph.relations) {
    const auto& r = subgraph.parent->relations()[i];
    out += "\n(" + r.source + ", " + r.predicate + ", " + r.target + ")";
  }
  return out;
}

std::string serialize_scene_entities(const SceneGraph& scene) {
  if (scene.entities.empty()) return "(none)";
  std::string out;
  for (const auto& e : scene.entities) {
    out += "\n" + e.entity_id + ": " + e.name + " (" + std::string(to_string(e.category)) + ")";
  }
  return out;
}

std::string serialize_scene_relations(const SceneGraph& scene) {
  if (scene.relations.empty()) return "(none)";
  std::string out;
  for (const auto& r : scene.relations) {
    out += "\n(" + r.subject_id + ", " + r.predicate + ", " + r.object_id + ")";
  }
  return out;
}

PruneResult apply_keep_lists(const SceneGraph& scene, const std::vector<std::string>& keep_entities,
                             const std::vector<std::array<std::string, 3>>& keep_relations) {
  PruneResult result;
  auto& out = result.graph;
  out.image_ref = scene.image_ref;
  out.width = scene.width;
  out.height = scene.height;

  IdSet keep;
  for (const auto& id : keep_entities) {
    if (scene.find(id)) {
      keep.insert(id);
    } else {
      ++result.unknown_entities;
    }
  }
  for (const auto& e : scene.entities) {
    if (keep.contains(e.entity_id)) out.entities.push_back(e);
  }

  std::set<std::array<std::string, 3>> wanted(keep_relations.begin(), keep_relations.end());
  std::set<std::array<std::string, 3>> matched;
  for (const auto& r : scene.relations) {
    std::array<std::string, 3> key{r.subject_id, r.predicate, r.object_id};
    if (wanted.contains(key) && keep.contains(r.subject_id) && keep.contains(r.object_id)) {
      out.relations.push_back(r);
      matched.insert(key);
    }
  }
  result.unmatched_relations = wanted.size() - matched.size();
  return result;
}

PruneResult prune_scene_graph(const SceneGraph& scene, const SubgraphRef& text_subgraph,
                              Gateway& gateway, PruneMode mode, std::string_view query) {
  auto unpruned = [&scene] {
    PruneResult r;
    r.graph = scene;
    r.skipped = true;
    return r;
  };
  if (mode == PruneMode::off || scene.empty()) return unpruned();
  if (mode == PruneMode::graph && text_subgraph.empty()) return unpruned();

  const std::string reference =
      mode == PruneMode::query ? std::string(query) : serialize_subgraph_for_prompt(text_subgraph);
  const auto request = gateway.make_request(Role::vision_chat, templates::kQueryPruning,
                                            {{"commonsense_subgraph", reference},
                                             {"scene_entities", serialize_scene_entities(scene)},
                                             {"scene_relations", serialize_scene_relations(scene)}},
                                            {MediaPart{scene.image_ref, {}, {}}});
  try {
    return gateway.chat_with_retries(request, [&](const std::string& body) {
      const auto parsed = parse_structured(body, "keep_lists");
      std::vector<std::array<std::string, 3>> rels;
      for (const auto& r : parsed["keep_relations"]) {
        rels.push_back({r["s"].get<std::string>(), r["p"].get<std::string>(), r["o"].get<std::string>()});
      }
      return apply_keep_lists(scene, parsed["keep_entities"].get<std::vector<std::string>>(), rels);
    });
  } catch (const ModelOutputError&) {
    PruneResult r;
    r.graph = scene;
    r.fallback = true;
    return r;
  }
}

CropEmbeddings embed_scene_crops(const SceneGraph& scene, const MediaResolver& media,
                                 Embedder& embedder) {
  CropEmbeddings out;
  for (const auto& e : scene.entities) {
    std::string crop;
    try {
      crop = crop_region(media, scene.image_ref, e.bbox);
    } catch (const DataError&) {
      ++out.skipped;
      continue;
    }
    const std::string ref = scene.image_ref + "#crop=" + std::to_string(e.bbox.x1) + "," +
                            std::to_string(e.bbox.y1) + "," + std::to_string(e.bbox.x2) + "," +
                            std::to_string(e.bbox.y2);
    auto vec = embedder.embed(Modality::image, crop, ref);
    if (vec.is_zero()) {
      ++out.skipped;
      continue;
    }
    out.crops.push_back({e.entity_id, std::move(vec)});
  }
  return out;
}

std::vector<ScoredKey> rank_vision_candidates(const std::vector<CropEmbedding>& crops,
                                              const Graph& commonsense, const VectorIndex& index,
                                              VisionMode mode, std::size_t m) {
  std::map<std::string, double, std::less<>> best;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& v = index.at(i);
    if (v.is_zero()) continue;
    const std::string_view key = index.keys()[i];
    const std::string owner(mode == VisionMode::v2v ? image_key_owner(key) : key);
    if (!commonsense.contains(owner)) continue;
    for (const auto& crop : crops) {
      const double s = cosine(crop.vector, v);
      auto [it, fresh] = best.try_emplace(owner, s);
      if (!fresh && s > it->second) it->second = s;
    }
  }
  std::vector<ScoredKey> ranked;
  ranked.reserve(best.size());
  for (const auto& [id, s] : best) ranked.push_back({id, s});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredKey& a, const ScoredKey& b) { return a.score > b.score; });
  if (ranked.size() > m) ranked.resize(m);
  return ranked;
}

VisionStageResult vision_retrieve(const std::vector<CropEmbedding>& crops, const GraphPtr& commonsense,
                                  const VectorIndex& index, VisionMode mode, std::size_t m) {
  VisionStageResult result;
  result.subgraph.parent = commonsense;
  result.subgraph.provenance = Provenance::vision_guided;
  if (crops.empty()) return result;
  result.ranked = rank_vision_candidates(crops, *commonsense, index, mode, m);
  IdSet ids;
  for (const auto& r : result.ranked) ids.insert(r.key);
  result.subgraph = induced_subgraph(commonsense, ids);
  result.subgraph.provenance = Provenance::vision_guided;
  return result;
}

SubgraphRef unify_commonsense(const SubgraphRef& text_subgraph, const SubgraphRef& vision_subgraph) {
  return subgraph_union(text_subgraph, vision_subgraph);
}

}  // namespace kgvip
