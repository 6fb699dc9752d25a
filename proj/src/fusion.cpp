// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/fusion.hpp"

#include <algorithm>
#include <set>

#include "kgvip/error.hpp"

namespace kgvip {

double combine_alignment(double alpha, double cross_modal, double visual) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DataError("alpha must be in [0,1]");
  return alpha * cross_modal + (1.0 - alpha) * visual;
}

EntityVectors::EntityVectors(const VectorIndex& text_index, const VectorIndex& image_index)
    : text_(text_index) {
  for (std::size_t i = 0; i < image_index.size(); ++i) {
    if (image_index.at(i).is_zero()) continue;
    images_[std::string(image_key_owner(image_index.keys()[i]))].push_back(&image_index.at(i));
  }
}

const std::vector<const EmbeddingVector*>& EntityVectors::images(std::string_view entity_id) const {
  static const std::vector<const EmbeddingVector*> kNone;
  auto it = images_.find(entity_id);
  return it == images_.end() ? kNone : it->second;
}

AlignmentPair alignment_score(const CropEmbedding& crop, std::string_view commonsense_id,
                              double alpha, const EntityVectors& vectors) {
  const auto* text = vectors.text(commonsense_id);
  if (!text) throw DataError("entity '" + std::string(commonsense_id) + "' has no text vector");

  AlignmentPair pair;
  pair.scene_id = crop.scene_id;
  pair.commonsense_id = std::string(commonsense_id);
  pair.cross_modal = cosine(crop.vector, *text);
  const auto& images = vectors.images(commonsense_id);
  if (images.empty()) {
    pair.text_only = true;
    pair.score = combine_alignment(1.0, pair.cross_modal, 0.0);
    return pair;
  }
  pair.visual = -1.0;
  for (const auto* v : images) pair.visual = std::max(pair.visual, cosine(crop.vector, *v));
  pair.score = combine_alignment(alpha, pair.cross_modal, pair.visual);
  return pair;
}

std::vector<AlignmentPair> greedy_match(std::vector<AlignmentPair> pairs, double tau) {
  std::sort(pairs.begin(), pairs.end(), [](const AlignmentPair& a, const AlignmentPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
    return a.commonsense_id < b.commonsense_id;
  });
  std::set<std::string, std::less<>> used_scene, used_commonsense;
  std::vector<AlignmentPair> out;
  for (auto& p : pairs) {
    if (p.score < tau) break;
    if (used_scene.contains(p.scene_id) || used_commonsense.contains(p.commonsense_id)) continue;
    used_scene.insert(p.scene_id);
    used_commonsense.insert(p.commonsense_id);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<AlignmentPair> match_entities(const std::vector<CropEmbedding>& crops,
                                          const SubgraphRef& commonsense, double alpha, double tau,
                                          const EntityVectors& vectors) {
  if (!(tau >= -1.0 && tau <= 1.0)) throw DataError("tau must be in [-1,1]");
  std::vector<AlignmentPair> pairs;
  pairs.reserve(crops.size() * commonsense.nodes.size());
  for (const auto& crop : crops) {
    for (const auto& id : commonsense.nodes) pairs.push_back(alignment_score(crop, id, alpha, vectors));
  }
  return greedy_match(std::move(pairs), tau);
}

std::string_view to_string(NodeOrigin o) {
  switch (o) {
    case NodeOrigin::scene: return "scene";
    case NodeOrigin::commonsense: return "commonsense";
    case NodeOrigin::fused: return "fused";
  }
  return "scene";
}

std::string_view to_string(EdgeOrigin o) {
  switch (o) {
    case EdgeOrigin::scene: return "scene";
    case EdgeOrigin::commonsense: return "commonsense";
    case EdgeOrigin::both: return "both";
  }
  return "scene";
}

void UnifiedGraph::add_node(UnifiedNode node) {
  if (node.id.empty()) throw DataError("unified node with empty id");
  const std::string id = node.id;
  if (!nodes_.emplace(id, std::move(node)).second) {
    throw DataError("duplicate unified node '" + id + "'");
  }
}

bool UnifiedGraph::add_edge(UnifiedEdge edge) {
  if (!nodes_.contains(edge.source) || !nodes_.contains(edge.target)) {
    throw DataError("edge (" + edge.source + ", " + edge.predicate + ", " + edge.target +
                    ") has an unknown endpoint");
  }
  if (edge.source == edge.target) return false;
  EdgeKey key{edge.source, edge.predicate, edge.target};
  auto [it, fresh] = edges_.try_emplace(key, edge);
  if (fresh) return true;
  auto& existing = it->second;
  existing.confidence = std::max(existing.confidence, edge.confidence);
  if (existing.origin != edge.origin) existing.origin = EdgeOrigin::both;
  return false;
}

bool UnifiedGraph::remove_node(std::string_view id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) return false;
  nodes_.erase(it);
  std::erase_if(edges_, [&](const auto& kv) {
    return kv.second.source == id || kv.second.target == id;
  });
  return true;
}

const UnifiedNode* UnifiedGraph::find(std::string_view id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

UnifiedNode* UnifiedGraph::mutable_node(std::string_view id) {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

const UnifiedNode* UnifiedGraph::find_by_commonsense_id(std::string_view commonsense_id) const {
  // Commonsense-backed nodes are keyed by their commonsense id.
  const auto* n = find(commonsense_id);
  return n && n->commonsense_id == commonsense_id ? n : nullptr;
}

std::vector<UnifiedEdge> UnifiedGraph::edges() const {
  std::vector<UnifiedEdge> out;
  out.reserve(edges_.size());
  for (const auto& [_, e] : edges_) out.push_back(e);
  return out;
}

void UnifiedGraph::validate() const {
  std::set<std::string, std::less<>> scene_ids, commonsense_ids;
  for (const auto& [id, n] : nodes_) {
    if (id != n.id) throw DataError("unified node key mismatch for '" + id + "'");
    const bool has_scene = !n.scene_id.empty();
    const bool has_commonsense = !n.commonsense_id.empty();
    const bool consistent =
        (n.origin == NodeOrigin::scene && has_scene && !has_commonsense) ||
        (n.origin == NodeOrigin::commonsense && !has_scene && has_commonsense) ||
        (n.origin == NodeOrigin::fused && has_scene && has_commonsense && n.alignment);
    if (!consistent) throw DataError("unified node '" + id + "' has inconsistent origin");
    if (has_commonsense && n.commonsense_id != id) {
      throw DataError("commonsense-backed node '" + id + "' is not keyed by its commonsense id");
    }
    if (has_scene && !scene_ids.insert(n.scene_id).second) {
      throw DataError("scene id '" + n.scene_id + "' appears in two nodes");
    }
    if (has_commonsense && !commonsense_ids.insert(n.commonsense_id).second) {
      throw DataError("commonsense id '" + n.commonsense_id + "' appears in two nodes");
    }
  }
  for (const auto& [_, e] : edges_) {
    if (!nodes_.contains(e.source) || !nodes_.contains(e.target)) {
      throw DataError("dangling edge (" + e.source + ", " + e.predicate + ", " + e.target + ")");
    }
  }
}

UnifiedGraph fuse(const SceneGraph& scene, const SubgraphRef& commonsense,
                  const std::vector<AlignmentPair>& matches) {
  std::map<std::string, const AlignmentPair*, std::less<>> by_scene, by_commonsense;
  for (const auto& m : matches) {
    if (!scene.find(m.scene_id)) throw DataError("match names unknown scene id '" + m.scene_id + "'");
    if (!commonsense.contains(m.commonsense_id)) {
      throw DataError("match names unknown commonsense id '" + m.commonsense_id + "'");
    }
    if (!by_scene.emplace(m.scene_id, &m).second ||
        !by_commonsense.emplace(m.commonsense_id, &m).second) {
      throw DataError("match (" + m.scene_id + ", " + m.commonsense_id + ") is not one-to-one");
    }
  }

  UnifiedGraph g;
  g.image_ref = scene.image_ref;

  for (const auto& id : commonsense.nodes) {
    const auto& e = *commonsense.parent->find(id);
    UnifiedNode n;
    n.id = id;
    n.origin = NodeOrigin::commonsense;
    n.label = e.label;
    n.description = e.description;
    n.type = e.type;
    n.image_refs = e.image_refs;
    n.metadata = e.metadata;
    n.commonsense_id = id;
    g.add_node(std::move(n));
  }

  std::map<std::string, std::string, std::less<>> scene_node_id;
  for (const auto& se : scene.entities) {
    if (auto it = by_scene.find(se.entity_id); it != by_scene.end()) {
      const auto& m = *it->second;
      auto& n = *g.mutable_node(m.commonsense_id);
      n.origin = NodeOrigin::fused;
      n.type = std::string(to_string(se.category));
      n.bbox = se.bbox;
      n.scene_confidence = se.confidence;
      n.scene_id = se.entity_id;
      n.alignment = m;
      scene_node_id[se.entity_id] = m.commonsense_id;
      continue;
    }
    UnifiedNode n;
    const bool collides = commonsense.parent && commonsense.parent->contains(se.entity_id);
    n.id = collides ? "scene:" + se.entity_id : se.entity_id;
    n.origin = NodeOrigin::scene;
    n.label = se.name;
    n.type = std::string(to_string(se.category));
    n.bbox = se.bbox;
    n.scene_confidence = se.confidence;
    n.scene_id = se.entity_id;
    scene_node_id[se.entity_id] = n.id;
    g.add_node(std::move(n));
  }

  for (auto i : commonsense.relations) {
    const auto& r = commonsense.parent->relations()[i];
    g.add_edge({r.source, r.target, r.predicate, r.confidence, EdgeOrigin::commonsense});
  }
  for (const auto& r : scene.relations) {
    g.add_edge({scene_node_id.at(r.subject_id), scene_node_id.at(r.object_id), r.predicate,
                r.confidence, EdgeOrigin::scene});
  }
  return g;
}

namespace {

std::string format_bbox(const BBox& b) {
  return "[" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " + std::to_string(b.x2) +
         ", " + std::to_string(b.y2) + "]";
}

std::string node_line(const UnifiedNode& n) {
  std::string line = "[" + std::string(to_string(n.origin)) + "] " + n.label;
  line += " — " + (n.type.empty() ? std::string("entity") : n.type);
  line += "; id=" + n.id;
  if (n.bbox) line += "; bbox=" + format_bbox(*n.bbox);
  if (!n.description.empty()) line += "; desc=" + n.description;
  return line;
}

template <class NodePred>
void append_section(std::string& out, std::string_view title, const UnifiedGraph& g, NodePred keep) {
  out += title;
  out += "\nNODES\n";
  for (const auto& [_, n] : g.nodes()) {
    if (keep(n)) out += node_line(n) + "\n";
  }
  out += "EDGES\n";
  for (const auto& e : g.edges()) {
    const auto& s = *g.find(e.source);
    const auto& t = *g.find(e.target);
    if (!keep(s) || !keep(t)) continue;
    out += "(" + s.label + ", " + e.predicate + ", " + t.label + ") [" +
           std::string(to_string(e.origin)) + "]\n";
  }
}

}  // namespace

std::string serialize_context(const UnifiedGraph& graph, ContextMode mode) {
  std::string out;
  if (mode == ContextMode::fused) {
    append_section(out, "UNIFIED GRAPH", graph, [](const UnifiedNode&) { return true; });
    return out;
  }
  append_section(out, "SCENE GRAPH", graph,
                 [](const UnifiedNode& n) { return n.origin == NodeOrigin::scene; });
  out += "\n";
  append_section(out, "COMMONSENSE GRAPH", graph,
                 [](const UnifiedNode& n) { return n.origin != NodeOrigin::scene; });
  return out;
}

}  // namespace kgvip
