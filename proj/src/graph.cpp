// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "kgvip/embedding.hpp"
#include "kgvip/error.hpp"
#include "kgvip/gateway.hpp"
#include "kgvip/prompts.hpp"
#include "kgvip/util.hpp"

namespace kgvip {

using nlohmann::json;

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // The smaller index becomes the root, so roots are the minimum member.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

struct Indexed {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> pos;
};

Indexed index_entities(const Graph& g) {
  Indexed out;
  out.ids.reserve(g.entity_count());
  for (const auto& [id, _] : g.entities()) {
    out.pos.emplace(id, out.ids.size());
    out.ids.push_back(id);
  }
  return out;
}

// Union-find over relations, roots are minimum entity index.
DisjointSets weak_components(const Graph& g, const Indexed& idx) {
  DisjointSets sets(idx.ids.size());
  for (const auto& r : g.relations()) sets.unite(idx.pos.at(r.source), idx.pos.at(r.target));
  return sets;
}

json entity_to_json(const Entity& e) {
  return {{"id", e.id},
          {"label", e.label},
          {"description", e.description},
          {"type", e.type},
          {"image_refs", e.image_refs},
          {"metadata", e.metadata}};
}

json relation_to_json(const Relation& r) {
  json j = {{"source", r.source},
            {"target", r.target},
            {"predicate", r.predicate},
            {"confidence", r.confidence}};
  j["evidence"] = r.evidence ? json(*r.evidence) : json(nullptr);
  return j;
}

std::string get_string(const json& j, const char* key, bool required, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) {
    if (required) throw DataError(where + ": missing field '" + key + "'");
    return {};
  }
  if (!j[key].is_string()) throw DataError(where + ": field '" + key + "' must be a string");
  return j[key].get<std::string>();
}

Entity entity_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw DataError(where + ": node record must be an object");
  Entity e;
  e.id = get_string(j, "id", true, where);
  e.label = get_string(j, "label", true, where);
  e.description = get_string(j, "description", false, where);
  e.type = get_string(j, "type", false, where);
  if (j.contains("image_refs") && !j["image_refs"].is_null()) {
    const auto& refs = j["image_refs"];
    if (!refs.is_array()) throw DataError(where + ": field 'image_refs' must be an array");
    for (const auto& r : refs) {
      if (!r.is_string()) throw DataError(where + ": image_refs entries must be strings");
      e.image_refs.push_back(r.get<std::string>());
    }
  }
  if (j.contains("metadata") && !j["metadata"].is_null()) {
    const auto& md = j["metadata"];
    if (!md.is_object()) throw DataError(where + ": field 'metadata' must be an object");
    for (const auto& [k, v] : md.items()) {
      e.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return e;
}

Relation relation_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw DataError(where + ": edge record must be an object");
  Relation r;
  r.source = get_string(j, "source", true, where);
  r.target = get_string(j, "target", true, where);
  r.predicate = get_string(j, "predicate", true, where);
  if (j.contains("confidence") && !j["confidence"].is_null()) {
    if (!j["confidence"].is_number()) throw DataError(where + ": field 'confidence' must be a number");
    r.confidence = j["confidence"].get<double>();
  }
  if (j.contains("evidence") && !j["evidence"].is_null()) {
    r.evidence = get_string(j, "evidence", false, where);
  }
  return r;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> out;
  const auto lines = split_lines(read_file(path));
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) {
      out.emplace_back(nullptr);
      continue;
    }
    try {
      out.push_back(json::parse(lines[n]));
    } catch (const json::parse_error& e) {
      throw DataError(path.filename().string() + ":" + std::to_string(n + 1) +
                      ": parse error: " + e.what());
    }
  }
  return out;
}

void append_unique(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  for (const auto& s : src) {
    if (std::find(dst.begin(), dst.end(), s) == dst.end()) dst.push_back(s);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

void Graph::add_entity(Entity entity) {
  if (entity.id.empty()) throw DataError("entity id must be non-empty");
  if (entity.label.empty()) throw DataError("entity '" + entity.id + "' has an empty label");
  if (entities_.contains(entity.id)) throw DataError("duplicate entity id '" + entity.id + "'");
  auto id = entity.id;
  entities_.emplace(std::move(id), std::move(entity));
}

bool Graph::add_relation(Relation relation) {
  for (const auto* end : {&relation.source, &relation.target}) {
    if (!entities_.contains(*end)) {
      throw DataError("relation references unknown entity '" + *end + "'");
    }
  }
  if (!(relation.confidence >= 0.0 && relation.confidence <= 1.0)) {
    throw DataError("relation (" + relation.source + ", " + relation.predicate + ", " +
                    relation.target + ") has confidence outside [0,1]");
  }
  if (relation.source == relation.target) return false;
  TripleKey key{relation.source, relation.predicate, relation.target};
  if (auto it = triple_index_.find(key); it != triple_index_.end()) {
    auto& existing = relations_[it->second];
    if (relation.confidence > existing.confidence) {
      existing.confidence = relation.confidence;
      if (relation.evidence) existing.evidence = relation.evidence;
    }
    return false;
  }
  triple_index_.emplace(std::move(key), relations_.size());
  relations_.push_back(std::move(relation));
  return true;
}

const Entity* Graph::find(std::string_view id) const {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : &it->second;
}

void Graph::validate() const {
  std::set<TripleKey> seen;
  for (const auto& [id, e] : entities_) {
    if (id.empty() || id != e.id) throw DataError("entity key/id mismatch for '" + id + "'");
    if (e.label.empty()) throw DataError("entity '" + id + "' has an empty label");
  }
  for (const auto& r : relations_) {
    if (!contains(r.source)) throw DataError("dangling relation source '" + r.source + "'");
    if (!contains(r.target)) throw DataError("dangling relation target '" + r.target + "'");
    if (r.source == r.target) throw DataError("self-loop on '" + r.source + "'");
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) throw DataError("confidence outside [0,1]");
    if (!seen.insert({r.source, r.predicate, r.target}).second) {
      throw DataError("duplicate triple (" + r.source + ", " + r.predicate + ", " + r.target + ")");
    }
  }
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::text_guided: return "text_guided";
    case Provenance::vision_guided: return "vision_guided";
    case Provenance::scene_pruned: return "scene_pruned";
    case Provenance::unified: return "unified";
    case Provenance::adhoc: return "adhoc";
  }
  return "adhoc";
}

Graph SubgraphRef::materialize() const {
  Graph g;
  if (!parent) return g;
  for (const auto& id : nodes) g.add_entity(*parent->find(id));
  for (auto i : relations) g.add_relation(parent->relations()[i]);
  return g;
}

// ---------------------------------------------------------------------------
// Persistence

Graph load_graph(const std::filesystem::path& dir, const LoadOptions& options) {
  Graph g;
  const auto nodes = read_jsonl(dir / "nodes.jsonl");
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    if (nodes[n].is_null()) continue;
    const std::string where = "nodes.jsonl:" + std::to_string(n + 1);
    try {
      g.add_entity(entity_from_json(nodes[n], where));
    } catch (const DataError& e) {
      const std::string msg = e.what();
      throw DataError(msg.starts_with(where) ? msg : where + ": " + msg);
    }
  }
  const auto edges = read_jsonl(dir / "edges.jsonl");
  for (std::size_t n = 0; n < edges.size(); ++n) {
    if (edges[n].is_null()) continue;
    const std::string where = "edges.jsonl:" + std::to_string(n + 1);
    try {
      g.add_relation(relation_from_json(edges[n], where));
    } catch (const DataError& e) {
      const std::string msg = e.what();
      throw DataError(msg.starts_with(where) ? msg : where + ": " + msg);
    }
  }

  const auto manifest_path = dir / "manifest.json";
  if (options.verify_manifest && std::filesystem::exists(manifest_path)) {
    json manifest;
    try {
      manifest = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
      throw DataError("manifest.json: parse error: " + std::string(e.what()));
    }
    const auto stats = graph_stats(g);
    auto check = [&](const char* key, std::size_t actual) {
      if (!manifest.contains(key)) return;
      const auto expected = manifest[key].get<std::size_t>();
      if (expected != actual) {
        throw DataError("manifest mismatch: " + std::string(key) + " expected " +
                        std::to_string(expected) + ", loaded " + std::to_string(actual));
      }
    };
    check("nodes", stats.nodes);
    check("edges", stats.edges);
    check("image_refs", stats.image_refs);
  }
  return g;
}

void save_graph(const Graph& graph, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::string nodes;
  for (const auto& [_, e] : graph.entities()) {
    nodes += entity_to_json(e).dump();
    nodes += '\n';
  }
  std::string edges;
  for (const auto& r : graph.relations()) {
    edges += relation_to_json(r).dump();
    edges += '\n';
  }
  const auto stats = graph_stats(graph);
  const json manifest = {{"nodes", stats.nodes}, {"edges", stats.edges}, {"image_refs", stats.image_refs}};
  write_file(dir / "nodes.jsonl", nodes);
  write_file(dir / "edges.jsonl", edges);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

GraphStats graph_stats(const Graph& graph) {
  GraphStats s;
  s.nodes = graph.entity_count();
  s.edges = graph.relation_count();
  for (const auto& [_, e] : graph.entities()) s.image_refs += e.image_refs.size();
  const auto idx = index_entities(graph);
  auto sets = weak_components(graph, idx);
  for (std::size_t i = 0; i < idx.ids.size(); ++i) {
    if (sets.find(i) == i) ++s.components;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Construction-time refinement

Graph extract_graph_from_text(std::string_view document, Gateway& gateway) {
  if (trim(document).empty()) return {};
  const auto request =
      gateway.make_request(Role::chat, templates::kTripleExtraction, {{"document", std::string(document)}});
  return gateway.chat_with_retries(request, [](const std::string& body) {
    const json parsed = parse_structured(body, "text_graph");
    Graph g;
    try {
      for (const auto& e : parsed["entities"]) {
        Entity ent;
        ent.id = e["id"].get<std::string>();
        ent.label = e["label"].get<std::string>();
        if (ent.label.empty()) ent.label = ent.id;
        ent.type = e["type"].get<std::string>();
        ent.description = e["description"].get<std::string>();
        if (!g.contains(ent.id)) g.add_entity(std::move(ent));
      }
      for (const auto& r : parsed["relations"]) {
        Relation rel;
        rel.source = r["source"].get<std::string>();
        rel.target = r["target"].get<std::string>();
        rel.predicate = r["predicate"].get<std::string>();
        rel.confidence = r["confidence"].get<double>();
        for (const auto* end : {&rel.source, &rel.target}) {
          if (!g.contains(*end)) g.add_entity({*end, *end, "", "", {}, {}});
        }
        g.add_relation(std::move(rel));
      }
    } catch (const OutputParseError&) {
      throw;
    } catch (const DataError& e) {
      throw OutputParseError(std::string("extracted graph is invalid: ") + e.what());
    }
    return g;
  });
}

Graph merge_graphs(const Graph& a, const Graph& b) {
  Graph out;
  for (const auto& [id, e] : a.entities()) {
    Entity merged = e;
    if (const auto* other = b.find(id)) {
      append_unique(merged.image_refs, other->image_refs);
      for (const auto& [k, v] : other->metadata) merged.metadata.try_emplace(k, v);
    }
    out.add_entity(std::move(merged));
  }
  for (const auto& [id, e] : b.entities()) {
    if (!out.contains(id)) out.add_entity(e);
  }
  for (const auto& r : a.relations()) out.add_relation(r);
  for (const auto& r : b.relations()) out.add_relation(r);
  return out;
}

Graph merge_duplicate_entities(const Graph& graph, const VectorIndex& text_index, double threshold) {
  const auto idx = index_entities(graph);
  std::vector<const EmbeddingVector*> vecs;
  vecs.reserve(idx.ids.size());
  for (const auto& id : idx.ids) {
    const auto* v = text_index.find(id);
    if (!v) throw DataError("missing text vector for entity '" + id + "'");
    vecs.push_back(v);
  }

  DisjointSets sets(idx.ids.size());
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      if (cosine(*vecs[i], *vecs[j]) >= threshold) sets.unite(i, j);
    }
  }

  // Members are visited in ascending id order, so the root (minimum id)
  // comes first in every group.
  std::map<std::size_t, Entity> merged;
  for (std::size_t i = 0; i < idx.ids.size(); ++i) {
    const auto& e = *graph.find(idx.ids[i]);
    const auto root = sets.find(i);
    auto [it, fresh] = merged.try_emplace(root, e);
    if (fresh) continue;
    auto& m = it->second;
    if (e.description.size() > m.description.size()) m.description = e.description;
    append_unique(m.image_refs, e.image_refs);
    for (const auto& [k, v] : e.metadata) m.metadata.try_emplace(k, v);
  }

  Graph out;
  for (auto& [_, e] : merged) out.add_entity(std::move(e));
  for (const auto& r : graph.relations()) {
    Relation rel = r;
    rel.source = idx.ids[sets.find(idx.pos.at(r.source))];
    rel.target = idx.ids[sets.find(idx.pos.at(r.target))];
    out.add_relation(std::move(rel));
  }
  return out;
}

Graph prune_low_confidence(const Graph& graph, double threshold) {
  Graph out;
  for (const auto& [_, e] : graph.entities()) out.add_entity(e);
  for (const auto& r : graph.relations()) {
    if (r.confidence >= threshold) out.add_relation(r);
  }
  return out;
}

Graph giant_component(const Graph& graph) {
  if (graph.empty()) return {};
  const auto idx = index_entities(graph);
  auto sets = weak_components(graph, idx);
  std::vector<std::size_t> size(idx.ids.size(), 0);
  for (std::size_t i = 0; i < idx.ids.size(); ++i) ++size[sets.find(i)];
  // Roots are minimum members, so scanning in index order breaks ties by
  // smallest id.
  std::size_t best = 0;
  for (std::size_t i = 1; i < size.size(); ++i) {
    if (size[i] > size[best]) best = i;
  }
  Graph out;
  for (std::size_t i = 0; i < idx.ids.size(); ++i) {
    if (sets.find(i) == best) out.add_entity(*graph.find(idx.ids[i]));
  }
  for (const auto& r : graph.relations()) {
    if (out.contains(r.source)) out.add_relation(r);
  }
  return out;
}

EnrichResult attach_images(const Graph& graph, const std::vector<ImageAttachment>& manifest) {
  std::map<std::string, std::vector<std::string>, std::less<>> extra;
  EnrichResult result;
  for (const auto& a : manifest) {
    if (!graph.contains(a.entity_id)) {
      result.unknown_entities.push_back(a.entity_id);
      continue;
    }
    append_unique(extra[a.entity_id], a.image_refs);
  }
  for (const auto& [id, e] : graph.entities()) {
    Entity copy = e;
    if (auto it = extra.find(id); it != extra.end()) {
      const auto before = copy.image_refs.size();
      append_unique(copy.image_refs, it->second);
      result.attached += copy.image_refs.size() - before;
    }
    result.graph.add_entity(std::move(copy));
  }
  for (const auto& r : graph.relations()) result.graph.add_relation(r);
  return result;
}

std::vector<ImageAttachment> load_image_manifest(const std::filesystem::path& path) {
  std::vector<ImageAttachment> out;
  const auto records = read_jsonl(path);
  for (std::size_t n = 0; n < records.size(); ++n) {
    const auto& j = records[n];
    if (j.is_null()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(n + 1);
    ImageAttachment a;
    a.entity_id = get_string(j, "entity_id", true, where);
    if (j.contains("image_refs")) {
      if (!j["image_refs"].is_array()) throw DataError(where + ": 'image_refs' must be an array");
      for (const auto& r : j["image_refs"]) a.image_refs.push_back(r.get<std::string>());
    }
    if (j.contains("image_ref")) a.image_refs.push_back(get_string(j, "image_ref", true, where));
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subgraph algebra

std::map<std::string, std::vector<std::string>, std::less<>> undirected_neighbors(const Graph& graph) {
  std::map<std::string, std::vector<std::string>, std::less<>> adj;
  for (const auto& [id, _] : graph.entities()) adj[id];
  for (const auto& r : graph.relations()) {
    adj[r.source].push_back(r.target);
    adj[r.target].push_back(r.source);
  }
  for (auto& [_, v] : adj) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return adj;
}

SubgraphRef induced_subgraph(const GraphPtr& graph, const std::set<std::string, std::less<>>& nodes) {
  if (!graph) throw Error("induced_subgraph: null parent graph");
  for (const auto& id : nodes) {
    if (!graph->contains(id)) throw DataError("unknown entity id '" + id + "'");
  }
  SubgraphRef ref;
  ref.parent = graph;
  ref.nodes = nodes;
  const auto& rels = graph->relations();
  for (std::size_t i = 0; i < rels.size(); ++i) {
    if (nodes.contains(rels[i].source) && nodes.contains(rels[i].target)) ref.relations.push_back(i);
  }
  return ref;
}

SubgraphRef k_hop_subgraph(const GraphPtr& graph, const std::set<std::string, std::less<>>& seeds,
                           std::size_t k) {
  if (!graph) throw Error("k_hop_subgraph: null parent graph");
  for (const auto& s : seeds) {
    if (!graph->contains(s)) throw DataError("unknown seed id '" + s + "'");
  }
  const auto adj = undirected_neighbors(*graph);
  std::set<std::string, std::less<>> visited(seeds.begin(), seeds.end());
  std::vector<std::string> frontier(seeds.begin(), seeds.end());
  for (std::size_t depth = 0; depth < k && !frontier.empty(); ++depth) {
    std::vector<std::string> next;
    for (const auto& id : frontier) {
      for (const auto& nb : adj.find(id)->second) {
        if (visited.insert(nb).second) next.push_back(nb);
      }
    }
    frontier = std::move(next);
  }
  return induced_subgraph(graph, visited);
}

SubgraphRef subgraph_union(const SubgraphRef& a, const SubgraphRef& b) {
  if (a.parent.get() != b.parent.get()) throw Error("subgraph_union: parent graphs differ");
  std::set<std::string, std::less<>> nodes = a.nodes;
  nodes.insert(b.nodes.begin(), b.nodes.end());
  SubgraphRef out = a.parent ? induced_subgraph(a.parent, nodes) : SubgraphRef{};
  out.provenance = Provenance::unified;
  return out;
}

}  // namespace kgvip
