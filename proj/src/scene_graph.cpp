// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/scene_graph.hpp"

#include <cmath>
#include <set>

#include "kgvip/error.hpp"
#include "kgvip/gateway.hpp"
#include "kgvip/prompts.hpp"

namespace kgvip {

std::string_view to_string(SceneCategory c) {
  switch (c) {
    case SceneCategory::person: return "person";
    case SceneCategory::object: return "object";
    case SceneCategory::animal: return "animal";
    case SceneCategory::other: return "other";
  }
  return "other";
}

std::optional<SceneCategory> scene_category_from_string(std::string_view s) {
  if (s == "person") return SceneCategory::person;
  if (s == "object") return SceneCategory::object;
  if (s == "animal") return SceneCategory::animal;
  if (s == "other") return SceneCategory::other;
  return std::nullopt;
}

bool bbox_valid(const BBox& b, int width, int height) {
  return 0 <= b.x1 && b.x1 < b.x2 && b.x2 <= width && 0 <= b.y1 && b.y1 < b.y2 && b.y2 <= height;
}

const SceneEntity* SceneGraph::find(std::string_view entity_id) const {
  for (const auto& e : entities) {
    if (e.entity_id == entity_id) return &e;
  }
  return nullptr;
}

void SceneGraph::validate() const {
  std::set<std::string, std::less<>> ids;
  for (const auto& e : entities) {
    if (e.entity_id.empty()) throw DataError("scene entity with empty id");
    if (!ids.insert(e.entity_id).second) throw DataError("duplicate scene entity id '" + e.entity_id + "'");
    if (!bbox_valid(e.bbox, width, height)) throw DataError("bbox violation on '" + e.entity_id + "'");
    if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) {
      throw DataError("confidence outside [0,1] on '" + e.entity_id + "'");
    }
  }
  for (const auto& r : relations) {
    if (!ids.contains(r.subject_id) || !ids.contains(r.object_id)) {
      throw DataError("scene relation (" + r.subject_id + ", " + r.predicate + ", " + r.object_id +
                      ") has a dangling endpoint");
    }
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) throw DataError("relation confidence outside [0,1]");
  }
}

SceneParseResult parse_scene_graph(std::string_view json_text, int width, int height) {
  if (width <= 0 || height <= 0) throw DataError("image size must be positive");
  const json j = parse_structured(json_text, "scene_graph");

  SceneParseResult result;
  auto& g = result.graph;
  g.width = width;
  g.height = height;
  std::set<std::string, std::less<>> ids;
  for (std::size_t i = 0; i < j["entities"].size(); ++i) {
    const auto& e = j["entities"][i];
    const std::string field = "entities[" + std::to_string(i) + "]";
    SceneEntity ent;
    ent.entity_id = e["entity_id"].get<std::string>();
    ent.name = e["name"].get<std::string>();
    ent.category = *scene_category_from_string(e["category"].get<std::string>());
    const auto& b = e["bbox_px"];
    ent.bbox = {static_cast<int>(std::lround(b[0].get<double>())),
                static_cast<int>(std::lround(b[1].get<double>())),
                static_cast<int>(std::lround(b[2].get<double>())),
                static_cast<int>(std::lround(b[3].get<double>()))};
    ent.confidence = e["confidence"].get<double>();
    if (ent.entity_id.empty()) throw OutputParseError(field + ".entity_id is empty");
    if (!ids.insert(ent.entity_id).second) {
      throw OutputParseError(field + ": duplicate entity_id '" + ent.entity_id + "'");
    }
    if (!bbox_valid(ent.bbox, width, height)) {
      throw OutputParseError(field + ".bbox_px [" + std::to_string(ent.bbox.x1) + "," +
                             std::to_string(ent.bbox.y1) + "," + std::to_string(ent.bbox.x2) + "," +
                             std::to_string(ent.bbox.y2) + "] violates 0 <= x1 < x2 <= " +
                             std::to_string(width) + ", 0 <= y1 < y2 <= " + std::to_string(height));
    }
    if (!(ent.confidence >= 0.0 && ent.confidence <= 1.0)) {
      throw OutputParseError(field + ".confidence must be in [0,1]");
    }
    g.entities.push_back(std::move(ent));
  }
  for (std::size_t i = 0; i < j["relations"].size(); ++i) {
    const auto& r = j["relations"][i];
    SceneRelation rel;
    rel.subject_id = r["subject_id"].get<std::string>();
    rel.object_id = r["object_id"].get<std::string>();
    rel.predicate = r["predicate"].get<std::string>();
    rel.confidence = r["confidence"].get<double>();
    if (r.contains("evidence")) rel.evidence = r["evidence"].get<std::string>();
    if (!(rel.confidence >= 0.0 && rel.confidence <= 1.0)) {
      throw OutputParseError("relations[" + std::to_string(i) + "].confidence must be in [0,1]");
    }
    if (!ids.contains(rel.subject_id) || !ids.contains(rel.object_id)) {
      ++result.dropped_relations;
      continue;
    }
    g.relations.push_back(std::move(rel));
  }
  return result;
}

std::string serialize_scene_graph(const SceneGraph& graph) {
  json out = {{"entities", json::array()}, {"relations", json::array()}};
  for (const auto& e : graph.entities) {
    out["entities"].push_back({{"entity_id", e.entity_id},
                               {"name", e.name},
                               {"category", to_string(e.category)},
                               {"bbox_px", {e.bbox.x1, e.bbox.y1, e.bbox.x2, e.bbox.y2}},
                               {"confidence", e.confidence}});
  }
  for (const auto& r : graph.relations) {
    json rel = {{"subject_id", r.subject_id},
                {"predicate", r.predicate},
                {"object_id", r.object_id},
                {"confidence", r.confidence}};
    if (r.evidence) rel["evidence"] = *r.evidence;
    out["relations"].push_back(std::move(rel));
  }
  return out.dump(2);
}

SceneParseResult generate_scene_graph(const std::string& image_ref, int width, int height,
                                      Gateway& gateway) {
  const auto request = gateway.make_request(
      Role::vision_chat, templates::kSceneGraph,
      {{"w", std::to_string(width)}, {"h", std::to_string(height)}}, {MediaPart{image_ref, {}, {}}});
  auto result = gateway.chat_with_retries(
      request, [&](const std::string& body) { return parse_scene_graph(body, width, height); });
  result.graph.image_ref = image_ref;
  return result;
}

}  // namespace kgvip
