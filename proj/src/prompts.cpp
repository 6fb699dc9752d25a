// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/prompts.hpp"

#include <cctype>
#include <set>

#include "kgvip/error.hpp"

namespace kgvip {
namespace {

const std::map<std::string, std::string, std::less<>>& registry() {
  static const std::map<std::string, std::string, std::less<>> kTemplates = {
      {std::string(templates::kSceneGraph),
       R"(You are a visual grounding + relation extraction system.
Give you an Image. Your task is to extract key objects and relationships from this Image. Image size: width={w}px, height={h}px.
Return ONLY one valid JSON object.

Rules:
- Use bbox_px: [x1,y1,x2,y2] in pixels.
- 0 <= x1 < x2 <= {w}, 0 <= y1 < y2 <= {h}.
- confidence in [0,1]. Omit uncertain ones.

Schema:
{
  "entities": [
    {
      "entity_id": "e1",
      "name": "person",
      "category": "person|object|animal|other",
      "bbox_px": [10, 20, 100, 200],
      "confidence": 0.90
    }
  ],
  "relations": [
    {
      "subject_id": "e1",
      "predicate": "next_to",
      "object_id": "e2",
      "confidence": 0.70,
      "evidence": "Two persons are adjacent."
    }
  ]
})"},
      {std::string(templates::kQueryPruning),
       R"(You are selecting which image-graph entities/relations should be kept for further commonsense graph retrieval. You can use the information in a text-guided commonsense subgraph.

Text-guided commonsense subgraph: {commonsense_subgraph}
Scene graph entities: {scene_entities}
Scene graph relations: {scene_relations}

Task: Decide which scene graph entities and scene graph relations are relevant to the text-guided commonsense subgraph. Return ONLY valid JSON with schema:

Schema:
{
  "keep_entities": [
    "unique_name1", ...
  ],
  "keep_relations": [
    {
      "s": "unique_name1",
      "p": "predicate",
      "o": "unique_name2"
    }
  ]
})"},
      {std::string(templates::kGraphRefinement),
       R"(You are a knowledge graph analysis expert. Please analyze whether the current subgraph adequately answers the query question and provide optimization suggestions.

Query: "{query}"
Query Image: {query_image}

Current Subgraph Information:
- Total Nodes: {node_count}
- Total Edges: {edge_count}

Current Subgraph:
{graph}

Please analyze and provide optimization suggestions, focusing on:
- Does the subgraph adequately cover the key aspects of the query?
- Which nodes are core nodes that need to be further searched, and which may be noise nodes that need to be deleted?

Please respond strictly in the following JSON format, without any additional content:

Schema:
{
  "analysis": "Detailed analysis...",
  "recommendation": "Expand|Prune|Terminate",
  "nodes_to_expand": [],
  "nodes_to_prune": [],
  "reason": "Decision rationale",
  "confidence": 0.8
})"},
      {std::string(templates::kVqaGenerator),
       R"(You are a Visual Question Answering (VQA) data generator.

Inputs:
- (1) ONE scene image (the question image)
- (2) Scene description (characters, plot)
- (3) Reference facts (entities, attributes)

Task:
Generate one question grounded in the scene image and the scene description.
The question should not be fully answerable from the Image alone, and is expected to benefit from the provided reference facts (retrieved from a commonsense graph).

Instructions:
Look at the scene image first and choose a salient character (prefer one that is clearly visible).

Guidelines (Person-centric questions):
Try to involve at least one aspect that is typically not directly visible in the Image, such as name/identity, actor/portrays, occupation/role, condition/suffers from, ownership, or other personal attributes mentioned in the reference facts.

Schema:
{
  "qa_pairs": [
    {
      "Question": "...",
      "Answer": "..."
    }
  ]
}

Scene Image: {scene_image}
Scene description: {scene_description}
Reference facts: {reference_facts})"},
      {std::string(templates::kQueryEntities),
       R"(Identify the entities mentioned in the question below: people, characters, objects, animals, places or concepts that could be looked up in a knowledge graph. Use short noun phrases copied from the question.

Question: {question}

Return ONLY valid JSON with schema:
{
  "entities": ["entity1", "entity2"]
})"},
      {std::string(templates::kTripleExtraction),
       R"(Extract the salient entities and the explicit relations between them from the text below. Only include relations that the text states.

Text:
{document}

Return ONLY valid JSON with schema:
{
  "entities": [
    {"id": "short_unique_id", "label": "name", "type": "category", "description": "one sentence"}
  ],
  "relations": [
    {"source": "short_unique_id", "predicate": "relation", "target": "short_unique_id", "confidence": 0.9}
  ]
})"},
      {std::string(templates::kJudge),
       R"(You are grading an answer to a visual question. Compare the candidate answer with the reference answer in the context of the question, and rate how correct and relevant the candidate is on a scale from 0 to 100, where 100 means fully equivalent to the reference and 0 means wrong or unrelated.

Question: {question}
Reference answer: {reference}
Candidate answer: {candidate}

Return ONLY valid JSON with schema:
{
  "score": 0
})"},
      {std::string(templates::kAnswer),
       R"(You are a visual question answering assistant. Look at the attached image and answer the question concisely.
{context}
Question: {question}
Answer:)"},
      {std::string(templates::kRetrySuffix),
       R"(

Your previous response could not be used: {error}
Return ONLY the corrected JSON object.)"},
  };
  return kTemplates;
}

bool is_slot_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_slot_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of the slot name starting at text[pos] == '{', or 0 if none.
std::size_t slot_length(std::string_view text, std::size_t pos) {
  std::size_t i = pos + 1;
  if (i >= text.size() || !is_slot_start(text[i])) return 0;
  while (i < text.size() && is_slot_char(text[i])) ++i;
  if (i >= text.size() || text[i] != '}') return 0;
  return i - pos - 1;
}

}  // namespace

const std::string& prompt_template(std::string_view template_id) {
  const auto& reg = registry();
  auto it = reg.find(template_id);
  if (it == reg.end()) throw DataError("unknown prompt template '" + std::string(template_id) + "'");
  return it->second;
}

std::vector<std::string> template_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, _] : registry()) ids.push_back(id);
  return ids;
}

std::vector<std::string> template_slots(std::string_view text) {
  std::vector<std::string> slots;
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    if (const auto len = slot_length(text, i); len > 0) {
      std::string name(text.substr(i + 1, len));
      if (seen.insert(name).second) slots.push_back(std::move(name));
      i += len + 1;
    }
  }
  return slots;
}

std::string render_template(std::string_view text, const Bindings& bindings) {
  std::set<std::string, std::less<>> used;
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{') {
      if (const auto len = slot_length(text, i); len > 0) {
        const auto name = text.substr(i + 1, len);
        auto it = bindings.find(name);
        if (it == bindings.end()) throw DataError("missing binding for slot '" + std::string(name) + "'");
        out += it->second;
        used.insert(std::string(name));
        i += len + 1;
        continue;
      }
    }
    out.push_back(text[i]);
  }
  for (const auto& [key, _] : bindings) {
    if (!used.contains(key)) throw DataError("binding '" + key + "' does not match any slot");
  }
  return out;
}

std::string render_prompt(std::string_view template_id, const Bindings& bindings) {
  return render_template(prompt_template(template_id), bindings);
}

}  // namespace kgvip
