// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/pipeline.hpp"

#include <chrono>

#include "kgvip/error.hpp"
#include "kgvip/prompts.hpp"
#include "kgvip/util.hpp"

namespace kgvip {

json PipelineConfig::to_json() const {
  return {{"k", retrieval.k},
          {"n", retrieval.n},
          {"m", retrieval.m},
          {"link_threshold", retrieval.link_threshold},
          {"vision_mode", to_string(retrieval.vision_mode)},
          {"restart", retrieval.ranking.restart},
          {"tolerance", retrieval.ranking.tolerance},
          {"max_iterations", retrieval.ranking.max_iterations},
          {"alpha", alpha},
          {"tau", tau},
          {"refine_steps", refine_steps},
          {"scene_graph", scene_graph},
          {"text_retrieval", text_retrieval},
          {"vision_retrieval", vision_retrieval},
          {"pruning", to_string(pruning)},
          {"fusion", fusion},
          {"refinement", refinement}};
}

json AnswerRecord::to_json(bool include_timings) const {
  json j{{"id", question_id},
         {"question", question},
         {"image", image_ref},
         {"answer", answer},
         {"context", context},
         {"graph", graph},
         {"warnings", warnings}};
  j["trace"] = json::array();
  for (const auto& s : trace) j["trace"].push_back(s.to_json());
  j["failure"] = failure ? json{{"stage", failure->stage}, {"kind", failure->kind},
                                {"message", failure->message}}
                         : json(nullptr);
  if (include_timings) {
    j["timings_ms"] = json::object();
    for (const auto& t : timings) j["timings_ms"][t.stage] = t.ms;
  }
  return j;
}

json to_json(const SubgraphRef& subgraph) {
  json j{{"provenance", to_string(subgraph.provenance)}, {"nodes", subgraph.nodes}};
  j["relations"] = json::array();
  for (auto i : subgraph.relations) {
    const auto& r = subgraph.parent->relations()[i];
    j["relations"].push_back({r.source, r.predicate, r.target});
  }
  return j;
}

json to_json(const UnifiedGraph& graph) {
  json j{{"query", graph.query}, {"image", graph.image_ref}};
  j["nodes"] = json::array();
  for (const auto& [id, n] : graph.nodes()) {
    json node{{"id", id},
              {"origin", to_string(n.origin)},
              {"label", n.label},
              {"type", n.type},
              {"description", n.description}};
    if (n.bbox) node["bbox"] = {n.bbox->x1, n.bbox->y1, n.bbox->x2, n.bbox->y2};
    if (!n.scene_id.empty()) node["scene_id"] = n.scene_id;
    if (!n.commonsense_id.empty()) node["commonsense_id"] = n.commonsense_id;
    if (n.alignment) {
      node["alignment"] = {{"score", n.alignment->score},
                           {"cross_modal", n.alignment->cross_modal},
                           {"visual", n.alignment->visual},
                           {"text_only", n.alignment->text_only}};
    }
    j["nodes"].push_back(std::move(node));
  }
  j["edges"] = json::array();
  for (const auto& e : graph.edges()) {
    j["edges"].push_back({{"source", e.source},
                          {"predicate", e.predicate},
                          {"target", e.target},
                          {"confidence", e.confidence},
                          {"origin", to_string(e.origin)}});
  }
  return j;
}

json to_json(const PruneResult& pruned) {
  return {{"graph", json::parse(serialize_scene_graph(pruned.graph))},
          {"unknown_entities", pruned.unknown_entities},
          {"unmatched_relations", pruned.unmatched_relations},
          {"fallback", pruned.fallback},
          {"skipped", pruned.skipped}};
}

Pipeline::Pipeline(const KnowledgeBase& kb, PipelineConfig config, Gateway& gateway,
                   MediaResolver media)
    : kb_(kb), config_(std::move(config)), gateway_(gateway), media_(std::move(media)),
      embedder_(gateway) {
  if (!kb_.graph) throw Error("pipeline needs a commonsense graph");
  if (kb_.text_index.dim() > 0) embedder_.expect_dim(Modality::text, kb_.text_index.dim());
  if (kb_.image_index.dim() > 0) embedder_.expect_dim(Modality::image, kb_.image_index.dim());
}

void Pipeline::snapshot(const PipelineRun& run, std::string_view stage, const json& value) const {
  if (!trace_dir_) return;
  const auto dir = *trace_dir_ / run.record.question_id;
  std::filesystem::create_directories(dir);
  write_file(dir / (std::string(stage) + ".json"), value.dump(2) + "\n");
}

namespace {

class StageClock {
 public:
  StageClock(std::vector<StageTiming>& timings, std::string& current)
      : timings_(timings), current_(current) {}

  template <class Fn>
  void operator()(const char* stage, Fn&& fn) {
    current_ = stage;
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (...) {
      record(stage, start);
      throw;
    }
    record(stage, start);
  }

 private:
  void record(const char* stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - start;
    for (auto& t : timings_) {
      if (t.stage == stage) t.ms = d.count();
    }
  }

  std::vector<StageTiming>& timings_;
  std::string& current_;
};

}  // namespace

PipelineRun Pipeline::run(const std::string& question_id, const std::string& question,
                          const std::string& image_ref) {
  PipelineRun run;
  run.query.query = question;
  run.query.image_ref = image_ref;
  run.record.question_id = question_id;
  run.record.question = question;
  run.record.image_ref = image_ref;

  std::vector<StageTiming> timings;
  for (const char* s : kStageNames) timings.push_back({s, 0.0});
  std::string current;
  try {
    StageClock clock(timings, current);
    const auto& gc = kb_.graph;
    auto& rec = run.record;

    clock("scene", [&] {
      run.scene.image_ref = image_ref;
      if (!config_.scene_graph) return;
      const auto size = media_.image_size(image_ref);
      auto parsed = generate_scene_graph(image_ref, size.width, size.height, gateway_);
      run.scene = std::move(parsed.graph);
      if (parsed.dropped_relations) rec.warnings["dropped_scene_relations"] += parsed.dropped_relations;
      snapshot(run, "scene", json::parse(serialize_scene_graph(run.scene)));
    });

    clock("text_retrieval", [&] {
      run.text.subgraph.parent = gc;
      run.text.subgraph.provenance = Provenance::text_guided;
      if (!config_.text_retrieval || gc->empty()) return;
      run.text = text_guided_subgraph(gc, run.query, config_.retrieval, kb_.text_index, embedder_,
                                      gateway_);
      snapshot(run, "text_retrieval",
               {{"mentions", run.text.mentions}, {"seeds", run.text.seeds},
                {"subgraph", to_json(run.text.subgraph)}});
    });

    clock("pruning", [&] {
      run.pruned = prune_scene_graph(run.scene, run.text.subgraph, gateway_, config_.pruning, question);
      if (run.pruned.fallback) rec.warnings["pruning_fallback"] += 1;
      if (run.pruned.unknown_entities) rec.warnings["pruning_unknown_entities"] += run.pruned.unknown_entities;
      snapshot(run, "pruning", to_json(run.pruned));
    });

    clock("vision_retrieval", [&] {
      run.vision.subgraph.parent = gc;
      run.vision.subgraph.provenance = Provenance::vision_guided;
      // Crop embeddings feed both vision retrieval and fusion.
      if (!config_.vision_retrieval && !config_.fusion) return;
      run.crops = embed_scene_crops(run.pruned.graph, media_, embedder_);
      if (run.crops.skipped) rec.warnings["skipped_crops"] += run.crops.skipped;
      if (!config_.vision_retrieval || gc->empty()) return;
      const bool v2v = config_.retrieval.vision_mode == VisionMode::v2v;
      run.vision = vision_retrieve(run.crops.crops, gc, v2v ? kb_.image_index : kb_.text_index,
                                   config_.retrieval.vision_mode, config_.retrieval.m);
      json ranked = json::array();
      for (const auto& r : run.vision.ranked) ranked.push_back({r.key, r.score});
      snapshot(run, "vision_retrieval", {{"ranked", ranked}, {"subgraph", to_json(run.vision.subgraph)}});
    });

    clock("union", [&] {
      run.commonsense = unify_commonsense(run.text.subgraph, run.vision.subgraph);
      snapshot(run, "union", to_json(run.commonsense));
    });

    clock("fusion", [&] {
      if (config_.fusion) {
        const EntityVectors vectors(kb_.text_index, kb_.image_index);
        run.matches = match_entities(run.crops.crops, run.commonsense, config_.alpha, config_.tau, vectors);
      }
      run.fused = fuse(run.pruned.graph, run.commonsense, run.matches);
      run.fused.query = question;
      run.fused.image_ref = image_ref;
      run.fused.validate();
      snapshot(run, "fusion", to_json(run.fused));
    });

    clock("refinement", [&] {
      run.refined.graph = run.fused;
      if (!config_.refinement || config_.refine_steps == 0) return;
      run.refined = refine(run.fused, *gc, gateway_, config_.refine_steps, context_mode());
      rec.trace = run.refined.trace;
      if (!run.refined.warnings.empty()) rec.warnings["refinement"] += run.refined.warnings.size();
      if (run.refined.error) rec.warnings["refinement_gateway_error"] += 1;
      json trace = json::array();
      for (const auto& s : run.refined.trace) trace.push_back(s.to_json());
      snapshot(run, "refinement", {{"trace", trace}, {"graph", to_json(run.refined.graph)},
                                   {"warnings", run.refined.warnings}});
    });

    clock("generation", [&] {
      const auto& g = run.refined.graph;
      rec.graph = to_json(g);
      // An empty graph leaves only the question and the image.
      rec.context = g.empty() ? std::string() : serialize_context(g, context_mode());
      const auto request = gateway_.make_request(Role::vision_chat, templates::kAnswer,
                                                 {{"context", rec.context}, {"question", question}},
                                                 {MediaPart{image_ref, {}, {}}});
      run.answer_prompt = request.prompt;
      rec.answer = trim(gateway_.chat(request));
      if (rec.answer.empty()) throw DataError("model returned an empty answer");
    });
  } catch (const ModelOutputError& e) {
    run.record.failure = StageFailure{current, "model_output", e.what()};
  } catch (const GatewayError& e) {
    run.record.failure = StageFailure{current, "gateway", e.what()};
  } catch (const Error& e) {
    run.record.failure = StageFailure{current, "data", e.what()};
  }
  run.record.timings = std::move(timings);
  snapshot(run, "answer", run.record.to_json());
  return run;
}

}  // namespace kgvip
