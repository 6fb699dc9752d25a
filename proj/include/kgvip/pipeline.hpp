// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// End-to-end answer flow for one (question, image) pair:
//
//   scene graph -> text retrieval -> scene pruning -> vision retrieval
//   -> union -> fusion -> refinement -> generation
//
// Every stage can be switched off; the combinations cover the ablation
// variants (no fusion gives the isolated two-section context, everything
// off gives a zero-shot prompt holding only the question and the image).

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgvip/embedding.hpp"
#include "kgvip/fusion.hpp"
#include "kgvip/gateway.hpp"
#include "kgvip/graph.hpp"
#include "kgvip/refinement.hpp"
#include "kgvip/retrieval.hpp"
#include "kgvip/scene_graph.hpp"

namespace kgvip {

struct PipelineConfig {
  RetrievalConfig retrieval;
  double alpha = kDefaultAlpha;
  double tau = kDefaultTau;
  std::size_t refine_steps = 1;

  bool scene_graph = true;
  bool text_retrieval = true;
  bool vision_retrieval = true;
  PruneMode pruning = PruneMode::graph;
  bool fusion = true;
  bool refinement = true;

  json to_json() const;
};

struct KnowledgeBase {
  GraphPtr graph;
  VectorIndex text_index;
  // Per-image vectors keyed "<entity id>#<n>".
  VectorIndex image_index;
};

inline constexpr const char* kStageNames[] = {"scene",  "text_retrieval", "pruning",    "vision_retrieval",
                                              "union",  "fusion",         "refinement", "generation"};

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct StageFailure {
  std::string stage;
  // "data", "gateway" or "model_output".
  std::string kind;
  std::string message;
};

struct AnswerRecord {
  std::string question_id;
  std::string question;
  std::string image_ref;
  std::string answer;
  std::optional<StageFailure> failure;
  std::string context;
  json graph = json::object();
  std::vector<RefinementStep> trace;
  std::vector<StageTiming> timings;
  std::map<std::string, std::size_t> warnings;

  bool ok() const noexcept { return !failure.has_value(); }
  json to_json(bool include_timings = true) const;
};

// Every intermediate of one run, for tests and --trace output.
struct PipelineRun {
  QueryContext query;
  SceneGraph scene;
  TextStageResult text;
  PruneResult pruned;
  CropEmbeddings crops;
  VisionStageResult vision;
  SubgraphRef commonsense;
  std::vector<AlignmentPair> matches;
  UnifiedGraph fused;
  RefinementResult refined;
  std::string answer_prompt;
  AnswerRecord record;
};

json to_json(const SubgraphRef& subgraph);
json to_json(const UnifiedGraph& graph);
json to_json(const PruneResult& pruned);

class Pipeline {
 public:
  // `kb` and `gateway` must outlive the pipeline. Safe to run concurrently.
  Pipeline(const KnowledgeBase& kb, PipelineConfig config, Gateway& gateway, MediaResolver media);

  const PipelineConfig& config() const noexcept { return config_; }
  ContextMode context_mode() const noexcept {
    return config_.fusion ? ContextMode::fused : ContextMode::isolated;
  }

  // Writes per-stage JSON snapshots under <dir>/<question id>/.
  void set_trace_dir(std::filesystem::path dir) { trace_dir_ = std::move(dir); }

  // Stage errors are caught and recorded in record.failure; the run stops
  // at the failing stage with earlier artifacts kept.
  PipelineRun run(const std::string& question_id, const std::string& question,
                  const std::string& image_ref);
  AnswerRecord answer(const std::string& question_id, const std::string& question,
                      const std::string& image_ref) {
    return run(question_id, question, image_ref).record;
  }

 private:
  void snapshot(const PipelineRun& run, std::string_view stage, const json& value) const;

  const KnowledgeBase& kb_;
  PipelineConfig config_;
  Gateway& gateway_;
  MediaResolver media_;
  Embedder embedder_;
  std::optional<std::filesystem::path> trace_dir_;
};

}  // namespace kgvip
