// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// Answer metrics, dataset evaluation and QA generation.
//
// METEOR here is the exact-match variant: lowercased, punctuation-stripped
// unigrams, no stemming or synonym stages, with the usual parameters
//   F = 10PR / (R + 9P),  penalty = 0.5 * (chunks / matches)^3.
// Scores therefore run lower than lexicon-backed METEOR implementations.

#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgvip/gateway.hpp"
#include "kgvip/pipeline.hpp"

namespace kgvip {

std::vector<std::string> meteor_tokens(std::string_view text);

struct MeteorDetail {
  std::size_t candidate_len = 0;
  std::size_t reference_len = 0;
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

MeteorDetail meteor_detail(std::string_view candidate, std::string_view reference);
double meteor(std::string_view candidate, std::string_view reference);

// 0-100 score from the judge role. Throws ModelOutputError when the output
// stays unusable after retries.
double llm_judge(std::string_view question, std::string_view reference, std::string_view candidate,
                 Gateway& gateway);

// Answer-similarity score in [0,1], or nullopt when no scorer is configured.
std::optional<double> sas(std::string_view candidate, std::string_view reference, Gateway& gateway);

struct QASample {
  std::string id;
  std::string image;
  std::string question;
  std::string answer;
};

// JSONL of {id, image, question, answer}. Throws DataError naming the line;
// ids must be unique.
std::vector<QASample> load_dataset(const std::filesystem::path& path);

struct SampleResult {
  std::string id;
  std::string question;
  std::string reference;
  std::string answer;
  std::optional<double> meteor;
  std::optional<double> llm_j;
  std::optional<double> sas;
  std::optional<std::string> failure;
};

struct EvalOptions {
  std::size_t jobs = 4;
  // Unset means "when the gateway has an endpoint for the role".
  std::optional<bool> judge;
  std::optional<bool> sas;
  std::string method = "KG-ViP";
  // Checked before each sample starts; in-flight samples finish.
  const std::atomic<bool>* cancel = nullptr;
};

struct EvalReport {
  std::string method;
  bool judge = false;
  bool sas = false;
  bool cancelled = false;
  json config = json::object();
  // Sorted by id.
  std::vector<SampleResult> samples;
  // Means over non-failed samples: LLM-J on its 0-100 scale, METEOR and SAS
  // multiplied by 100. Unset when no sample succeeded.
  std::optional<double> llm_j_mean;
  std::optional<double> meteor_mean;
  std::optional<double> sas_mean;

  std::size_t failed() const;
  json to_json() const;
  // "Method,LLM-J,METEOR,SAS" restricted to the configured metrics.
  std::string to_csv() const;
};

// Recomputes the aggregate means from the per-sample values.
void compute_aggregates(EvalReport& report);

EvalReport eval_run(const std::vector<QASample>& samples, Pipeline& pipeline, Gateway& gateway,
                    const MediaResolver& media, const EvalOptions& options = {});

// Writes report.json and table.csv into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

struct QAPair {
  std::string question;
  std::string answer;
};

struct QAGenResult {
  std::vector<QAPair> pairs;
  std::vector<std::string> warnings;
};

// Throws DataError when both description and facts are empty.
QAGenResult generate_qa(const std::string& scene_image, std::string_view scene_description,
                        std::string_view reference_facts, Gateway& gateway);

// "label: description" lines followed by "(label, predicate, label)" lines.
std::string serialize_facts(const SubgraphRef& subgraph);

}  // namespace kgvip
