// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <thread>

#include "kgvip/error.hpp"
#include "kgvip/prompts.hpp"
#include "kgvip/util.hpp"

namespace kgvip {

std::vector<std::string> meteor_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    }
    // Other ASCII punctuation is dropped, so "don't" becomes "dont".
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

MeteorDetail meteor_detail(std::string_view candidate, std::string_view reference) {
  const auto cand = meteor_tokens(candidate);
  const auto ref = meteor_tokens(reference);
  MeteorDetail d;
  d.candidate_len = cand.size();
  d.reference_len = ref.size();
  if (cand.empty() || ref.empty()) return d;

  // Left-to-right alignment: continue the current run when the next
  // reference token matches, otherwise take the earliest unused position.
  std::vector<bool> used(ref.size(), false);
  std::optional<std::size_t> prev;
  for (const auto& tok : cand) {
    std::optional<std::size_t> pick;
    if (prev && *prev + 1 < ref.size() && !used[*prev + 1] && ref[*prev + 1] == tok) {
      pick = *prev + 1;
    } else {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!used[j] && ref[j] == tok) {
          pick = j;
          break;
        }
      }
    }
    if (!pick) {
      prev.reset();
      continue;
    }
    used[*pick] = true;
    ++d.matches;
    if (!prev || *pick != *prev + 1) ++d.chunks;
    prev = pick;
  }
  if (d.matches == 0) return d;

  const double m = static_cast<double>(d.matches);
  d.precision = m / static_cast<double>(cand.size());
  d.recall = m / static_cast<double>(ref.size());
  d.fmean = 10.0 * d.precision * d.recall / (d.recall + 9.0 * d.precision);
  d.penalty = 0.5 * std::pow(static_cast<double>(d.chunks) / m, 3.0);
  d.score = d.fmean * (1.0 - d.penalty);
  return d;
}

double meteor(std::string_view candidate, std::string_view reference) {
  return meteor_detail(candidate, reference).score;
}

double llm_judge(std::string_view question, std::string_view reference, std::string_view candidate,
                 Gateway& gateway) {
  const auto request = gateway.make_request(Role::judge, templates::kJudge,
                                            {{"question", std::string(question)},
                                             {"reference", std::string(reference)},
                                             {"candidate", std::string(candidate)}});
  return gateway.chat_with_retries(request, [](const std::string& body) {
    return parse_structured(body, "judge_score")["score"].get<double>();
  });
}

std::optional<double> sas(std::string_view candidate, std::string_view reference, Gateway& gateway) {
  if (!gateway.has_endpoint(Role::sas)) return std::nullopt;
  ModelRequest request;
  request.role = Role::sas;
  request.template_id = "sas";
  request.prompt = json{{"candidate", candidate}, {"reference", reference}}.dump();
  request.temperature = 0.0;
  request.max_tokens = 0;
  const auto response = gateway.call(request);
  return std::clamp(response.at("score").get<double>(), 0.0, 1.0);
}

std::vector<QASample> load_dataset(const std::filesystem::path& path) {
  const auto lines = split_lines(read_file(path));
  std::vector<QASample> out;
  std::set<std::string, std::less<>> ids;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(n + 1) + ": ";
    json j;
    try {
      j = json::parse(lines[n]);
    } catch (const json::parse_error& e) {
      throw DataError(where + "malformed JSON: " + e.what());
    }
    QASample s;
    for (auto [key, field] : {std::pair{"id", &s.id}, std::pair{"image", &s.image},
                              std::pair{"question", &s.question}, std::pair{"answer", &s.answer}}) {
      if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
        throw DataError(where + "field '" + key + "' must be a non-empty string");
      }
      *field = j[key].get<std::string>();
    }
    if (!ids.insert(s.id).second) throw DataError(where + "duplicate id '" + s.id + "'");
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t EvalReport::failed() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.failure.has_value(); }));
}

void compute_aggregates(EvalReport& report) {
  double meteor_sum = 0.0, judge_sum = 0.0, sas_sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : report.samples) {
    if (s.failure) continue;
    ++n;
    meteor_sum += s.meteor.value_or(0.0);
    judge_sum += s.llm_j.value_or(0.0);
    sas_sum += s.sas.value_or(0.0);
  }
  report.meteor_mean.reset();
  report.llm_j_mean.reset();
  report.sas_mean.reset();
  if (n == 0) return;
  const double count = static_cast<double>(n);
  report.meteor_mean = 100.0 * meteor_sum / count;
  if (report.judge) report.llm_j_mean = judge_sum / count;
  if (report.sas) report.sas_mean = 100.0 * sas_sum / count;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string format_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

}  // namespace

json EvalReport::to_json() const {
  json j{{"method", method},
         {"config", config},
         {"cancelled", cancelled},
         {"metrics", {{"meteor", true}, {"llm_j", judge}, {"sas", sas}}}};
  j["samples"] = json::array();
  json failures = json::array();
  for (const auto& s : samples) {
    json e{{"id", s.id},
           {"question", s.question},
           {"reference", s.reference},
           {"answer", s.answer},
           {"meteor", optional_number(s.meteor)}};
    if (judge) e["llm_j"] = optional_number(s.llm_j);
    if (sas) e["sas"] = optional_number(s.sas);
    e["failure"] = s.failure ? json(*s.failure) : json(nullptr);
    if (s.failure) failures.push_back({{"id", s.id}, {"reason", *s.failure}});
    j["samples"].push_back(std::move(e));
  }
  j["failures"] = failures;
  json agg{{"samples", samples.size()},
           {"failed", failed()},
           {"meteor", optional_number(meteor_mean)}};
  if (judge) agg["llm_j"] = optional_number(llm_j_mean);
  if (sas) agg["sas"] = optional_number(sas_mean);
  j["aggregates"] = agg;
  return j;
}

std::string EvalReport::to_csv() const {
  std::string header = "Method";
  std::string row = method;
  if (judge) {
    header += ",LLM-J";
    row += "," + format_cell(llm_j_mean);
  }
  header += ",METEOR";
  row += "," + format_cell(meteor_mean);
  if (sas) {
    header += ",SAS";
    row += "," + format_cell(sas_mean);
  }
  return header + "\n" + row + "\n";
}

EvalReport eval_run(const std::vector<QASample>& samples, Pipeline& pipeline, Gateway& gateway,
                    const MediaResolver& media, const EvalOptions& options) {
  EvalReport report;
  report.method = options.method;
  report.judge = options.judge.value_or(gateway.has_endpoint(Role::judge));
  report.sas = options.sas.value_or(gateway.has_endpoint(Role::sas));
  report.config = pipeline.config().to_json();

  std::vector<std::optional<SampleResult>> results(samples.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stopped{false};

  auto evaluate = [&](const QASample& s) {
    SampleResult r;
    r.id = s.id;
    r.question = s.question;
    r.reference = s.answer;
    if (!media.exists(s.image)) {
      r.failure = "image not found: " + s.image;
      return r;
    }
    const auto record = pipeline.answer(s.id, s.question, s.image);
    r.answer = record.answer;
    if (record.failure) {
      r.failure = record.failure->stage + " (" + record.failure->kind + "): " + record.failure->message;
      return r;
    }
    r.meteor = meteor(r.answer, s.answer);
    try {
      if (report.judge) r.llm_j = llm_judge(s.question, s.answer, r.answer, gateway);
      if (report.sas) r.sas = sas(r.answer, s.answer, gateway);
    } catch (const Error& e) {
      r.failure = std::string("metric: ") + e.what();
    }
    return r;
  };

  auto worker = [&] {
    for (;;) {
      if (options.cancel && options.cancel->load()) {
        stopped = true;
        return;
      }
      const std::size_t i = next++;
      if (i >= samples.size()) return;
      results[i] = evaluate(samples[i]);
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(samples.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  for (auto& r : results) {
    if (r) report.samples.push_back(std::move(*r));
  }
  std::sort(report.samples.begin(), report.samples.end(),
            [](const SampleResult& a, const SampleResult& b) { return a.id < b.id; });
  report.cancelled = stopped.load() && report.samples.size() < samples.size();
  compute_aggregates(report);
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", report.to_json().dump(2) + "\n");
  write_file(dir / "table.csv", report.to_csv());
}

QAGenResult generate_qa(const std::string& scene_image, std::string_view scene_description,
                        std::string_view reference_facts, Gateway& gateway) {
  if (trim(scene_description).empty() && trim(reference_facts).empty()) {
    throw DataError("generate_qa needs a scene description or reference facts");
  }
  const auto request = gateway.make_request(Role::vision_chat, templates::kVqaGenerator,
                                            {{"scene_image", scene_image},
                                             {"scene_description", std::string(scene_description)},
                                             {"reference_facts", std::string(reference_facts)}},
                                            {MediaPart{scene_image, {}, {}}});
  const auto parsed = gateway.chat_with_retries(
      request, [](const std::string& body) { return parse_structured(body, "qa_pairs"); });

  QAGenResult out;
  std::size_t index = 0;
  for (const auto& p : parsed["qa_pairs"]) {
    const auto field = [&](const char* key) {
      return p.is_object() && p.contains(key) && p[key].is_string() ? trim(p[key].get<std::string>())
                                                                    : std::string();
    };
    QAPair pair{field("Question"), field("Answer")};
    if (pair.question.empty() || pair.answer.empty()) {
      out.warnings.push_back("qa pair " + std::to_string(index) + " dropped: empty " +
                             (pair.question.empty() ? "Question" : "Answer"));
    } else {
      out.pairs.push_back(std::move(pair));
    }
    ++index;
  }
  return out;
}

std::string serialize_facts(const SubgraphRef& subgraph) {
  if (subgraph.empty()) return "";
  std::string out;
  for (const auto& id : subgraph.nodes) {
    const auto& e = *subgraph.parent->find(id);
    out += e.label;
    if (!e.description.empty()) out += ": " + e.description;
    out += "\n";
  }
  for (auto i : subgraph.relations) {
    const auto& r = subgraph.parent->relations()[i];
    out += "(" + subgraph.parent->find(r.source)->label + ", " + r.predicate + ", " +
           subgraph.parent->find(r.target)->label + ")\n";
  }
  return out;
}

}  // namespace kgvip
