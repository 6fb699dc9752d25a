// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "cli.hpp"

#include <filesystem>
#include <set>

#include "CLI11.hpp"
#include "kgvip/config.hpp"
#include "kgvip/error.hpp"
#include "kgvip/evalkit.hpp"
#include "kgvip/graph.hpp"
#include "kgvip/pipeline.hpp"
#include "kgvip/retrieval.hpp"
#include "kgvip/scene_graph.hpp"
#include "kgvip/util.hpp"

namespace kgvip::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

// An option that writes one settings key when given.
struct Shortcut {
  CLI::Option* option = nullptr;
  std::string key;
  std::string value;
};

// A boolean flag that writes a fixed value to one settings key.
struct Flag {
  CLI::Option* option = nullptr;
  std::string key;
  std::string value_when_set;
};

struct Common {
  std::string config_path;
  std::vector<std::string> assignments;
  std::string record_path;
  std::vector<std::string> replay_paths;
  std::size_t jobs = 4;
  bool verbose = false;
  std::vector<std::unique_ptr<Shortcut>> shortcuts;
  std::vector<std::unique_ptr<Flag>> flags;
};

void add_shortcut(CLI::App& app, Common& c, const std::string& name, const std::string& key,
                  const std::string& help) {
  auto s = std::make_unique<Shortcut>();
  s->key = key;
  s->option = app.add_option(name, s->value, help + " [" + key + "]");
  c.shortcuts.push_back(std::move(s));
}

void add_flag(CLI::App& app, Common& c, const std::string& name, const std::string& key,
              const std::string& value, const std::string& help) {
  auto f = std::make_unique<Flag>();
  f->key = key;
  f->value_when_set = value;
  f->option = app.add_flag(name);
  f->option->description(help + " [" + key + "=" + value + "]");
  c.flags.push_back(std::move(f));
}

Settings resolve_settings(const Common& c, const CliEnv& env) {
  Settings s;
  if (env.getenv) {
    s.load_env(env.getenv);
  } else {
    s.load_process_env();
  }
  if (!c.config_path.empty()) s.load_file(c.config_path);
  for (const auto& a : c.assignments) s.set_flag_assignment(a);
  for (const auto& sc : c.shortcuts) {
    if (sc->option->count() > 0) s.set_flag(sc->key, sc->value);
  }
  for (const auto& f : c.flags) {
    if (f->option->count() > 0) s.set_flag(f->key, f->value_when_set);
  }
  return s;
}

struct Runtime {
  Settings settings;
  MediaResolver media;
  std::unique_ptr<Gateway> gateway;
};

Runtime make_runtime(const Common& c, const CliEnv& env, std::ostream& err) {
  Runtime rt;
  rt.settings = resolve_settings(c, env);
  rt.media = MediaResolver(rt.settings.get("paths.media_root"));
  if (c.verbose) err << "settings: " << rt.settings.redacted().dump(2) << "\n";

  auto gc = gateway_config(rt.settings);
  gc.max_in_flight = static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(64, c.jobs)));
  if (rt.settings.source("gateway.max_in_flight") != "default") {
    gc.max_in_flight = static_cast<int>(rt.settings.get_int("gateway.max_in_flight"));
  }
  if (!c.replay_paths.empty()) {
    gc.mode = CassetteMode::replay;
    for (const auto& p : c.replay_paths) gc.cassette_files.emplace_back(p);
  } else if (!c.record_path.empty()) {
    gc.mode = CassetteMode::record;
    gc.record_path = c.record_path;
  }
  rt.gateway = std::make_unique<Gateway>(gc, env.transport);
  const MediaResolver media = rt.media;
  rt.gateway->set_media_loader([media](const std::string& ref) { return media.read_bytes(ref); });
  return rt;
}

KnowledgeBase load_knowledge_base(const Settings& s) {
  const auto graph_dir = s.get("paths.graph");
  auto graph = graph_dir.empty() ? Graph{} : load_graph(graph_dir);
  const auto text_path = s.get("paths.text_vectors");
  const auto image_path = s.get("paths.image_vectors");
  return KnowledgeBase{
      std::make_shared<const Graph>(std::move(graph)),
      text_path.empty() ? VectorIndex(s.get_size("index.text_dim"), Modality::text)
                        : load_vectors(text_path, s.get_size("index.text_dim"), Modality::text),
      image_path.empty() ? VectorIndex(s.get_size("index.image_dim"), Modality::image)
                         : load_vectors(image_path, s.get_size("index.image_dim"), Modality::image)};
}

void write_run_json(const fs::path& dir, const std::string& command, const Runtime& rt,
                    const Common& c) {
  json cassettes = json::array();
  for (const auto& p : c.replay_paths) {
    cassettes.push_back({{"path", p}, {"sha256", sha256_hex(read_file(p))}});
  }
  json run{{"tool", "kgvip"},
           {"version", kVersion},
           {"command", command},
           {"mode", to_string(rt.gateway->mode())},
           {"cassettes", cassettes},
           {"settings", rt.settings.redacted()},
           {"pipeline", pipeline_config(rt.settings).to_json()}};
  run["fingerprint"] = sha256_hex(run.dump());
  fs::create_directories(dir);
  write_file(dir / "run.json", run.dump(2) + "\n");
}

// Documents from a corpus file: JSONL records with "text" (and optional
// "id"), or the whole file as one document.
std::vector<std::string> read_documents(const fs::path& path) {
  const auto text = read_file(path);
  if (path.extension() != ".jsonl") return {text};
  std::vector<std::string> docs;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    json j;
    try {
      j = json::parse(lines[n]);
    } catch (const json::parse_error& e) {
      throw DataError(path.filename().string() + ":" + std::to_string(n + 1) + ": " + e.what());
    }
    if (!j.contains("text") || !j["text"].is_string()) {
      throw DataError(path.filename().string() + ":" + std::to_string(n + 1) +
                      ": record needs a string 'text'");
    }
    docs.push_back(j["text"].get<std::string>());
  }
  return docs;
}

VectorIndex embed_entity_texts(const Graph& graph, Embedder& embedder) {
  std::optional<VectorIndex> index;
  for (const auto& [id, e] : graph.entities()) {
    auto v = embedder.embed(Modality::text, entity_text(e));
    if (!index) index.emplace(v.dim(), Modality::text);
    index->insert(id, std::move(v));
  }
  return index ? std::move(*index) : VectorIndex(0, Modality::text);
}

std::string stats_line(const GraphStats& s) {
  return "nodes=" + std::to_string(s.nodes) + " edges=" + std::to_string(s.edges) +
         " image_refs=" + std::to_string(s.image_refs) + " components=" + std::to_string(s.components);
}

int exit_for_failure(const StageFailure& f) { return f.kind == "data" ? kData : kGateway; }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnv& env) {
  CLI::App app{"kgvip: knowledge-graph retrieval and fusion for visual question answering", "kgvip"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Common c;
  app.add_option("--config", c.config_path, "TOML or JSON settings file")->check(CLI::ExistingFile);
  app.add_option("--set", c.assignments, "Override a setting: key=value (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  auto* record_opt = app.add_option("--record", c.record_path, "Record model calls to this cassette");
  app.add_option("--replay", c.replay_paths, "Serve model calls from these cassettes (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->excludes(record_opt);
  app.add_option("--jobs", c.jobs, "Worker pool width")->check(CLI::Range(1, 64));
  app.add_flag("-v,--verbose", c.verbose, "Print resolved settings (secrets redacted)");

  add_shortcut(app, c, "--graph", "paths.graph", "Commonsense graph directory");
  add_shortcut(app, c, "--text-vectors", "paths.text_vectors", "Entity text vectors (JSONL)");
  add_shortcut(app, c, "--image-vectors", "paths.image_vectors", "Entity image vectors (JSONL)");
  add_shortcut(app, c, "--media-root", "paths.media_root", "Base directory for image refs");
  add_shortcut(app, c, "--k", "retrieval.k", "Hop radius");
  add_shortcut(app, c, "--n", "retrieval.n", "Text-stage node budget");
  add_shortcut(app, c, "--m", "retrieval.m", "Vision-stage node budget");
  add_shortcut(app, c, "--vision-mode", "retrieval.vision_mode", "v2v or v2t");
  add_shortcut(app, c, "--alpha", "fusion.alpha", "Cross-modal weight");
  add_shortcut(app, c, "--tau", "fusion.tau", "Alignment threshold");
  add_shortcut(app, c, "--refine-steps", "refinement.steps", "Refinement step budget");
  add_shortcut(app, c, "--pruning", "pipeline.pruning", "graph, query or off");
  add_flag(app, c, "--no-scene-graph", "pipeline.scene_graph", "false", "Skip scene-graph generation");
  add_flag(app, c, "--no-text-retrieval", "pipeline.text_retrieval", "false", "Skip text retrieval");
  add_flag(app, c, "--no-vision-retrieval", "pipeline.vision_retrieval", "false", "Skip vision retrieval");
  add_flag(app, c, "--no-fusion", "pipeline.fusion", "false", "Use isolated subgraphs");
  add_flag(app, c, "--no-refinement", "pipeline.refinement", "false", "Skip refinement");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build a graph from a text corpus");
  std::vector<std::string> ingest_inputs;
  std::string ingest_out;
  double min_confidence = 0.5;
  double dedup_threshold = 0.92;
  bool no_dedup = false;
  bool keep_all_components = false;
  ingest->add_option("--input", ingest_inputs, "Corpus files (.jsonl with 'text', or plain text)")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "Output graph directory")->required();
  ingest->add_option("--min-confidence", min_confidence, "Drop relations below this confidence");
  ingest->add_option("--dedup-threshold", dedup_threshold, "Merge entities at this text cosine");
  ingest->add_flag("--no-dedup", no_dedup, "Skip embedding-based entity merging");
  ingest->add_flag("--all-components", keep_all_components, "Keep every connected component");

  // enrich
  auto* enrich = app.add_subcommand("enrich", "Attach image refs from a manifest");
  std::string enrich_manifest, enrich_out;
  enrich->add_option("--manifest", enrich_manifest, "JSONL of {entity_id, image_refs}")
      ->required()->check(CLI::ExistingFile);
  enrich->add_option("--out", enrich_out, "Output graph directory")->required();

  // index
  auto* index = app.add_subcommand("index", "Embed entity texts and images");
  std::string text_out, image_out;
  index->add_option("--text-out", text_out, "Text vector file to write");
  index->add_option("--image-out", image_out, "Image vector file to write");

  // scene
  auto* scene = app.add_subcommand("scene", "Generate and validate a scene graph");
  std::string scene_image, scene_out;
  scene->add_option("--image", scene_image, "Image ref")->required();
  scene->add_option("-o,--out", scene_out, "Write the scene graph JSON here");

  // ask
  auto* ask = app.add_subcommand("ask", "Answer one question about one image");
  std::string ask_question, ask_image, ask_id = "q", ask_out, ask_trace;
  ask->add_option("--question", ask_question, "Question text")->required();
  ask->add_option("--image", ask_image, "Image ref")->required();
  ask->add_option("--id", ask_id, "Question id");
  ask->add_option("--out", ask_out, "Run directory for answer.json and run.json");
  ask->add_option("--trace", ask_trace, "Directory for per-stage JSON snapshots");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a QA dataset");
  std::string eval_dataset, eval_out, eval_method = "KG-ViP", eval_trace;
  eval->add_option("--dataset", eval_dataset, "JSONL of {id, image, question, answer}")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Run directory")->required();
  eval->add_option("--method", eval_method, "Method name for the table row");
  eval->add_option("--trace", eval_trace, "Directory for per-stage JSON snapshots");

  // genqa
  auto* genqa = app.add_subcommand("genqa", "Generate QA samples for scene images");
  std::string genqa_scenes, genqa_out;
  genqa->add_option("--scenes", genqa_scenes,
                    "JSONL of {id, image, description, facts | entities}")
      ->required()->check(CLI::ExistingFile);
  genqa->add_option("--out", genqa_out, "Output dataset JSONL")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Print graph statistics");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto rt = make_runtime(c, env, err);
    const auto& s = rt.settings;
    auto& gw = *rt.gateway;

    if (command == "stats") {
      if (s.get("paths.graph").empty()) throw DataError("stats needs --graph");
      out << stats_line(graph_stats(load_graph(s.get("paths.graph")))) << "\n";
      return kOk;
    }

    if (command == "ingest") {
      Graph merged;
      for (const auto& path : ingest_inputs) {
        for (const auto& doc : read_documents(path)) {
          merged = merge_graphs(merged, extract_graph_from_text(doc, gw));
        }
      }
      if (!no_dedup && !merged.empty()) {
        Embedder embedder(gw);
        merged = merge_duplicate_entities(merged, embed_entity_texts(merged, embedder), dedup_threshold);
      }
      merged = prune_low_confidence(merged, min_confidence);
      if (!keep_all_components) merged = giant_component(merged);
      save_graph(merged, ingest_out);
      out << stats_line(graph_stats(merged)) << "\n";
      return kOk;
    }

    if (command == "enrich") {
      if (s.get("paths.graph").empty()) throw DataError("enrich needs --graph");
      auto result = attach_images(load_graph(s.get("paths.graph")), load_image_manifest(enrich_manifest));
      save_graph(result.graph, enrich_out);
      out << "attached=" << result.attached << " unknown_entities=" << result.unknown_entities.size()
          << "\n";
      for (const auto& id : result.unknown_entities) err << "warning: unknown entity '" << id << "'\n";
      return kOk;
    }

    if (command == "index") {
      if (s.get("paths.graph").empty()) throw DataError("index needs --graph");
      if (text_out.empty() && image_out.empty()) throw DataError("index needs --text-out or --image-out");
      const auto graph = load_graph(s.get("paths.graph"));
      Embedder embedder(gw);
      if (!text_out.empty()) {
        const auto idx = embed_entity_texts(graph, embedder);
        save_vectors(idx, text_out);
        out << "text_vectors=" << idx.size() << " dim=" << idx.dim() << "\n";
      }
      if (!image_out.empty()) {
        std::optional<VectorIndex> idx;
        std::size_t missing = 0;
        for (const auto& [id, e] : graph.entities()) {
          for (std::size_t n = 0; n < e.image_refs.size(); ++n) {
            if (!rt.media.exists(e.image_refs[n])) {
              ++missing;
              continue;
            }
            const auto& ref = e.image_refs[n];
            auto v = embedder.embed(Modality::image, rt.media.read_bytes(ref), ref);
            if (!idx) idx.emplace(v.dim(), Modality::image);
            idx->insert(image_key(id, n), std::move(v));
          }
        }
        if (!idx) idx.emplace(0, Modality::image);
        save_vectors(*idx, image_out);
        out << "image_vectors=" << idx->size() << " dim=" << idx->dim() << " missing=" << missing << "\n";
      }
      return kOk;
    }

    if (command == "scene") {
      const auto size = rt.media.image_size(scene_image);
      const auto result = generate_scene_graph(scene_image, size.width, size.height, gw);
      const auto text = serialize_scene_graph(result.graph);
      if (!scene_out.empty()) write_file(scene_out, text + "\n");
      out << text << "\n";
      if (result.dropped_relations) {
        err << "warning: dropped " << result.dropped_relations << " relation(s) with unknown endpoints\n";
      }
      return kOk;
    }

    if (command == "ask") {
      const auto kb = load_knowledge_base(s);
      Pipeline pipeline(kb, pipeline_config(s), gw, rt.media);
      if (!ask_trace.empty()) pipeline.set_trace_dir(ask_trace);
      const auto record = pipeline.answer(ask_id, ask_question, ask_image);
      if (!ask_out.empty()) {
        write_run_json(ask_out, command, rt, c);
        write_file(fs::path(ask_out) / "answer.json", record.to_json().dump(2) + "\n");
      }
      if (record.failure) {
        err << "error: stage " << record.failure->stage << ": " << record.failure->message << "\n";
        return exit_for_failure(*record.failure);
      }
      out << record.answer << "\n";
      return kOk;
    }

    if (command == "eval") {
      const auto samples = load_dataset(eval_dataset);
      const auto kb = load_knowledge_base(s);
      Pipeline pipeline(kb, pipeline_config(s), gw, rt.media);
      if (!eval_trace.empty()) pipeline.set_trace_dir(eval_trace);
      EvalOptions options;
      options.jobs = c.jobs;
      options.method = eval_method;
      options.cancel = env.cancel;
      const auto report = eval_run(samples, pipeline, gw, rt.media, options);
      write_run_json(eval_out, command, rt, c);
      write_report(report, eval_out);
      out << report.to_csv();
      if (report.cancelled) err << "interrupted: partial report written\n";
      for (const auto& sr : report.samples) {
        if (sr.failure) err << "failed " << sr.id << ": " << *sr.failure << "\n";
      }
      return kOk;
    }

    if (command == "genqa") {
      const auto graph_dir = s.get("paths.graph");
      const auto graph = std::make_shared<const Graph>(graph_dir.empty() ? Graph{} : load_graph(graph_dir));
      const auto lines = split_lines(read_file(genqa_scenes));
      std::string dataset;
      for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        const std::string where = genqa_scenes + ":" + std::to_string(n + 1) + ": ";
        json j;
        try {
          j = json::parse(lines[n]);
        } catch (const json::parse_error& e) {
          throw DataError(where + e.what());
        }
        const auto id = j.value("id", std::string());
        const auto image = j.value("image", std::string());
        if (id.empty() || image.empty()) throw DataError(where + "scene needs 'id' and 'image'");
        std::string facts = j.value("facts", std::string());
        if (facts.empty() && j.contains("entities")) {
          IdSet seeds;
          for (const auto& e : j["entities"]) {
            const auto eid = e.get<std::string>();
            if (graph->contains(eid)) seeds.insert(eid);
          }
          facts = serialize_facts(k_hop_subgraph(graph, seeds, 1));
        }
        const auto result = generate_qa(image, j.value("description", std::string()), facts, gw);
        for (const auto& w : result.warnings) err << "warning: " << id << ": " << w << "\n";
        for (std::size_t i = 0; i < result.pairs.size(); ++i) {
          dataset += json{{"id", id + "-" + std::to_string(i + 1)},
                          {"image", image},
                          {"question", result.pairs[i].question},
                          {"answer", result.pairs[i].answer}}
                         .dump() +
                     "\n";
        }
      }
      write_file(genqa_out, dataset);
      out << "samples=" << std::count(dataset.begin(), dataset.end(), '\n') << "\n";
      return kOk;
    }
  } catch (const DigestMissError& e) {
    err << "error: " << e.what() << "\n";
    return kGateway;
  } catch (const GatewayError& e) {
    err << "error: " << e.what() << "\n";
    return kGateway;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  (void)stats;
  return kUsage;
}

}  // namespace kgvip::cli
