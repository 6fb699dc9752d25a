// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// Model gateway: the single path to every remote model (chat, vision chat,
// embeddings, judge, answer-similarity scorer).
//
// Requests are identified by a SHA-256 digest over their semantic content
// (role, template id, rendered prompt, media identity, decoding params).
// Credentials and endpoint URLs never enter the digest. A Cassette maps
// digests to recorded responses:
//
//   live    every request goes to the transport
//   record  every request goes to the transport and is appended
//   replay  requests are served from the cassette; a miss is an error and
//           the transport is never touched
//
// Wire shapes
//   chat, vision_chat, judge   POST {model, messages:[{role:user, content:[
//                              {type:text,text}, {type:image_url,image_url:
//                              {url}}]}], temperature, max_tokens}
//                              -> choices[0].message.content
//   text_embed, image_embed    POST {model, modality, payload} -> {dim, values}
//                              (image payloads are base64)
//   sas                        POST {model, candidate, reference} -> {score}

#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "kgvip/embedding.hpp"
#include "kgvip/error.hpp"
#include "kgvip/prompts.hpp"

namespace kgvip {

using json = nlohmann::json;

enum class Role { chat, vision_chat, text_embed, image_embed, judge, sas };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

// An attached image: a reference (path or URI) and/or inline bytes. The
// reference is the identity used in the digest when present.
struct MediaPart {
  std::string ref;
  std::string bytes;
  std::string mime = "image/png";
};

struct ModelRequest {
  Role role = Role::chat;
  std::string template_id;
  std::string prompt;
  std::vector<MediaPart> media;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string binding_hash;

  std::string digest() const;
};

enum class CassetteMode { live, record, replay };

std::string_view to_string(CassetteMode m);
CassetteMode cassette_mode_from_string(std::string_view s);

struct CassetteRecord {
  std::string digest;
  Role role = Role::chat;
  std::string template_id;
  json response;
  json meta = json::object();

  json to_json() const;
  static CassetteRecord from_json(const json& j);
};

// Recorded responses keyed by digest; the first record for a digest wins.
// Lookups take no lock and must not race with append().
class Cassette {
 public:
  Cassette() = default;

  // Reads one or more JSONL cassette files.
  static Cassette load(const std::vector<std::filesystem::path>& files);

  // Records appended afterwards are also written to `path` (one JSON line
  // each, flushed immediately).
  void set_sink(const std::filesystem::path& path);

  void add(CassetteRecord record);
  void append(CassetteRecord record);
  const CassetteRecord* find(std::string_view digest) const;

  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<CassetteRecord>& records() const noexcept { return records_; }

  void save(const std::filesystem::path& path) const;

 private:
  std::vector<CassetteRecord> records_;
  std::unordered_map<std::string, std::size_t> by_digest_;
  std::optional<std::filesystem::path> sink_;
  std::unique_ptr<std::mutex> append_mutex_ = std::make_unique<std::mutex>();
};

struct Endpoint {
  std::string url;
  std::string model;
  std::string api_key;
  int timeout_seconds = 120;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual json post(const Endpoint& endpoint, const json& body) = 0;
};

// HTTP(S) transport backed by cpp-httplib.
std::shared_ptr<Transport> make_http_transport();

// Refuses every request; counts attempts. Installed for replay runs so that
// any attempted network access fails loudly.
class OfflineTransport : public Transport {
 public:
  json post(const Endpoint& endpoint, const json& body) override;
  std::size_t attempts() const noexcept { return attempts_.load(); }

 private:
  std::atomic<std::size_t> attempts_{0};
};

struct GatewayConfig {
  std::map<Role, Endpoint> endpoints;
  CassetteMode mode = CassetteMode::live;
  std::vector<std::filesystem::path> cassette_files;
  std::filesystem::path record_path;
  int retry_budget = 2;
  int max_in_flight = 4;
  double temperature = 0.0;
  int max_tokens = 1024;
};

class Gateway {
 public:
  using MediaLoader = std::function<std::string(const std::string& ref)>;

  // With a null transport, live/record modes use HTTP and replay mode uses
  // an OfflineTransport.
  explicit Gateway(GatewayConfig config, std::shared_ptr<Transport> transport = nullptr);

  // Replay/record against an in-memory cassette.
  Gateway(GatewayConfig config, Cassette cassette, std::shared_ptr<Transport> transport);

  const GatewayConfig& config() const noexcept { return config_; }
  CassetteMode mode() const noexcept { return config_.mode; }
  int retry_budget() const noexcept { return config_.retry_budget; }
  bool has_endpoint(Role role) const { return config_.endpoints.contains(role); }

  // Resolves a media ref to bytes before it goes on the wire. Refs that are
  // http(s) URLs are passed through as URLs.
  void set_media_loader(MediaLoader loader) { media_loader_ = std::move(loader); }

  ModelRequest make_request(Role role, std::string_view template_id, const Bindings& bindings,
                            std::vector<MediaPart> media = {}) const;

  // Normalized response: a string for chat roles, {dim, values} for
  // embeddings, {score} for sas.
  json call(const ModelRequest& request);

  std::string chat(const ModelRequest& request);
  // `media_ref`, when given, replaces the image bytes as digest identity.
  std::vector<double> embed_raw(Modality modality, std::string_view payload,
                                std::string_view media_ref = {});

  // Calls the model and hands the text to `parse`. An OutputParseError
  // triggers a retry with the error appended to the prompt; at most
  // retry_budget() + 1 calls are made before ModelOutputError.
  template <class Parse>
  auto chat_with_retries(const ModelRequest& base, Parse&& parse)
      -> decltype(parse(std::declval<const std::string&>()));

  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t wire_calls() const noexcept { return wire_calls_.load(); }
  const Cassette& cassette() const noexcept { return *cassette_; }

 private:
  json wire_body(const ModelRequest& request, const Endpoint& endpoint) const;
  json normalize_response(Role role, const json& wire) const;
  const Endpoint& endpoint_for(Role role) const;

  GatewayConfig config_;
  std::unique_ptr<Cassette> cassette_;
  std::shared_ptr<Transport> transport_;
  MediaLoader media_loader_;
  std::counting_semaphore<64> in_flight_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> wire_calls_{0};
};

// Strips markdown fences and surrounding prose, returning the outermost
// JSON object text. Throws OutputParseError if there is none.
std::string extract_json_text(std::string_view body);

// Parses and validates a model output against a registered schema:
// scene_graph, keep_lists, refinement_action, qa_pairs, entity_list,
// judge_score, text_graph. Throws OutputParseError naming the field.
json parse_structured(std::string_view body, std::string_view schema_id);

template <class Parse>
auto Gateway::chat_with_retries(const ModelRequest& base, Parse&& parse)
    -> decltype(parse(std::declval<const std::string&>())) {
  ModelRequest request = base;
  std::string last_error;
  for (int attempt = 0; attempt <= retry_budget(); ++attempt) {
    if (attempt > 0) {
      request.prompt = base.prompt + render_prompt(templates::kRetrySuffix, {{"error", last_error}});
    }
    const std::string body = chat(request);
    try {
      return parse(body);
    } catch (const OutputParseError& e) {
      last_error = e.what();
    }
  }
  throw ModelOutputError("model output unusable after " + std::to_string(retry_budget() + 1) +
                         " attempts (" + base.template_id + "): " + last_error);
}

}  // namespace kgvip
