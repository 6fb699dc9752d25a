// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "kgvip/util.hpp"

namespace kgvip {
namespace {

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

bool is_url(std::string_view ref) {
  return ref.starts_with("http://") || ref.starts_with("https://") || ref.starts_with("data:");
}

std::string mime_for(std::string_view ref, std::string_view fallback) {
  const auto ext = to_lower(std::filesystem::path(ref).extension().string());
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".bmp") return "image/bmp";
  return std::string(fallback);
}

[[noreturn]] void schema_fail(std::string_view schema, const std::string& field,
                              std::string_view what) {
  throw OutputParseError("schema '" + std::string(schema) + "': field '" + field + "' " +
                         std::string(what));
}

const json& require(const json& obj, std::string_view schema, const std::string& path,
                    const char* key) {
  if (!obj.is_object() || !obj.contains(key)) schema_fail(schema, path + key, "is required");
  return obj.at(key);
}

std::string require_string(const json& obj, std::string_view schema, const std::string& path,
                           const char* key) {
  const auto& v = require(obj, schema, path, key);
  if (!v.is_string()) schema_fail(schema, path + key, "must be a string");
  return v.get<std::string>();
}

double require_number(const json& obj, std::string_view schema, const std::string& path,
                      const char* key) {
  const auto& v = require(obj, schema, path, key);
  if (!v.is_number()) schema_fail(schema, path + key, "must be a number");
  return v.get<double>();
}

json optional_array(const json& obj, std::string_view schema, const std::string& path,
                    const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return json::array();
  const auto& v = obj.at(key);
  if (!v.is_array()) schema_fail(schema, path + key, "must be an array");
  return v;
}

json string_array(const json& arr, std::string_view schema, const std::string& field) {
  json out = json::array();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) schema_fail(schema, field + "[" + std::to_string(i) + "]", "must be a string");
    out.push_back(arr[i]);
  }
  return out;
}

void check_unit_interval(double v, std::string_view schema, const std::string& field) {
  if (!(v >= 0.0 && v <= 1.0)) schema_fail(schema, field, "must be in [0,1]");
}

json validate_scene_graph(const json& j) {
  constexpr std::string_view s = "scene_graph";
  const auto& ents = require(j, s, "", "entities");
  if (!ents.is_array()) schema_fail(s, "entities", "must be an array");
  json out = {{"entities", json::array()}, {"relations", json::array()}};
  for (std::size_t i = 0; i < ents.size(); ++i) {
    const std::string p = "entities[" + std::to_string(i) + "].";
    const auto& e = ents[i];
    if (!e.is_object()) schema_fail(s, "entities[" + std::to_string(i) + "]", "must be an object");
    json ent;
    ent["entity_id"] = require_string(e, s, p, "entity_id");
    ent["name"] = require_string(e, s, p, "name");
    const auto category = require_string(e, s, p, "category");
    if (category != "person" && category != "object" && category != "animal" && category != "other") {
      schema_fail(s, p + "category", "must be one of person|object|animal|other (got '" + category + "')");
    }
    ent["category"] = category;
    const auto& bbox = require(e, s, p, "bbox_px");
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(), [](const json& v) { return v.is_number(); })) {
      schema_fail(s, p + "bbox_px", "must be an array of 4 numbers");
    }
    ent["bbox_px"] = bbox;
    ent["confidence"] = require_number(e, s, p, "confidence");
    out["entities"].push_back(std::move(ent));
  }
  const auto rels = optional_array(j, s, "", "relations");
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const std::string p = "relations[" + std::to_string(i) + "].";
    const auto& r = rels[i];
    if (!r.is_object()) schema_fail(s, "relations[" + std::to_string(i) + "]", "must be an object");
    json rel;
    rel["subject_id"] = require_string(r, s, p, "subject_id");
    rel["predicate"] = require_string(r, s, p, "predicate");
    rel["object_id"] = require_string(r, s, p, "object_id");
    rel["confidence"] = require_number(r, s, p, "confidence");
    if (r.contains("evidence") && !r["evidence"].is_null()) {
      if (!r["evidence"].is_string()) schema_fail(s, p + "evidence", "must be a string");
      rel["evidence"] = r["evidence"];
    }
    out["relations"].push_back(std::move(rel));
  }
  return out;
}

json validate_keep_lists(const json& j) {
  constexpr std::string_view s = "keep_lists";
  const auto& ents = require(j, s, "", "keep_entities");
  if (!ents.is_array()) schema_fail(s, "keep_entities", "must be an array");
  json out = {{"keep_entities", string_array(ents, s, "keep_entities")},
              {"keep_relations", json::array()}};
  const auto rels = optional_array(j, s, "", "keep_relations");
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const std::string p = "keep_relations[" + std::to_string(i) + "].";
    out["keep_relations"].push_back({{"s", require_string(rels[i], s, p, "s")},
                                     {"p", require_string(rels[i], s, p, "p")},
                                     {"o", require_string(rels[i], s, p, "o")}});
  }
  return out;
}

json validate_refinement_action(const json& j) {
  constexpr std::string_view s = "refinement_action";
  const auto rec = require_string(j, s, "", "recommendation");
  if (rec != "Expand" && rec != "Prune" && rec != "Terminate") {
    schema_fail(s, "recommendation", "must be one of Expand|Prune|Terminate (got '" + rec + "')");
  }
  json out;
  out["recommendation"] = rec;
  out["nodes_to_expand"] = string_array(optional_array(j, s, "", "nodes_to_expand"), s, "nodes_to_expand");
  out["nodes_to_prune"] = string_array(optional_array(j, s, "", "nodes_to_prune"), s, "nodes_to_prune");
  for (const char* key : {"analysis", "reason"}) {
    if (j.contains(key) && !j[key].is_null()) {
      if (!j[key].is_string()) schema_fail(s, key, "must be a string");
      out[key] = j[key];
    } else {
      out[key] = "";
    }
  }
  double confidence = 0.0;
  if (j.contains("confidence") && !j["confidence"].is_null()) {
    confidence = require_number(j, s, "", "confidence");
    check_unit_interval(confidence, s, "confidence");
  }
  out["confidence"] = confidence;
  return out;
}

json validate_qa_pairs(const json& j) {
  constexpr std::string_view s = "qa_pairs";
  const auto& pairs = require(j, s, "", "qa_pairs");
  if (!pairs.is_array()) schema_fail(s, "qa_pairs", "must be an array");
  return {{"qa_pairs", pairs}};
}

json validate_entity_list(const json& j) {
  constexpr std::string_view s = "entity_list";
  const auto& ents = require(j, s, "", "entities");
  if (!ents.is_array()) schema_fail(s, "entities", "must be an array");
  return {{"entities", string_array(ents, s, "entities")}};
}

json validate_judge_score(const json& j) {
  constexpr std::string_view s = "judge_score";
  const double score = require_number(j, s, "", "score");
  if (!(score >= 0.0 && score <= 100.0)) {
    schema_fail(s, "score", "out of range [0,100] (got " + std::to_string(score) + ")");
  }
  return {{"score", score}};
}

json validate_text_graph(const json& j) {
  constexpr std::string_view s = "text_graph";
  json out = {{"entities", json::array()}, {"relations", json::array()}};
  const auto ents = optional_array(j, s, "", "entities");
  for (std::size_t i = 0; i < ents.size(); ++i) {
    const std::string p = "entities[" + std::to_string(i) + "].";
    const auto& e = ents[i];
    json ent;
    ent["id"] = require_string(e, s, p, "id");
    ent["label"] = e.contains("label") && e["label"].is_string() ? e["label"] : ent["id"];
    ent["type"] = e.contains("type") && e["type"].is_string() ? e["type"] : json("");
    ent["description"] =
        e.contains("description") && e["description"].is_string() ? e["description"] : json("");
    out["entities"].push_back(std::move(ent));
  }
  const auto rels = optional_array(j, s, "", "relations");
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const std::string p = "relations[" + std::to_string(i) + "].";
    const auto& r = rels[i];
    json rel;
    rel["source"] = require_string(r, s, p, "source");
    rel["predicate"] = require_string(r, s, p, "predicate");
    rel["target"] = require_string(r, s, p, "target");
    double confidence = 1.0;
    if (r.contains("confidence") && !r["confidence"].is_null()) {
      confidence = require_number(r, s, p, "confidence");
      check_unit_interval(confidence, s, p + "confidence");
    }
    rel["confidence"] = confidence;
    out["relations"].push_back(std::move(rel));
  }
  return out;
}

}  // namespace

std::string_view to_string(Role r) {
  switch (r) {
    case Role::chat: return "chat";
    case Role::vision_chat: return "vision_chat";
    case Role::text_embed: return "text_embed";
    case Role::image_embed: return "image_embed";
    case Role::judge: return "judge";
    case Role::sas: return "sas";
  }
  return "chat";
}

Role role_from_string(std::string_view s) {
  for (Role r : {Role::chat, Role::vision_chat, Role::text_embed, Role::image_embed, Role::judge,
                 Role::sas}) {
    if (to_string(r) == s) return r;
  }
  throw DataError("unknown endpoint role '" + std::string(s) + "'");
}

std::string_view to_string(CassetteMode m) {
  switch (m) {
    case CassetteMode::live: return "live";
    case CassetteMode::record: return "record";
    case CassetteMode::replay: return "replay";
  }
  return "live";
}

CassetteMode cassette_mode_from_string(std::string_view s) {
  if (s == "live") return CassetteMode::live;
  if (s == "record") return CassetteMode::record;
  if (s == "replay") return CassetteMode::replay;
  throw DataError("unknown cassette mode '" + std::string(s) + "'");
}

std::string ModelRequest::digest() const {
  json media_ids = json::array();
  for (const auto& m : media) {
    media_ids.push_back(m.ref.empty() ? "sha256:" + sha256_hex(m.bytes) : "ref:" + m.ref);
  }
  const json canonical = {{"role", to_string(role)},       {"template_id", template_id},
                          {"prompt", prompt},              {"media", media_ids},
                          {"temperature", temperature},    {"max_tokens", max_tokens}};
  return sha256_hex(canonical.dump());
}

json CassetteRecord::to_json() const {
  return {{"digest", digest},
          {"role", to_string(role)},
          {"template_id", template_id},
          {"response", response},
          {"meta", meta}};
}

CassetteRecord CassetteRecord::from_json(const json& j) {
  CassetteRecord r;
  if (!j.is_object() || !j.contains("digest") || !j["digest"].is_string() ||
      !j.contains("response")) {
    throw DataError("cassette record needs 'digest' and 'response'");
  }
  r.digest = j["digest"].get<std::string>();
  r.role = role_from_string(j.value("role", "chat"));
  r.template_id = j.value("template_id", "");
  r.response = j["response"];
  if (j.contains("meta")) r.meta = j["meta"];
  return r;
}

Cassette Cassette::load(const std::vector<std::filesystem::path>& files) {
  Cassette c;
  for (const auto& file : files) {
    const auto lines = split_lines(read_file(file));
    for (std::size_t n = 0; n < lines.size(); ++n) {
      if (trim(lines[n]).empty()) continue;
      try {
        c.add(CassetteRecord::from_json(json::parse(lines[n])));
      } catch (const json::exception& e) {
        throw DataError(file.string() + ":" + std::to_string(n + 1) + ": " + e.what());
      } catch (const DataError& e) {
        throw DataError(file.string() + ":" + std::to_string(n + 1) + ": " + e.what());
      }
    }
  }
  return c;
}

void Cassette::set_sink(const std::filesystem::path& path) { sink_ = path; }

void Cassette::add(CassetteRecord record) {
  by_digest_.try_emplace(record.digest, records_.size());
  records_.push_back(std::move(record));
}

void Cassette::append(CassetteRecord record) {
  std::lock_guard lock(*append_mutex_);
  if (sink_) {
    std::ofstream out(*sink_, std::ios::app);
    if (!out) throw IoError("cannot append to cassette " + sink_->string());
    out << record.to_json().dump() << '\n';
  }
  add(std::move(record));
}

const CassetteRecord* Cassette::find(std::string_view digest) const {
  auto it = by_digest_.find(std::string(digest));
  return it == by_digest_.end() ? nullptr : &records_[it->second];
}

void Cassette::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& r : records_) {
    out += r.to_json().dump();
    out += '\n';
  }
  write_file(path, out);
}

json OfflineTransport::post(const Endpoint& endpoint, const json&) {
  ++attempts_;
  throw GatewayError("network access disabled (offline transport), refused " +
                     (endpoint.url.empty() ? std::string("<unset endpoint>") : endpoint.url));
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      cassette_(std::make_unique<Cassette>()),
      transport_(std::move(transport)),
      in_flight_(std::clamp(config_.max_in_flight, 1, 64)) {
  if (config_.mode != CassetteMode::live && !config_.cassette_files.empty()) {
    *cassette_ = Cassette::load(config_.cassette_files);
  }
  if (config_.mode == CassetteMode::record && !config_.record_path.empty()) {
    cassette_->set_sink(config_.record_path);
  }
  if (!transport_) {
    transport_ = config_.mode == CassetteMode::replay
                     ? std::static_pointer_cast<Transport>(std::make_shared<OfflineTransport>())
                     : make_http_transport();
  }
}

Gateway::Gateway(GatewayConfig config, Cassette cassette, std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      cassette_(std::make_unique<Cassette>(std::move(cassette))),
      transport_(std::move(transport)),
      in_flight_(std::clamp(config_.max_in_flight, 1, 64)) {
  if (config_.mode == CassetteMode::record && !config_.record_path.empty()) {
    cassette_->set_sink(config_.record_path);
  }
  if (!transport_) transport_ = std::make_shared<OfflineTransport>();
}

ModelRequest Gateway::make_request(Role role, std::string_view template_id,
                                   const Bindings& bindings, std::vector<MediaPart> media) const {
  ModelRequest req;
  req.role = role;
  req.template_id = std::string(template_id);
  req.prompt = render_prompt(template_id, bindings);
  req.media = std::move(media);
  req.temperature = config_.temperature;
  req.max_tokens = config_.max_tokens;
  json b = json::object();
  for (const auto& [k, v] : bindings) b[k] = v;
  req.binding_hash = sha256_hex(b.dump());
  return req;
}

const Endpoint& Gateway::endpoint_for(Role role) const {
  auto it = config_.endpoints.find(role);
  if (it == config_.endpoints.end() || it->second.url.empty()) {
    throw GatewayError("no endpoint configured for role '" + std::string(to_string(role)) + "'");
  }
  return it->second;
}

json Gateway::wire_body(const ModelRequest& request, const Endpoint& endpoint) const {
  switch (request.role) {
    case Role::chat:
    case Role::vision_chat:
    case Role::judge: {
      json content = json::array();
      content.push_back({{"type", "text"}, {"text", request.prompt}});
      for (const auto& m : request.media) {
        std::string url;
        if (!m.bytes.empty()) {
          url = "data:" + m.mime + ";base64," + base64_encode(m.bytes);
        } else if (is_url(m.ref)) {
          url = m.ref;
        } else {
          const auto bytes = media_loader_ ? media_loader_(m.ref) : read_file(m.ref);
          url = "data:" + mime_for(m.ref, m.mime) + ";base64," + base64_encode(bytes);
        }
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
      }
      return {{"model", endpoint.model},
              {"messages", json::array({{{"role", "user"}, {"content", content}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    }
    case Role::text_embed:
      return {{"model", endpoint.model}, {"modality", "text"}, {"payload", request.prompt}};
    case Role::image_embed: {
      const std::string bytes = request.media.empty() ? std::string() : request.media.front().bytes;
      return {{"model", endpoint.model}, {"modality", "image"}, {"payload", base64_encode(bytes)}};
    }
    case Role::sas: {
      const json pair = json::parse(request.prompt);
      return {{"model", endpoint.model},
              {"candidate", pair.value("candidate", "")},
              {"reference", pair.value("reference", "")}};
    }
  }
  return {};
}

json Gateway::normalize_response(Role role, const json& wire) const {
  switch (role) {
    case Role::chat:
    case Role::vision_chat:
    case Role::judge: {
      try {
        const auto& content = wire.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content;
        if (content.is_array()) {
          std::string text;
          for (const auto& part : content) text += part.value("text", "");
          return text;
        }
      } catch (const json::exception&) {
      }
      throw GatewayError("malformed chat response: missing choices[0].message.content");
    }
    case Role::text_embed:
    case Role::image_embed: {
      json values;
      if (wire.contains("values")) {
        values = wire["values"];
      } else if (wire.contains("data") && wire["data"].is_array() && !wire["data"].empty()) {
        values = wire["data"][0].value("embedding", json());
      }
      if (!values.is_array() ||
          !std::all_of(values.begin(), values.end(), [](const json& v) { return v.is_number(); })) {
        throw GatewayError("malformed embedding response: missing numeric 'values'");
      }
      return {{"dim", values.size()}, {"values", values}};
    }
    case Role::sas:
      if (!wire.contains("score") || !wire["score"].is_number()) {
        throw GatewayError("malformed scorer response: missing numeric 'score'");
      }
      return {{"score", wire["score"]}};
  }
  return wire;
}

json Gateway::call(const ModelRequest& request) {
  ++calls_;
  const std::string digest = request.digest();
  if (config_.mode == CassetteMode::replay) {
    const auto* rec = cassette_->find(digest);
    if (!rec) throw DigestMissError(digest);
    return rec->response;
  }

  const auto& endpoint = endpoint_for(request.role);
  const json body = wire_body(request, endpoint);
  const auto t0 = std::chrono::steady_clock::now();
  json wire;
  {
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<64>& sem;
      ~Release() { sem.release(); }
    } release{in_flight_};
    ++wire_calls_;
    wire = transport_->post(endpoint, body);
  }
  const double latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  json response = normalize_response(request.role, wire);

  if (config_.mode == CassetteMode::record) {
    CassetteRecord rec;
    rec.digest = digest;
    rec.role = request.role;
    rec.template_id = request.template_id;
    rec.response = response;
    rec.meta = {{"latency_ms", latency_ms}, {"timestamp", iso_timestamp()}};
    cassette_->append(std::move(rec));
  }
  return response;
}

std::string Gateway::chat(const ModelRequest& request) {
  const json r = call(request);
  if (!r.is_string()) throw GatewayError("chat response is not text");
  return r.get<std::string>();
}

std::vector<double> Gateway::embed_raw(Modality modality, std::string_view payload,
                                      std::string_view media_ref) {
  ModelRequest req;
  req.template_id = modality == Modality::text ? "embed.text" : "embed.image";
  req.temperature = 0.0;
  req.max_tokens = 0;
  if (modality == Modality::text) {
    req.role = Role::text_embed;
    req.prompt = std::string(payload);
  } else {
    req.role = Role::image_embed;
    req.media.push_back({std::string(media_ref), std::string(payload), "image/png"});
  }
  const json r = call(req);
  const auto& values = r.at("values");
  if (r.value("dim", values.size()) != values.size()) {
    throw GatewayError("embedding response dim does not match value count");
  }
  return values.get<std::vector<double>>();
}

std::string extract_json_text(std::string_view body) {
  std::string_view content = body;
  if (const auto fence = body.find("```"); fence != std::string_view::npos) {
    auto start = body.find('\n', fence);
    if (start != std::string_view::npos) {
      ++start;
      const auto close = body.find("```", start);
      content = body.substr(start, close == std::string_view::npos ? body.size() - start : close - start);
    }
  }
  const auto open = content.find('{');
  const auto last = content.rfind('}');
  if (open == std::string_view::npos || last == std::string_view::npos || last < open) {
    throw OutputParseError("no JSON object found in model output");
  }
  return std::string(content.substr(open, last - open + 1));
}

json parse_structured(std::string_view body, std::string_view schema_id) {
  const std::string text = extract_json_text(body);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw OutputParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw OutputParseError("model output is not a JSON object");
  if (schema_id == "scene_graph") return validate_scene_graph(j);
  if (schema_id == "keep_lists") return validate_keep_lists(j);
  if (schema_id == "refinement_action") return validate_refinement_action(j);
  if (schema_id == "qa_pairs") return validate_qa_pairs(j);
  if (schema_id == "entity_list") return validate_entity_list(j);
  if (schema_id == "judge_score") return validate_judge_score(j);
  if (schema_id == "text_graph") return validate_text_graph(j);
  throw DataError("unknown schema '" + std::string(schema_id) + "'");
}

}  // namespace kgvip
