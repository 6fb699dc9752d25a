// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>

#include "kgvip/error.hpp"
#include "kgvip/util.hpp"
#include "toml.hpp"

namespace kgvip {
namespace {

constexpr Role kRoles[] = {Role::chat, Role::vision_chat, Role::text_embed,
                           Role::image_embed, Role::judge, Role::sas};

std::vector<SettingSpec> build_specs() {
  std::vector<SettingSpec> specs = {
      {"retrieval.k", "2"},
      {"retrieval.n", "15"},
      {"retrieval.m", "10"},
      {"retrieval.link_threshold", "0.35"},
      {"retrieval.vision_mode", "v2v"},
      {"retrieval.restart", "0.15"},
      {"retrieval.tolerance", "1e-8"},
      {"retrieval.max_iterations", "100"},
      {"fusion.alpha", "0.5"},
      {"fusion.tau", "0.45"},
      {"refinement.steps", "1"},
      {"pipeline.scene_graph", "true"},
      {"pipeline.text_retrieval", "true"},
      {"pipeline.vision_retrieval", "true"},
      {"pipeline.pruning", "graph"},
      {"pipeline.fusion", "true"},
      {"pipeline.refinement", "true"},
      {"gateway.retry_budget", "2"},
      {"gateway.max_in_flight", "4"},
      {"gateway.temperature", "0"},
      {"gateway.max_tokens", "1024"},
      {"gateway.timeout_seconds", "120"},
      {"paths.graph", ""},
      {"paths.text_vectors", ""},
      {"paths.image_vectors", ""},
      {"paths.media_root", ""},
      {"index.text_dim", "0"},
      {"index.image_dim", "0"},
      {"api_key", "", true},
  };
  for (auto role : kRoles) {
    const std::string prefix = "endpoint." + std::string(to_string(role)) + ".";
    specs.push_back({prefix + "url", ""});
    specs.push_back({prefix + "model", ""});
    specs.push_back({prefix + "api_key", "", true});
  }
  return specs;
}

const SettingSpec* find_spec(std::string_view key) {
  for (const auto& s : setting_specs()) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

void require_known(std::string_view key, std::string_view origin) {
  if (!find_spec(key)) {
    throw DataError(std::string(origin) + ": unknown setting '" + std::string(key) + "'");
  }
}

std::string toml_scalar(const toml::node& node, const std::string& key) {
  if (auto v = node.value<std::string>(); v && node.is_string()) return *v;
  if (node.is_boolean()) return *node.value<bool>() ? "true" : "false";
  if (node.is_integer()) return std::to_string(*node.value<long long>());
  if (node.is_floating_point()) {
    std::ostringstream os;
    os.precision(17);
    os << *node.value<double>();
    return os.str();
  }
  throw DataError("setting '" + key + "' must be a scalar");
}

void flatten_toml(const toml::table& table, const std::string& prefix,
                  std::map<std::string, std::string, std::less<>>& out) {
  for (const auto& [k, node] : table) {
    const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const auto* sub = node.as_table()) {
      flatten_toml(*sub, key, out);
    } else {
      out[key] = toml_scalar(node, key);
    }
  }
}

void flatten_json(const json& j, const std::string& prefix,
                  std::map<std::string, std::string, std::less<>>& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten_json(v, key, out);
    } else if (v.is_string()) {
      out[key] = v.get<std::string>();
    } else if (v.is_boolean() || v.is_number()) {
      out[key] = v.dump();
    } else {
      throw DataError("setting '" + key + "' must be a scalar");
    }
  }
}

}  // namespace

const std::vector<SettingSpec>& setting_specs() {
  static const std::vector<SettingSpec> kSpecs = build_specs();
  return kSpecs;
}

std::string env_name(std::string_view key) {
  std::string out = "KGVIP_";
  for (char c : key) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

void Settings::load_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::map<std::string, std::string, std::less<>> values;
  if (path.extension() == ".toml") {
    try {
      flatten_toml(toml::parse(text, path.string()), "", values);
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << path.string() << ": " << e.description() << " (line " << e.source().begin.line << ")";
      throw DataError(os.str());
    }
  } else {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw DataError(path.string() + ": config must be an object");
    flatten_json(j, "", values);
  }
  for (const auto& [k, v] : values) {
    require_known(k, path.string());
    file_[k] = v;
  }
}

void Settings::load_env(const EnvLookup& lookup) {
  for (const auto& spec : setting_specs()) {
    if (auto v = lookup(env_name(spec.key))) env_[spec.key] = *v;
  }
}

void Settings::load_process_env() {
  load_env([](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    return v ? std::optional<std::string>(v) : std::nullopt;
  });
}

void Settings::set_flag(std::string_view key, std::string value) {
  require_known(key, "flag");
  flags_[std::string(key)] = std::move(value);
}

void Settings::set_flag_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw DataError("expected key=value, got '" + std::string(assignment) + "'");
  }
  set_flag(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string Settings::get(std::string_view key) const {
  const auto* spec = find_spec(key);
  if (!spec) throw Error("unknown setting '" + std::string(key) + "'");
  for (const auto* layer : {&flags_, &file_, &env_}) {
    if (auto it = layer->find(key); it != layer->end()) return it->second;
  }
  return spec->default_value;
}

std::string Settings::source(std::string_view key) const {
  if (flags_.contains(key)) return "flag";
  if (file_.contains(key)) return "file";
  if (env_.contains(key)) return "env";
  return "default";
}

double Settings::get_double(std::string_view key) const {
  const auto v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw DataError("setting '" + std::string(key) + "' must be a number (got '" + v + "')");
}

long long Settings::get_int(std::string_view key) const {
  const auto v = get(key);
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw DataError("setting '" + std::string(key) + "' must be an integer (got '" + v + "')");
}

std::size_t Settings::get_size(std::string_view key) const {
  const auto i = get_int(key);
  if (i < 0) throw DataError("setting '" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(i);
}

bool Settings::get_bool(std::string_view key) const {
  const auto v = to_lower(get(key));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw DataError("setting '" + std::string(key) + "' must be a boolean (got '" + v + "')");
}

json Settings::redacted() const {
  json out = json::object();
  for (const auto& spec : setting_specs()) {
    const auto v = get(spec.key);
    out[spec.key] = spec.secret && !v.empty() ? "***" : v;
  }
  return out;
}

PipelineConfig pipeline_config(const Settings& s) {
  PipelineConfig c;
  c.retrieval.k = s.get_size("retrieval.k");
  c.retrieval.n = s.get_size("retrieval.n");
  c.retrieval.m = s.get_size("retrieval.m");
  c.retrieval.link_threshold = s.get_double("retrieval.link_threshold");
  c.retrieval.vision_mode = vision_mode_from_string(s.get("retrieval.vision_mode"));
  c.retrieval.ranking.restart = s.get_double("retrieval.restart");
  c.retrieval.ranking.tolerance = s.get_double("retrieval.tolerance");
  c.retrieval.ranking.max_iterations = static_cast<int>(s.get_int("retrieval.max_iterations"));
  c.alpha = s.get_double("fusion.alpha");
  c.tau = s.get_double("fusion.tau");
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw DataError("fusion.alpha must be in [0,1]");
  if (!(c.tau >= -1.0 && c.tau <= 1.0)) throw DataError("fusion.tau must be in [-1,1]");
  c.refine_steps = s.get_size("refinement.steps");
  c.scene_graph = s.get_bool("pipeline.scene_graph");
  c.text_retrieval = s.get_bool("pipeline.text_retrieval");
  c.vision_retrieval = s.get_bool("pipeline.vision_retrieval");
  c.pruning = prune_mode_from_string(s.get("pipeline.pruning"));
  c.fusion = s.get_bool("pipeline.fusion");
  c.refinement = s.get_bool("pipeline.refinement");
  return c;
}

GatewayConfig gateway_config(const Settings& s) {
  GatewayConfig c;
  c.retry_budget = static_cast<int>(s.get_int("gateway.retry_budget"));
  c.max_in_flight = static_cast<int>(s.get_int("gateway.max_in_flight"));
  c.temperature = s.get_double("gateway.temperature");
  c.max_tokens = static_cast<int>(s.get_int("gateway.max_tokens"));
  if (c.retry_budget < 0) throw DataError("gateway.retry_budget must be non-negative");
  const int timeout = static_cast<int>(s.get_int("gateway.timeout_seconds"));
  const std::string shared_key = s.get("api_key");
  for (auto role : kRoles) {
    const std::string prefix = "endpoint." + std::string(to_string(role)) + ".";
    const auto url = s.get(prefix + "url");
    if (url.empty()) continue;
    Endpoint e;
    e.url = url;
    e.model = s.get(prefix + "model");
    e.api_key = s.get(prefix + "api_key");
    if (e.api_key.empty()) e.api_key = shared_key;
    e.timeout_seconds = timeout;
    c.endpoints[role] = std::move(e);
  }
  return c;
}

}  // namespace kgvip
