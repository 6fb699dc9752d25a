// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// Run settings as flat dotted keys ("retrieval.k", "endpoint.chat.url").
// Each key resolves flag > config file > environment > default. The
// environment name of a key is KGVIP_ followed by the key upper-cased with
// dots replaced by underscores (KGVIP_RETRIEVAL_K, KGVIP_ENDPOINT_CHAT_URL);
// the shared credential is KGVIP_API_KEY.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgvip/gateway.hpp"
#include "kgvip/pipeline.hpp"

namespace kgvip {

struct SettingSpec {
  std::string key;
  std::string default_value;
  bool secret = false;
};

const std::vector<SettingSpec>& setting_specs();

std::string env_name(std::string_view key);

class Settings {
 public:
  using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

  // TOML for *.toml, JSON otherwise. Nested tables flatten to dotted keys.
  // Throws DataError on parse errors and unknown keys.
  void load_file(const std::filesystem::path& path);
  void load_env(const EnvLookup& lookup);
  void load_process_env();
  // Throws DataError for an unknown key.
  void set_flag(std::string_view key, std::string value);
  // "key=value"
  void set_flag_assignment(std::string_view assignment);

  std::string get(std::string_view key) const;
  // "flag", "file", "env" or "default".
  std::string source(std::string_view key) const;

  double get_double(std::string_view key) const;
  long long get_int(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  // Every key with its resolved value; secrets print as "***" when set.
  json redacted() const;

 private:
  std::map<std::string, std::string, std::less<>> flags_, file_, env_;
};

PipelineConfig pipeline_config(const Settings& settings);

// Endpoints with a URL, retry/concurrency limits and decoding params. The
// cassette mode and files are left to the caller.
GatewayConfig gateway_config(const Settings& settings);

}  // namespace kgvip
