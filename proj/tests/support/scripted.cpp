// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "scripted.hpp"

#include "kgvip/util.hpp"

namespace kgvip::testing {

json ScriptedTransport::post(const Endpoint& endpoint, const json& body) {
  ++calls_;
  constexpr std::string_view kScheme = "scripted://";
  if (!endpoint.url.starts_with(kScheme)) throw GatewayError("not a scripted endpoint: " + endpoint.url);
  // The role is the last path segment, so "scripted://mirror/chat" also works.
  return handler_(role_from_string(endpoint.url.substr(endpoint.url.rfind('/') + 1)), body);
}

json chat_reply(std::string_view text) {
  return {{"choices", json::array({{{"message", {{"content", std::string(text)}}}}})}};
}

json embedding_reply(const std::vector<double>& values) {
  return {{"dim", values.size()}, {"values", values}};
}

json score_reply(double score) { return {{"score", score}}; }

std::string prompt_text(const json& body) {
  std::string text;
  if (!body.contains("messages")) return body.value("payload", "");
  for (const auto& msg : body["messages"]) {
    for (const auto& part : msg["content"]) {
      if (part.value("type", "") == "text") text += part.value("text", "");
    }
  }
  return text;
}

std::vector<std::string> body_images(const json& body) {
  std::vector<std::string> out;
  if (body.value("modality", "") == "image") {
    out.push_back(base64_decode(body.value("payload", "")));
    return out;
  }
  if (!body.contains("messages")) return out;
  for (const auto& msg : body["messages"]) {
    for (const auto& part : msg["content"]) {
      if (part.value("type", "") != "image_url") continue;
      const std::string url = part["image_url"].value("url", "");
      const auto comma = url.find(";base64,");
      if (comma != std::string::npos) out.push_back(base64_decode(url.substr(comma + 8)));
    }
  }
  return out;
}

GatewayConfig scripted_gateway_config(CassetteMode mode) {
  GatewayConfig config;
  config.mode = mode;
  for (Role role : {Role::chat, Role::vision_chat, Role::text_embed, Role::image_embed, Role::judge,
                    Role::sas}) {
    config.endpoints[role] = Endpoint{"scripted://" + std::string(to_string(role)), "scripted", "", 5};
  }
  return config;
}

std::filesystem::path scratch_dir(std::string_view name) {
  const auto dir = std::filesystem::temp_directory_path() / ("kgvip_test_" + std::string(name));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace kgvip::testing
