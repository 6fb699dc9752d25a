// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "httplib.h"

#include "kgvip/gateway.hpp"

namespace kgvip {
namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw GatewayError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpTransport final : public Transport {
 public:
  json post(const Endpoint& endpoint, const json& body) override {
    const auto [origin, path] = split_url(endpoint.url);
    httplib::Client client(origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(endpoint.timeout_seconds);
    client.set_write_timeout(endpoint.timeout_seconds);

    httplib::Headers headers;
    if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      throw GatewayError("transport error calling " + endpoint.url + ": " +
                         httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw GatewayError("HTTP " + std::to_string(res->status) + " from " + endpoint.url + ": " +
                         res->body.substr(0, 200));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw GatewayError("non-JSON response from " + endpoint.url + ": " + e.what());
    }
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttpTransport>(); }

}  // namespace kgvip
