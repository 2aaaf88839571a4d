#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "sqlink/error.hpp"

namespace sqlink::detail {

struct UrlParts {
  std::string base;  // scheme://host[:port]
  std::string path;  // /path or "/"
};

inline UrlParts split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint URL missing scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string bearer_from_env(const std::string& env_name) {
  if (env_name.empty()) return "";
  const char* v = std::getenv(env_name.c_str());
  return v != nullptr ? v : "";
}

// POST with JSON body, retrying transport failures and 5xx with exponential
// backoff. Returns the parsed response body.
inline nlohmann::json post_json_with_retries(const std::string& url,
                                             const nlohmann::json& body,
                                             const std::string& auth_env,
                                             int timeout_seconds, int retries,
                                             double backoff_seconds) {
  UrlParts parts = split_url(url);
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) {
      auto delay = backoff_seconds * double(1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    httplib::Client client(parts.base);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    httplib::Headers headers;
    std::string token = bearer_from_env(auth_env);
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    auto res = client.Post(parts.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error: HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ClientError("endpoint returned HTTP " + std::to_string(res->status) +
                        ": " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ClientError("endpoint returned malformed JSON: " + std::string(e.what()));
    }
  }
  throw ClientError("request to " + url + " failed after " +
                    std::to_string(retries + 1) + " attempts: " + last_error);
}

}  // namespace sqlink::detail
