#pragma once

// HTTP transport for HttpChatClient. Separate header so the large httplib
// dependency is only pulled in by the CLI.

#include <chrono>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "sgltn/llm.hpp"

namespace sgltn {

namespace detail {

// Splits "http://host:port/path" into base and path.
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  auto scheme = endpoint.find("://");
  check(scheme != std::string::npos, "http chat client: endpoint must include a scheme: " + endpoint);
  auto path_start = endpoint.find('/', scheme + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace detail

inline std::string HttpChatClient::complete(const std::string& prompt) {
  auto [base, path] = detail::split_endpoint(cfg_.endpoint);
  nlohmann::json body{
      {"model", cfg_.model},
      {"temperature", cfg_.temperature},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  httplib::Client client(base);
  client.set_read_timeout(cfg_.timeout_seconds, 0);
  client.set_connection_timeout(cfg_.timeout_seconds, 0);
  httplib::Headers headers{{"Authorization", "Bearer " + cfg_.api_key}};

  std::string last_error;
  for (int attempt = 0; attempt < std::max(1, cfg_.transport_retries); ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(250 * (1 << (attempt - 1))));
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error: HTTP " + std::to_string(res->status);
      continue;
    }
    check(res->status == 200, "http chat client: HTTP " + std::to_string(res->status) + ": " +
                                  res->body);
    try {
      nlohmann::json j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw Error(std::string("http chat client: malformed response: ") + e.what());
    }
  }
  throw Error("http chat client: all retries failed: " + last_error);
}

}  // namespace sgltn
