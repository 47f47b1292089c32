#include "sif/http_client.hpp"

#include <thread>

#include <httplib.h>

namespace sif {

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, const std::string& bearer,
                         std::chrono::milliseconds timeout, int max_attempts) {
  const auto target = split_url(url);
  const std::string payload = body.dump();
  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= std::max(1, max_attempts); ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(std::chrono::milliseconds(50 * (attempt - 1)));
    httplib::Client client(target.origin);
    if (!client.is_valid()) throw TransportError("unsupported endpoint " + target.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

    auto res = client.Post(target.path, headers, payload, "application/json");
    if (!res) {
      last_error = "request to " + url + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "endpoint " + url + " returned HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("endpoint " + url + " returned HTTP " + std::to_string(res->status));
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw TransportError("endpoint " + url + " returned non-JSON body");
    return parsed;
  }
  throw TransportError(last_error + " (after " + std::to_string(max_attempts) + " attempts)");
}

std::string chat_reply_text(const nlohmann::json& reply) {
  const auto* choices = reply.is_object() && reply.contains("choices") ? &reply.at("choices") : nullptr;
  if (!choices || !choices->is_array() || choices->empty()) return {};
  const auto& first = choices->front();
  if (!first.is_object() || !first.contains("message")) return {};
  const auto& message = first.at("message");
  if (!message.is_object() || !message.contains("content") || !message.at("content").is_string()) return {};
  return message.at("content").get<std::string>();
}

}  // namespace sif
