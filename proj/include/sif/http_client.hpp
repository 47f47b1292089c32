#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

namespace sif {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/'
};

ParsedUrl split_url(const std::string& url);

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// POSTs a JSON body, retrying connection failures, 429 and 5xx replies up
/// to `max_attempts` times. Other non-2xx statuses fail immediately.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, const std::string& bearer,
                         std::chrono::milliseconds timeout, int max_attempts);

/// Text of choices[0].message.content in a chat-completion reply.
std::string chat_reply_text(const nlohmann::json& reply);

}  // namespace sif
