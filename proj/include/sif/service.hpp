#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "sif/scoring.hpp"

namespace httplib {
class Server;
}

namespace sif {

inline constexpr const char* kVersion = "0.1.0";

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string judge_endpoint;
  std::string judge_api_key;
  std::string judge_model;
  std::filesystem::path judge_prompt;  // empty: built-in template
  bool mock_judge = false;
  RewardWeights weights;
  DepthTolerance depth;
  int group_size = 8;
  double delta = 1e-8;
  std::filesystem::path history_file;  // empty: in-memory only
  std::filesystem::path depth_root;    // base for relative depth-map paths
  int concurrency_limit = 8;
};

/// Reads a JSON config file; unknown keys are rejected.
ServiceConfig load_service_config(const std::filesystem::path& path);
/// Applies SIF_JUDGE_ENDPOINT / SIF_JUDGE_API_KEY when set. An endpoint from
/// the environment replaces a mock judge chosen by the config file.
void apply_environment(ServiceConfig& cfg);
void validate(const ServiceConfig& cfg);

/// Judge selected by the config: the mock, or a throttled HTTP judge.
std::shared_ptr<JudgeClient> make_judge(const ServiceConfig& cfg);
ScoringConfig scoring_config(const ServiceConfig& cfg);

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

/// Scores one wire-format request and maps failures to HTTP statuses:
/// 400 schema, 409 non-monotone iteration, 422 unreadable depth map, 502 judge.
HttpReply score_group_json(const nlohmann::json& request, GroupScorer& scorer,
                           const std::filesystem::path& depth_root);

/// HTTP front end over a GroupScorer:
///   POST /v1/score, GET /v1/health, GET /v1/history/{sample_id}.
class ScoringService {
 public:
  ScoringService(GroupScorer& scorer, JudgeHistory& history, std::filesystem::path depth_root = {});
  ~ScoringService();
  ScoringService(const ScoringService&) = delete;
  ScoringService& operator=(const ScoringService&) = delete;

  /// Transport-independent handlers.
  HttpReply handle_score(const std::string& body);
  HttpReply handle_health() const;
  HttpReply handle_history(const std::string& sample_id) const;

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and serves on a background thread; returns the port.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

 private:
  void install_routes();

  GroupScorer& scorer_;
  JudgeHistory& history_;
  std::filesystem::path depth_root_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<std::thread> thread_;
};

}  // namespace sif
