#include "sif/service.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>

#include <httplib.h>

namespace sif {
namespace {

HttpReply error_reply(int status, const std::string& kind, const std::string& message) {
  return {status, {{"error", kind}, {"message", message}}};
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& slot) {
  if (j.contains(key)) slot = j.at(key).get<T>();
}

}  // namespace

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::runtime_error("config file " + path.string() + " is not a JSON object");

  static const std::set<std::string> kKnown = {
      "host",          "port",          "judge_endpoint", "judge_api_key",   "judge_model",
      "judge_prompt",  "mock_judge",    "weights",        "depth_threshold", "depth_gt_floor",
      "depth_statistic", "group_size",  "delta",          "history_file",    "depth_root",
      "concurrency_limit"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.count(key)) throw std::runtime_error("unknown config key \"" + key + "\"");
  }

  ServiceConfig cfg;
  try {
    read_key(j, "host", cfg.host);
    read_key(j, "port", cfg.port);
    read_key(j, "judge_endpoint", cfg.judge_endpoint);
    read_key(j, "judge_api_key", cfg.judge_api_key);
    read_key(j, "judge_model", cfg.judge_model);
    if (j.contains("judge_prompt")) cfg.judge_prompt = j.at("judge_prompt").get<std::string>();
    read_key(j, "mock_judge", cfg.mock_judge);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      read_key(w, "format", cfg.weights.format);
      read_key(w, "answer", cfg.weights.answer);
      read_key(w, "bbox", cfg.weights.bbox);
      read_key(w, "depth", cfg.weights.depth);
    }
    read_key(j, "depth_threshold", cfg.depth.threshold);
    read_key(j, "depth_gt_floor", cfg.depth.gt_floor);
    if (j.contains("depth_statistic")) {
      const auto stat = j.at("depth_statistic").get<std::string>();
      if (stat == "mean") cfg.depth.statistic = RegionStatistic::Mean;
      else if (stat == "median") cfg.depth.statistic = RegionStatistic::Median;
      else throw std::runtime_error("depth_statistic must be \"mean\" or \"median\"");
    }
    read_key(j, "group_size", cfg.group_size);
    read_key(j, "delta", cfg.delta);
    if (j.contains("history_file")) cfg.history_file = j.at("history_file").get<std::string>();
    if (j.contains("depth_root")) cfg.depth_root = j.at("depth_root").get<std::string>();
    read_key(j, "concurrency_limit", cfg.concurrency_limit);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config file " + path.string() + ": " + e.what());
  }
  return cfg;
}

void apply_environment(ServiceConfig& cfg) {
  if (const char* v = std::getenv("SIF_JUDGE_ENDPOINT"); v && *v) {
    cfg.judge_endpoint = v;
    cfg.mock_judge = false;
  }
  if (const char* v = std::getenv("SIF_JUDGE_API_KEY"); v && *v) cfg.judge_api_key = v;
}

void validate(const ServiceConfig& cfg) {
  validate(scoring_config(cfg));
  if (cfg.mock_judge && !cfg.judge_endpoint.empty()) {
    throw std::invalid_argument("both the mock judge and a judge endpoint are configured");
  }
  if (!cfg.mock_judge && cfg.judge_endpoint.empty()) {
    throw std::invalid_argument("no judge configured: pass --mock-judge or a judge endpoint");
  }
  if (cfg.concurrency_limit < 1) throw std::invalid_argument("concurrency limit must be positive");
  if (cfg.port < 0 || cfg.port > 65535) throw std::invalid_argument("port out of range");
}

std::shared_ptr<JudgeClient> make_judge(const ServiceConfig& cfg) {
  if (cfg.mock_judge) return std::make_shared<MockJudge>();
  HttpEndpoint ep{cfg.judge_endpoint, cfg.judge_api_key, cfg.judge_model};
  std::string prompt(kDefaultJudgePrompt);
  if (!cfg.judge_prompt.empty()) {
    std::ifstream in(cfg.judge_prompt);
    if (!in) throw std::runtime_error("cannot read judge prompt " + cfg.judge_prompt.string());
    prompt.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return std::make_shared<ThrottledJudge>(std::make_shared<HttpJudge>(std::move(ep), std::move(prompt)),
                                          cfg.concurrency_limit);
}

ScoringConfig scoring_config(const ServiceConfig& cfg) {
  ScoringConfig sc;
  sc.settings.weights = cfg.weights;
  sc.settings.depth = cfg.depth;
  sc.delta = cfg.delta;
  sc.group_size = cfg.group_size;
  return sc;
}

ScoringService::ScoringService(GroupScorer& scorer, JudgeHistory& history, std::filesystem::path depth_root)
    : scorer_(scorer), history_(history), depth_root_(std::move(depth_root)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ScoringService::~ScoringService() { stop(); }

HttpReply score_group_json(const nlohmann::json& request, GroupScorer& scorer,
                           const std::filesystem::path& depth_root) {
  try {
    const auto parsed = parse_group_request(request, depth_root);
    const auto result = scorer.score(parsed);
    return {200, {{"rewards", rewards_to_json(result)}, {"advantages", advantages_to_json(result)}}};
  } catch (const WireError& e) {
    return error_reply(400, "schema", e.what());
  } catch (const DepthIoError& e) {
    return error_reply(422, "depth_map", e.what());
  } catch (const HistoryConflict& e) {
    return error_reply(409, "iteration", e.what());
  } catch (const JudgeError& e) {
    return error_reply(502, "judge", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "internal", e.what());
  }
}

HttpReply ScoringService::handle_score(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) return error_reply(400, "schema", "request body is not valid JSON");
  return score_group_json(j, scorer_, depth_root_);
}

HttpReply ScoringService::handle_health() const {
  return {200, {{"status", "ok"}, {"name", "sif-reward"}, {"version", kVersion}}};
}

HttpReply ScoringService::handle_history(const std::string& sample_id) const {
  const auto snap = history_.read(sample_id);
  if (!snap) return error_reply(404, "not_found", "no history for sample \"" + sample_id + "\"");
  return {200, {{"sample_id", sample_id}, {"iteration", snap->iteration}, {"scores", snap->scores}}};
}

void ScoringService::install_routes() {
  const auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  server_->Post("/v1/score", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_score(req.body));
  });
  server_->Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_health());
  });
  server_->Get(R"(/v1/history/(.+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_history(httplib::detail::decode_url(req.matches[1].str(), false)));
  });
}

bool ScoringService::listen(const std::string& host, int port) { return server_->listen(host, port); }

int ScoringService::start_background(const std::string& host) {
  const int port = server_->bind_to_any_port(host);
  if (port < 0) throw std::runtime_error("cannot bind scoring service");
  thread_ = std::make_unique<std::thread>([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void ScoringService::stop() {
  if (server_) server_->stop();
  if (thread_ && thread_->joinable()) thread_->join();
  thread_.reset();
}

}  // namespace sif
