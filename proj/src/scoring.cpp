#include "sif/scoring.hpp"

#include "sif/kernels.hpp"

namespace sif {
namespace {

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw WireError(std::string(where) + " is missing \"" + key + "\"");
  }
  return obj.at(key);
}

std::string require_string(const nlohmann::json& obj, const char* key, const char* where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw WireError(std::string(where) + "." + key + " must be a string");
  return v.get<std::string>();
}

std::shared_ptr<const DepthMap> depth_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return std::make_shared<const DepthMap>(load_depth_map(p));
  }
  if (j.is_object() && j.contains("path") && j.at("path").is_string()) {
    return depth_from_json(j.at("path"), base_dir);
  }
  if (j.is_object() && j.contains("pgm_hex") && j.at("pgm_hex").is_string()) {
    std::vector<std::uint8_t> bytes;
    try {
      bytes = hex_decode(j.at("pgm_hex").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw WireError(std::string("ground_truth.depth_map.pgm_hex: ") + e.what());
    }
    return std::make_shared<const DepthMap>(parse_depth_pgm(bytes));
  }
  throw WireError("ground_truth.depth_map must be a path string, {\"path\": ...} or {\"pgm_hex\": ...}");
}

RewardWeights weights_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw WireError("weights must be an object");
  RewardWeights w;
  const auto read = [&](const char* key, double& slot) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number()) throw WireError(std::string("weights.") + key + " must be a number");
    slot = j.at(key).get<double>();
  };
  read("format", w.format);
  read("answer", w.answer);
  read("bbox", w.bbox);
  read("depth", w.depth);
  try {
    validate(w);
  } catch (const std::invalid_argument& e) {
    throw WireError(e.what());
  }
  return w;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

void validate(const ScoringConfig& cfg) {
  validate(cfg.settings.weights);
  validate(cfg.settings.depth);
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("stability delta must be positive");
  if (cfg.group_size < 0) throw std::invalid_argument("group size must be >= 1 (or 0 for any)");
}

GroupScorer::GroupScorer(JudgeClient& judge, JudgeHistory& history, ScoringConfig config)
    : judge_(judge), history_(history), config_(std::move(config)) {
  validate(config_);
}

std::shared_ptr<std::mutex> GroupScorer::sample_lock(const std::string& sample_id) {
  std::lock_guard guard(locks_mutex_);
  auto& slot = locks_[sample_id];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

GroupResult GroupScorer::score(const GroupRequest& request) {
  if (request.completions.empty()) throw WireError("completions must not be empty");
  if (config_.group_size > 0 && request.completions.size() != static_cast<std::size_t>(config_.group_size)) {
    throw WireError("expected " + std::to_string(config_.group_size) + " completions, got " +
                    std::to_string(request.completions.size()));
  }

  const auto lock = sample_lock(request.sample_id);
  std::lock_guard guard(*lock);
  history_.check_iteration(request.sample_id, request.iteration);

  std::optional<double> prior;
  if (const auto snap = history_.read(request.sample_id)) prior = snap->mean();

  auto settings = config_.settings;
  if (request.weights) settings.weights = *request.weights;

  GroupResult result;
  result.breakdowns =
      config_.parallel
          ? kernels::score_completions(request.completions, request.ground_truth, judge_, prior, settings)
          : kernels::score_completions_serial(request.completions, request.ground_truth, judge_, prior, settings);

  std::vector<double> totals, judge_scores;
  for (const auto& b : result.breakdowns) {
    totals.push_back(b.total);
    judge_scores.push_back(b.judge_score);
  }
  result.advantages = group_advantages(totals, config_.delta);
  history_.update(request.sample_id, request.iteration, std::move(judge_scores));
  return result;
}

BoxSet boxes_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw WireError("boxes must be a JSON array");
  BoxSet out;
  for (const auto& item : j) {
    const nlohmann::json* coords = &item;
    if (item.is_object()) {
      if (!item.contains("bbox")) throw WireError("box object lacks \"bbox\"");
      coords = &item.at("bbox");
    }
    if (!coords->is_array() || coords->size() != 4 ||
        !std::all_of(coords->begin(), coords->end(), [](const auto& v) { return v.is_number(); })) {
      throw WireError("each box must be [x1, y1, x2, y2]");
    }
    BBox b{(*coords)[0].get<double>(), (*coords)[1].get<double>(), (*coords)[2].get<double>(),
           (*coords)[3].get<double>()};
    try {
      validate(b);
    } catch (const ValidationError& e) {
      throw WireError(e.what());
    }
    out.push_back(b);
  }
  return out;
}

nlohmann::json boxes_to_json(const BoxSet& boxes) {
  auto arr = nlohmann::json::array();
  for (const auto& b : boxes) arr.push_back({b.x1, b.y1, b.x2, b.y2});
  return arr;
}

GroupRequest parse_group_request(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw WireError("request body must be a JSON object");
  GroupRequest req;
  req.sample_id = require_string(j, "sample_id", "request");
  if (req.sample_id.empty()) throw WireError("sample_id must not be empty");
  const auto& iteration = require(j, "iteration", "request");
  if (!iteration.is_number_integer()) throw WireError("iteration must be an integer");
  req.iteration = iteration.get<std::int64_t>();

  const auto& gt = require(j, "ground_truth", "request");
  req.ground_truth.answer = require_string(gt, "answer", "ground_truth");
  if (gt.contains("question")) {
    if (!gt.at("question").is_string()) throw WireError("ground_truth.question must be a string");
    req.ground_truth.question = gt.at("question").get<std::string>();
  } else if (j.contains("question") && j.at("question").is_string()) {
    req.ground_truth.question = j.at("question").get<std::string>();
  }
  req.ground_truth.boxes = boxes_from_json(require(gt, "boxes", "ground_truth"));
  if (req.ground_truth.boxes.empty()) throw WireError("ground_truth.boxes must not be empty");

  const auto& completions = require(j, "completions", "request");
  if (!completions.is_array()) throw WireError("completions must be an array");
  for (const auto& c : completions) {
    if (!c.is_string()) throw WireError("every completion must be a string");
    req.completions.push_back(c.get<std::string>());
  }
  if (req.completions.empty()) throw WireError("completions must not be empty");
  if (j.contains("weights") && !j.at("weights").is_null()) req.weights = weights_from_json(j.at("weights"));

  // Loaded last: an unreadable map is reported only for otherwise valid requests.
  req.ground_truth.depth = depth_from_json(require(gt, "depth_map", "ground_truth"), base_dir);
  return req;
}

nlohmann::json to_json(const RewardBreakdown& b) {
  nlohmann::json diag = {{"s_init", b.s_init}, {"s_end", b.s_end}, {"judge_score", b.judge_score}};
  if (b.parse_error) {
    diag["parse_error"] = {{"kind", std::string(to_string(b.parse_error->kind))},
                           {"offset", b.parse_error->offset},
                           {"message", b.parse_error->message}};
  } else {
    diag["parse_error"] = nullptr;
  }
  return {{"r_format", b.r_format}, {"r_ans", b.r_ans},   {"r_bbox", b.r_bbox},
          {"r_depth", b.r_depth},   {"total", b.total},   {"diagnostics", std::move(diag)}};
}

nlohmann::json rewards_to_json(const GroupResult& r) {
  auto arr = nlohmann::json::array();
  for (const auto& b : r.breakdowns) arr.push_back(to_json(b));
  return arr;
}

nlohmann::json advantages_to_json(const GroupResult& r) { return r.advantages; }

std::vector<std::uint8_t> hex_decode(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = hex_value(hex[2 * i]), lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return out;
}

std::string hex_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xF];
  }
  return out;
}

}  // namespace sif
