#include "sif/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace sif {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\n\r\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\n\r\f\v");
  return s.substr(first, last - first + 1);
}

double judge_answer(JudgeClient& judge, const GroundTruth& gt, std::string_view answer) {
  return judge.score({gt.question, std::string(trim(answer)), gt.answer});
}

}  // namespace

void validate(const RewardWeights& w) {
  for (double v : {w.format, w.answer, w.bbox, w.depth}) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("reward weights must be finite and nonnegative");
  }
}

double progressive_answer_reward(double s_now, std::optional<double> prior_mean) {
  if (!prior_mean) return s_now;
  return s_now + (s_now - *prior_mean);
}

GroundingScore grounding_reward(const ReasoningTrace& trace, const BoxSet& gt) {
  if (trace.steps.empty()) throw DomainError("grounding reward needs at least one step");
  const auto sets = extract_boxsets(trace);
  const auto initial = std::find_if(sets.begin(), sets.end(), [](const BoxSet& s) { return !is_full_image(s); });
  const BoxSet& end_set = sets.back();
  const BoxSet& init_set = initial != sets.end() ? *initial : end_set;

  GroundingScore g;
  g.s_end = hiou(end_set, gt);
  g.s_init = &init_set == &end_set ? g.s_end : hiou(init_set, gt);
  g.r_bbox = g.s_end + (g.s_end - g.s_init);
  return g;
}

RewardBreakdown composite_reward(std::string_view raw, const GroundTruth& gt, JudgeClient& judge,
                                 std::optional<double> prior_judge_mean, const RewardSettings& settings) {
  if (gt.boxes.empty()) throw DomainError("ground truth carries no boxes");
  if (!gt.depth) throw std::invalid_argument("ground truth carries no depth map");

  RewardBreakdown out;
  auto parsed = parse_trace(raw, settings.parse);
  if (parsed) {
    const auto& trace = parsed.trace();
    out.r_format = 1.0;
    out.judge_score = judge_answer(judge, gt, trace.answer);
    const auto grounding = grounding_reward(trace, gt.boxes);
    out.r_bbox = grounding.r_bbox;
    out.s_init = grounding.s_init;
    out.s_end = grounding.s_end;
    out.r_depth = depth_reward(trace, *gt.depth, settings.depth);
  } else {
    out.parse_error = parsed.error();
    if (const auto answer = extract_answer_loose(raw)) out.judge_score = judge_answer(judge, gt, *answer);
  }
  out.r_ans = progressive_answer_reward(out.judge_score, prior_judge_mean);

  const auto& w = settings.weights;
  out.total = w.format * out.r_format + w.answer * out.r_ans + w.bbox * out.r_bbox + w.depth * out.r_depth;
  return out;
}

std::vector<double> group_advantages(std::span<const double> rewards, double delta) {
  if (rewards.empty()) throw DomainError("advantages of an empty group");
  if (!(delta > 0.0)) throw std::invalid_argument("stability delta must be positive");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double denom = std::sqrt(ss / n) + delta;
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / denom);
  return out;
}

double HistorySnapshot::mean() const {
  if (scores.empty()) return 0.0;
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

JudgeHistory::JudgeHistory(std::filesystem::path file) : file_(std::move(file)) { load(); }

void JudgeHistory::load() {
  std::ifstream in(*file_);
  if (!in) return;  // first run
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("sample_id") || !j.contains("iteration") ||
        !j.contains("scores")) {
      throw std::runtime_error("history file " + file_->string() + ":" + std::to_string(lineno) + " is malformed");
    }
    HistorySnapshot snap{j.at("iteration").get<std::int64_t>(), j.at("scores").get<std::vector<double>>()};
    const auto [it, fresh] = entries_.try_emplace(j.at("sample_id").get<std::string>(), snap);
    if (!fresh && snap.iteration > it->second.iteration) it->second = std::move(snap);
  }
}

std::optional<HistorySnapshot> JudgeHistory::read(const std::string& sample_id) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(sample_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void JudgeHistory::check_iteration(const std::string& sample_id, std::int64_t iteration) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(sample_id);
  if (it != entries_.end() && iteration <= it->second.iteration) {
    throw HistoryConflict("iteration " + std::to_string(iteration) + " for sample \"" + sample_id +
                          "\" does not exceed stored iteration " + std::to_string(it->second.iteration));
  }
}

void JudgeHistory::update(const std::string& sample_id, std::int64_t iteration, std::vector<double> scores) {
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("judge scores must lie in [0,1]");
  }
  std::unique_lock lock(mutex_);
  auto it = entries_.find(sample_id);
  if (it != entries_.end() && iteration <= it->second.iteration) {
    throw HistoryConflict("iteration " + std::to_string(iteration) + " for sample \"" + sample_id +
                          "\" does not exceed stored iteration " + std::to_string(it->second.iteration));
  }
  if (file_) {
    std::ofstream out(*file_, std::ios::app);
    out << nlohmann::json{{"sample_id", sample_id}, {"iteration", iteration}, {"scores", scores}}.dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot append to history file " + file_->string());
  }
  entries_[sample_id] = HistorySnapshot{iteration, std::move(scores)};
}

std::size_t JudgeHistory::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace sif
