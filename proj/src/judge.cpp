#include "sif/judge.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <vector>

#include "sif/http_client.hpp"

namespace sif {
namespace {

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

const std::string_view kDefaultJudgePrompt =
    "You are grading an answer to a visual question.\n"
    "Question: {question}\n"
    "Reference answer: {ground_truth}\n"
    "Model answer: {prediction}\n"
    "Rate how well the model answer matches the reference in meaning, as a single number "
    "between 0 and 1 (1 = fully correct, 0 = wrong). Reply with the number only.";

double token_f1(std::string_view prediction, std::string_view ground_truth) {
  const auto pred = normalized_tokens(prediction);
  const auto gold = normalized_tokens(ground_truth);
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

double MockJudge::score(const JudgeQuery& query) { return token_f1(query.prediction, query.ground_truth); }

std::string render_template(std::string_view tmpl,
                            std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    const auto name = tmpl.substr(open + 1, close - open - 1);
    const auto hit = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
    out.append(tmpl.substr(pos, open - pos));
    if (hit != values.end()) {
      out.append(hit->second);
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

double parse_judge_reply(std::string_view reply) {
  for (std::size_t i = 0; i < reply.size(); ++i) {
    const char c = reply[i];
    const bool starts = std::isdigit(static_cast<unsigned char>(c)) ||
                        (c == '.' && i + 1 < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i + 1])));
    if (!starts) continue;
    double v = 0.0;
    const auto res = std::from_chars(reply.data() + i, reply.data() + reply.size(), v);
    if (res.ec != std::errc()) continue;
    if (i > 0 && reply[i - 1] == '-') v = -v;
    return std::clamp(v, 0.0, 1.0);
  }
  throw JudgeError(JudgeErrorKind::Unparseable, "judge reply contains no score: \"" + std::string(reply.substr(0, 200)) + "\"");
}

HttpJudge::HttpJudge(HttpEndpoint endpoint, std::string prompt_template)
    : endpoint_(std::move(endpoint)), template_(std::move(prompt_template)) {}

double HttpJudge::score(const JudgeQuery& query) {
  const auto prompt = render_template(template_, {{"question", query.question},
                                                  {"prediction", query.prediction},
                                                  {"ground_truth", query.ground_truth}});
  nlohmann::json body = {
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", 0},
  };
  if (!endpoint_.model.empty()) body["model"] = endpoint_.model;

  nlohmann::json reply;
  try {
    reply = post_json(endpoint_.url, body, endpoint_.api_key, endpoint_.timeout, endpoint_.max_attempts);
  } catch (const TransportError& e) {
    throw JudgeError(JudgeErrorKind::Transport, e.what());
  }
  const auto text = chat_reply_text(reply);
  if (text.empty()) throw JudgeError(JudgeErrorKind::Unparseable, "judge reply has no message content");
  return parse_judge_reply(text);
}

ThrottledJudge::ThrottledJudge(std::shared_ptr<JudgeClient> inner, int limit)
    : inner_(std::move(inner)), slots_(std::max(1, limit)) {}

double ThrottledJudge::score(const JudgeQuery& query) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_->score(query);
}

}  // namespace sif
