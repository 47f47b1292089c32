#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sif {

enum class JudgeErrorKind { Transport, Unparseable };

/// Judge failures are raised, never folded into a zero score: a silent zero
/// would skew the group statistics.
struct JudgeError : std::runtime_error {
  JudgeError(JudgeErrorKind k, const std::string& what) : std::runtime_error(what), kind(k) {}
  JudgeErrorKind kind;
};

struct JudgeQuery {
  std::string question;
  std::string prediction;
  std::string ground_truth;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  /// Continuous answer-quality score in [0,1]. Must be safe to call from
  /// several threads at once.
  virtual double score(const JudgeQuery& query) = 0;
};

/// Deterministic offline judge: token-level F1 between the normalized
/// prediction and ground truth (lowercased, punctuation stripped).
class MockJudge final : public JudgeClient {
 public:
  double score(const JudgeQuery& query) override;
};

double token_f1(std::string_view prediction, std::string_view ground_truth);

/// Default evaluation prompt; placeholders {question}, {prediction}, {ground_truth}.
extern const std::string_view kDefaultJudgePrompt;

/// Substitutes every {name} placeholder present in `values`.
std::string render_template(std::string_view tmpl,
                            std::initializer_list<std::pair<std::string_view, std::string_view>> values);

struct HttpEndpoint {
  std::string url;  // scheme://host[:port]/path
  std::string api_key;
  std::string model;
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
};

/// Sends one chat-completion-style request per query and reads the first
/// number in the reply text, clamped to [0,1].
class HttpJudge final : public JudgeClient {
 public:
  HttpJudge(HttpEndpoint endpoint, std::string prompt_template = std::string(kDefaultJudgePrompt));
  double score(const JudgeQuery& query) override;

 private:
  HttpEndpoint endpoint_;
  std::string template_;
};

/// First decimal number in `reply`, clamped to [0,1].
double parse_judge_reply(std::string_view reply);

/// Admits at most `limit` concurrent calls into the wrapped judge.
class ThrottledJudge final : public JudgeClient {
 public:
  ThrottledJudge(std::shared_ptr<JudgeClient> inner, int limit);
  double score(const JudgeQuery& query) override;

 private:
  std::shared_ptr<JudgeClient> inner_;
  std::counting_semaphore<> slots_;
};

}  // namespace sif
