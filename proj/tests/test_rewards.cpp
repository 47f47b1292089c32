#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "sif/rewards.hpp"

using namespace sif;
using doctest::Approx;

namespace {

std::string step(const std::string& boxes_json) {
  return "<area>" + boxes_json + "</area><text>look</text>";
}

std::string trace(const std::vector<std::string>& steps, const std::string& answer) {
  std::string s = "<think>";
  for (const auto& st : steps) s += st;
  return s + "</think><answer>" + answer + "</answer>";
}

GroundTruth half_gt(double depth_value = 0.5) {
  GroundTruth gt;
  gt.question = "what color?";
  gt.answer = "red";
  gt.boxes = {{0, 0, 0.5, 0.5}};
  gt.depth = std::make_shared<DepthMap>(4, 4, std::vector<double>(16, depth_value));
  return gt;
}

struct FixedJudge final : JudgeClient {
  double value;
  explicit FixedJudge(double v) : value(v) {}
  double score(const JudgeQuery&) override { return value; }
};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST_CASE("progressive answer reward") {
  CHECK(std::abs(progressive_answer_reward(0.9, 0.6) - 1.2) <= 1e-12);
  CHECK(progressive_answer_reward(0.5, std::nullopt) == 0.5);
  CHECK(std::abs(progressive_answer_reward(0.4, 0.7) - 0.1) <= 1e-12);
}

TEST_CASE("grounding reward") {
  const auto full = R"([{"bbox":[0,0,1,1],"depth":0.5}])";
  const auto exact = R"([{"bbox":[0,0,0.5,0.5],"depth":0.5}])";
  const auto far = R"([{"bbox":[0.6,0.6,0.9,0.9],"depth":0.5}])";
  const BoxSet gt{{0, 0, 0.5, 0.5}};

  auto g = grounding_reward(parse_trace(trace({step(full), step(far), step(exact)}, "a")).trace(), gt);
  CHECK(g.s_init == 0.0);
  CHECK(g.s_end == 1.0);
  CHECK(g.r_bbox == 2.0);

  // Steps of the full image are skipped when picking the initial set.
  g = grounding_reward(parse_trace(trace({step(full), step(full)}, "a")).trace(), {{0, 0, 0.5, 1}});
  CHECK(g.s_init == g.s_end);
  CHECK(g.r_bbox == g.s_end);
  CHECK(g.s_end == Approx(0.5));

  // Regression from a good first guess is penalized.
  g = grounding_reward(parse_trace(trace({step(exact), step(far)}, "a")).trace(), gt);
  CHECK(g.r_bbox < g.s_end);
  CHECK(g.r_bbox == -1.0);
}

TEST_CASE("r_bbox substitution") {
  const double s_end = 0.8, s_init = 0.3;
  CHECK(std::abs(s_end + (s_end - s_init) - 1.3) <= 1e-12);
}

TEST_CASE("composite reward examples") {
  const auto gt = half_gt();
  MockJudge judge;
  const auto perfect = trace({step(R"([{"bbox":[0,0,1,1],"depth":0.5}])"), step(R"([{"bbox":[0,0,0.5,0.5],"depth":0.5}])")},
                             "red");
  auto b = composite_reward(perfect, gt, judge, std::nullopt);
  CHECK(b.r_format == 1.0);
  CHECK(b.r_ans == 1.0);
  CHECK(b.r_bbox == 1.0);
  CHECK(b.r_depth == 1.0);
  CHECK(b.total == 4.0);

  // Correction from a disjoint first guess earns the maximum grounding term.
  const auto corrected =
      trace({step(R"([{"bbox":[0.6,0.6,0.9,0.9],"depth":0.5}])"), step(R"([{"bbox":[0,0,0.5,0.5],"depth":0.5}])")}, "red");
  b = composite_reward(corrected, gt, judge, std::nullopt);
  CHECK(b.total == 5.0);

  b = composite_reward("complete garbage", gt, judge, std::nullopt);
  CHECK(b.r_format == 0.0);
  CHECK(b.r_bbox == 0.0);
  CHECK(b.r_depth == 0.0);
  CHECK(b.r_ans == 0.0);
  CHECK(b.total == 0.0);
  REQUIRE(b.parse_error.has_value());
  CHECK(b.parse_error->kind == ParseErrorKind::UnexpectedContent);

  // s_init = s_end = 0.5 with a judge score of 0.5.
  FixedJudge half(0.5);
  GroundTruth wide = gt;
  wide.boxes = {{0, 0, 1, 0.5}};
  b = composite_reward(trace({step(R"([{"bbox":[0,0,0.5,0.5],"depth":0.5}])")}, "red"), wide, half, std::nullopt);
  CHECK(b.s_init == Approx(0.5));
  CHECK(b.s_end == Approx(0.5));
  CHECK(b.total == Approx(3.0).epsilon(1e-12));
}

TEST_CASE("parse failure still judges a loose answer") {
  const auto gt = half_gt();
  MockJudge judge;
  const auto b = composite_reward("<think>oops</think><answer>red</answer>", gt, judge, 0.25);
  CHECK(b.r_format == 0.0);
  CHECK(b.judge_score == 1.0);
  CHECK(b.r_ans == Approx(1.75));
  CHECK(b.r_bbox == 0.0);
  CHECK(b.r_depth == 0.0);
}

TEST_CASE("weights and total") {
  const auto gt = half_gt();
  MockJudge judge;
  RewardSettings s;
  s.weights = {0.5, 2.0, 0.25, 3.0};
  const auto raw = trace({step(R"([{"bbox":[0,0,0.6,0.5],"depth":0.9}])")}, "red shirt");
  const auto b = composite_reward(raw, gt, judge, 0.3, s);
  CHECK(b.judge_score == Approx(2.0 / 3));
  CHECK(b.r_depth == 0.0);
  CHECK(std::abs(b.total - (0.5 * b.r_format + 2.0 * b.r_ans + 0.25 * b.r_bbox + 3.0 * b.r_depth)) <= 1e-12);
  RewardWeights bad{1, -1, 1, 1};
  CHECK_THROWS(validate(bad));
}

TEST_CASE("composite bounds and gate on generated completions") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto gt = half_gt(0.4);
  MockJudge judge;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> steps;
    for (int k = 0; k < 1 + i % 4; ++k) {
      const double x = u(rng) * 0.5, y = u(rng) * 0.5;
      char buf[160];
      std::snprintf(buf, sizeof buf, R"([{"bbox":[%.3f,%.3f,%.3f,%.3f],"depth":%.3f}])", x, y, x + 0.3, y + 0.3, u(rng));
      steps.push_back(step(buf));
    }
    std::string raw = trace(steps, i % 3 ? "red" : "blue");
    if (i % 5 == 0) raw += "!";
    const auto b = composite_reward(raw, gt, judge, i % 2 ? std::optional<double>(u(rng)) : std::nullopt);
    CHECK((b.r_format == 0.0 || b.r_format == 1.0));
    CHECK((b.r_depth == 0.0 || b.r_depth == 1.0));
    CHECK(b.r_bbox >= -1.0);
    CHECK(b.r_bbox <= 2.0);
    CHECK(b.s_init >= 0.0);
    CHECK(b.s_end <= 1.0);
    if (b.r_format == 0.0) {
      CHECK(b.r_bbox == 0.0);
      CHECK(b.r_depth == 0.0);
    }
    CHECK(std::abs(b.total - (b.r_format + b.r_ans + b.r_bbox + b.r_depth)) <= 1e-12);
  }
}

TEST_CASE("group advantages") {
  CHECK(group_advantages(std::vector<double>{1, 1, 1, 1}) == std::vector<double>{0, 0, 0, 0});
  const auto two = group_advantages(std::vector<double>{1, 0});
  CHECK(two[0] == Approx(0.99999998).epsilon(1e-12));
  CHECK(two[1] == Approx(-0.99999998).epsilon(1e-12));
  CHECK(group_advantages(std::vector<double>{0.7}) == std::vector<double>{0});
  CHECK_THROWS(group_advantages(std::vector<double>{}));
  CHECK_THROWS(group_advantages(std::vector<double>{1, 2}, 0.0));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> r(8);
    for (auto& x : r) x = u(rng);
    const auto a = group_advantages(r);
    CHECK(std::abs(mean(a)) <= 1e-9);
    const double c = u(rng) * 10;
    auto shifted = r;
    for (auto& x : shifted) x += c;
    const auto b = group_advantages(shifted);
    for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-9);
    const auto best = std::max_element(r.begin(), r.end()) - r.begin();
    CHECK(std::max_element(a.begin(), a.end()) - a.begin() == best);
  }
}

TEST_CASE("judge history") {
  JudgeHistory h;
  CHECK_FALSE(h.read("s").has_value());
  h.update("s", 1, {0.5, 0.7});
  REQUIRE(h.read("s").has_value());
  CHECK(h.read("s")->mean() == Approx(0.6));
  h.update("s", 2, {0.1});
  CHECK(h.read("s")->iteration == 2);
  CHECK_THROWS_AS(h.update("s", 1, {0.3}), HistoryConflict);
  CHECK_THROWS_AS(h.update("s", 2, {0.3}), HistoryConflict);
  CHECK_THROWS_AS(h.check_iteration("s", 2), HistoryConflict);
  CHECK_NOTHROW(h.check_iteration("s", 3));
  CHECK_THROWS(h.update("t", 1, {1.5}));
  CHECK(h.size() == 1);
}

TEST_CASE("judge history persists across restarts") {
  const auto dir = std::filesystem::temp_directory_path() / "sif_history_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto file = dir / "h.jsonl";
  {
    JudgeHistory h(file);
    h.update("a", 0, {0.2});
    h.update("a", 3, {0.4, 0.6});
    h.update("b", 1, {1.0});
  }
  JudgeHistory again(file);
  CHECK(again.size() == 2);
  CHECK(again.read("a")->iteration == 3);
  CHECK(again.read("a")->mean() == Approx(0.5));
  CHECK(again.read("b")->scores == std::vector<double>{1.0});
  CHECK_THROWS_AS(again.update("a", 3, {0.1}), HistoryConflict);

  std::ofstream(dir / "bad.jsonl") << "{\"sample_id\":\"a\"}\n";
  CHECK_THROWS(JudgeHistory(dir / "bad.jsonl"));
  std::filesystem::remove_all(dir);
}
