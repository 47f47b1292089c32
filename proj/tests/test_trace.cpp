#include <doctest.h>

#include <chrono>
#include <random>

#include "sif/trace.hpp"
#include "trace_corpus.hpp"

using namespace sif;

TEST_CASE("parses the canonical one-step trace") {
  const auto r = parse_trace(R"(<think><area>[{"bbox":[0,0,1,1],"depth":0.5}]</area><text>scan scene</text></think><answer>red</answer>)");
  REQUIRE(r.ok());
  REQUIRE(r.trace().steps.size() == 1);
  CHECK(r.trace().steps[0].regions[0].box == kFullImage);
  CHECK(r.trace().steps[0].regions[0].depth == 0.5);
  CHECK(r.trace().steps[0].narration == "scan scene");
  CHECK(r.trace().answer == "red");
}

TEST_CASE("missing area is reported with an offset") {
  const std::string raw = "<think><text>no area</text></think><answer>x</answer>";
  const auto r = parse_trace(raw);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().kind == ParseErrorKind::MisorderedTag);
  CHECK(r.error().offset == 7);
  CHECK(format_reward(raw) == 0.0);
}

TEST_CASE("invalid box and depth are rejected") {
  const auto r = parse_trace(R"(<think><area>[{"bbox":[0.3,0.3,0.2,0.9],"depth":0.4}]</area><text>t</text></think><answer>a</answer>)");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().kind == ParseErrorKind::InvalidBox);
  CHECK(r.error().offset == 13);
  CHECK(format_reward(R"(<think><area>[{"bbox":[0,0,1,1],"depth":1.3}]</area><text>t</text></think><answer>a</answer>)") ==
        0.0);
  CHECK(format_reward(R"(<think><area>[{"bbox":[0,0,1,1],"depth":0.3}]</area><text>t</text></think><answer>a)") == 0.0);
}

TEST_CASE("malformed JSON offset points into the area body") {
  const std::string raw = R"(<think><area>[{"bbox":[0,0,1,1],"depth":0.5},]</area><text>t</text></think><answer>a</answer>)";
  const auto r = parse_trace(raw);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().kind == ParseErrorKind::MalformedJson);
  CHECK(r.error().offset >= raw.find("<area>") + 6);
  CHECK(r.error().offset <= raw.find("</area>"));
}

TEST_CASE("corpus labels") {
  for (const auto& c : corpus::build()) {
    CAPTURE(c.name);
    const auto r = parse_trace(c.text);
    CHECK(r.ok() == !c.error.has_value());
    CHECK(format_reward(c.text) == (r.ok() ? 1.0 : 0.0));
    if (c.error && !r.ok()) {
      CHECK(to_string(r.error().kind) == to_string(*c.error));
      CHECK(r.error().offset <= c.text.size());
    }
  }
}

TEST_CASE("whitespace inside text and answer is preserved") {
  const auto r = parse_trace("<think> <area>[{\"bbox\":[0,0,1,1],\"depth\":0}]</area>\n<text> a  b </text> </think>\n<answer> red </answer>\n");
  REQUIRE(r.ok());
  CHECK(r.trace().steps[0].narration == " a  b ");
  CHECK(r.trace().answer == " red ");
}

TEST_CASE("key aliases") {
  ParseOptions opt;
  opt.keys.bbox.push_back("box");
  opt.keys.depth.push_back("z");
  const std::string raw = R"(<think><area>[{"box":[0,0,0.5,0.5],"z":0.2}]</area><text>t</text></think><answer>a</answer>)";
  CHECK_FALSE(parse_trace(raw).ok());
  CHECK(parse_trace(raw, opt).ok());
  const auto both = parse_trace(R"(<think><area>[{"box":[0,0,0.5,0.5],"bbox":[0,0,1,1],"depth":0.2}]</area><text>t</text></think><answer>a</answer>)", opt);
  REQUIRE_FALSE(both.ok());
  CHECK(both.error().kind == ParseErrorKind::SchemaViolation);
}

TEST_CASE("serializer formatting") {
  ReasoningTrace t;
  t.steps.push_back({{{{1.0 / 3, 0.1, 2.0 / 3, 0.9}, 0.25}}, "look"});
  t.answer = "a";
  const auto s = serialize_trace(t);
  CHECK(s == R"(<think><area>[{"bbox":[0.333,0.100,0.667,0.900],"depth":0.25}]</area><text>look</text></think><answer>a</answer>)");
  CHECK(serialize_trace(t) == s);

  // A box that rounding would collapse keeps its exact digits.
  ReasoningTrace thin;
  thin.steps.push_back({{{{0.1001, 0.2, 0.1004, 0.3}, 0.5}}, ""});
  thin.answer = "a";
  const auto r = parse_trace(serialize_trace(thin));
  REQUIRE(r.ok());
  CHECK(r.trace() == thin);

  SerializeOptions exact;
  exact.coordinate_digits = -1;
  CHECK(parse_trace(serialize_trace(t, exact)).trace() == t);
}

TEST_CASE("round trip on generated traces") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; ++i) {
    const auto t = corpus::random_trace(rng);
    const auto s = serialize_trace(t);
    const auto r = parse_trace(s);
    REQUIRE(r.ok());
    CHECK(r.trace() == t);
    CHECK(serialize_trace(r.trace()) == s);
  }
}

TEST_CASE("extract_boxsets") {
  const auto r = parse_trace(
      R"(<think><area>[{"bbox":[0,0,1,1],"depth":0.5}]</area><text>a</text><area>[{"bbox":[0,0,0.5,0.5],"depth":0.1},{"bbox":[0.6,0.6,0.9,0.9],"depth":0.2}]</area><text>b</text><area>[{"bbox":[0,0,0.4,0.4],"depth":0.1}]</area><text>c</text></think><answer>a</answer>)");
  REQUIRE(r.ok());
  const auto sets = extract_boxsets(r.trace());
  REQUIRE(sets.size() == 3);
  CHECK(sets[0] == BoxSet{kFullImage});
  CHECK(sets[1] == BoxSet{{0, 0, 0.5, 0.5}, {0.6, 0.6, 0.9, 0.9}});
}

TEST_CASE("loose answer extraction") {
  CHECK(extract_answer_loose("junk <answer>blue</answer> more") == "blue");
  CHECK_FALSE(extract_answer_loose("no tags").has_value());
  CHECK_FALSE(extract_answer_loose("<answer>open").has_value());
}

TEST_CASE("adversarial inputs terminate quickly") {
  const std::size_t mb = 10u << 20;
  std::vector<std::string> inputs;
  std::string s;
  while (s.size() < mb) s += "<think><area>";
  inputs.push_back(s);
  s.clear();
  while (s.size() < mb) s += "<";
  inputs.push_back(s);
  s = "<think><area>";
  while (s.size() < mb) s += "[";
  inputs.push_back(s + "</area>");
  s = "<think><area>[{\"bbox\":[0,0,1,1],\"depth\":0.5}]</area><text>";
  while (s.size() < mb) s += "<tex<answe<thin";
  inputs.push_back(s);
  std::string steps = "<think>";
  while (steps.size() < mb) steps += R"(<area>[{"bbox":[0,0,1,1],"depth":0.5}]</area><text>t</text>)";
  inputs.push_back(steps + "</think><answer>a</answer>");
  for (const auto& in : inputs) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)parse_trace(in);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    CHECK(dt.count() < 2.0);
  }
  CHECK(parse_trace(steps + "</think><answer>a</answer>").ok());
}
