#include "sif/trace.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace sif {
namespace {

enum class Tag { ThinkOpen, ThinkClose, AreaOpen, AreaClose, TextOpen, TextClose, AnswerOpen, AnswerClose };

constexpr std::array<std::pair<Tag, std::string_view>, 8> kTags{{
    {Tag::ThinkOpen, "<think>"},
    {Tag::ThinkClose, "</think>"},
    {Tag::AreaOpen, "<area>"},
    {Tag::AreaClose, "</area>"},
    {Tag::TextOpen, "<text>"},
    {Tag::TextClose, "</text>"},
    {Tag::AnswerOpen, "<answer>"},
    {Tag::AnswerClose, "</answer>"},
}};

constexpr std::string_view spelling(Tag t) { return kTags[static_cast<std::size_t>(t)].second; }

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::optional<Tag> tag_at(std::string_view s, std::size_t pos) {
  if (pos >= s.size() || s[pos] != '<') return std::nullopt;
  for (const auto& [tag, text] : kTags) {
    if (s.compare(pos, text.size(), text) == 0) return tag;
  }
  return std::nullopt;
}

struct TagHit {
  std::size_t pos = std::string_view::npos;
  std::optional<Tag> tag;
};

// First reserved tag at or after `pos`.
TagHit next_tag(std::string_view s, std::size_t pos) {
  for (pos = s.find('<', pos); pos != std::string_view::npos; pos = s.find('<', pos + 1)) {
    if (auto t = tag_at(s, pos)) return {pos, t};
  }
  return {};
}

struct Failure {
  ParseDiagnostic diag;
};

class Parser {
 public:
  Parser(std::string_view raw, const ParseOptions& options) : raw_(raw), options_(options) {}

  ReasoningTrace run() {
    ReasoningTrace trace;
    skip_space();
    expect(Tag::ThinkOpen);
    think_seen_ = true;
    skip_space();
    for (;;) {
      expect(Tag::AreaOpen);
      const auto [body_start, body] = body_until(Tag::AreaClose, Tag::AreaOpen);
      FocusStep step;
      step.regions = parse_regions(body, body_start);
      skip_space();
      expect(Tag::TextOpen);
      step.narration = std::string(body_until(Tag::TextClose, Tag::TextOpen).second);
      trace.steps.push_back(std::move(step));
      skip_space();
      if (tag_at(raw_, pos_) == Tag::AreaOpen) continue;
      expect(Tag::ThinkClose, "expected <area> or </think>");
      break;
    }
    skip_space();
    expect(Tag::AnswerOpen);
    answer_seen_ = true;
    const auto [answer_start, answer] = body_until(Tag::AnswerClose, Tag::AnswerOpen);
    if (std::all_of(answer.begin(), answer.end(), is_space)) {
      fail(ParseErrorKind::EmptyAnswer, answer_start, "answer is empty");
    }
    trace.answer = std::string(answer);
    skip_space();
    if (pos_ != raw_.size()) unexpected("end of input after </answer>");
    return trace;
  }

 private:
  [[noreturn]] void fail(ParseErrorKind kind, std::size_t offset, std::string message) {
    throw Failure{{kind, offset, std::move(message)}};
  }

  void skip_space() {
    while (pos_ < raw_.size() && is_space(raw_[pos_])) ++pos_;
  }

  // Reports whatever sits at pos_ when `wanted` was expected there.
  [[noreturn]] void unexpected(std::string_view wanted) {
    const std::string want(wanted);
    if (pos_ >= raw_.size()) fail(ParseErrorKind::MissingTag, pos_, "missing " + want);
    if (auto t = tag_at(raw_, pos_)) {
      const std::string found(spelling(*t));
      if ((*t == Tag::ThinkOpen && think_seen_) || (*t == Tag::AnswerOpen && answer_seen_)) {
        fail(ParseErrorKind::DuplicateTag, pos_, "duplicate " + found);
      }
      fail(ParseErrorKind::MisorderedTag, pos_, "found " + found + ", " + want);
    }
    fail(ParseErrorKind::UnexpectedContent, pos_, "unexpected content, " + want);
  }

  void expect(Tag t, std::string_view wanted = {}) {
    if (tag_at(raw_, pos_) == t) {
      pos_ += spelling(t).size();
      return;
    }
    if (wanted.empty()) {
      unexpected("expected " + std::string(spelling(t)));
    }
    unexpected(wanted);
  }

  // Consumes a body up to and including the closing tag. Any other reserved
  // tag before the close is a nesting violation.
  std::pair<std::size_t, std::string_view> body_until(Tag close, Tag open) {
    const std::size_t start = pos_;
    const auto hit = next_tag(raw_, pos_);
    if (!hit.tag) {
      pos_ = raw_.size();
      fail(ParseErrorKind::MissingTag, raw_.size(), "missing " + std::string(spelling(close)));
    }
    if (*hit.tag != close) {
      pos_ = hit.pos;
      if (*hit.tag == open) {
        fail(ParseErrorKind::DuplicateTag, hit.pos,
             "nested " + std::string(spelling(open)) + " before " + std::string(spelling(close)));
      }
      fail(ParseErrorKind::MisorderedTag, hit.pos,
           "found " + std::string(spelling(*hit.tag)) + " before " + std::string(spelling(close)));
    }
    pos_ = hit.pos + spelling(close).size();
    return {start, raw_.substr(start, hit.pos - start)};
  }

  std::vector<Region> parse_regions(std::string_view body, std::size_t offset) {
    // Regions are at most three levels deep; reject deeper nesting before
    // handing the body to the JSON parser.
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const char c = body[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '[' || c == '{') {
        if (++depth > 3) fail(ParseErrorKind::SchemaViolation, offset + i, "area JSON nested too deeply");
      } else if (c == ']' || c == '}') {
        --depth;
      }
    }

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      const std::size_t at = e.byte > 0 ? std::min<std::size_t>(e.byte - 1, body.size()) : 0;
      fail(ParseErrorKind::MalformedJson, offset + at, "malformed area JSON");
    } catch (const nlohmann::json::exception& e) {
      // e.g. a number literal beyond double range
      fail(ParseErrorKind::MalformedJson, offset, std::string("malformed area JSON: ") + e.what());
    }

    if (!doc.is_array()) fail(ParseErrorKind::SchemaViolation, offset, "area must be a JSON array");
    if (doc.empty()) fail(ParseErrorKind::SchemaViolation, offset, "area lists no regions");

    std::vector<Region> regions;
    regions.reserve(doc.size());
    for (std::size_t r = 0; r < doc.size(); ++r) {
      const auto& item = doc[r];
      const std::string ctx = "region " + std::to_string(r);
      if (!item.is_object()) fail(ParseErrorKind::SchemaViolation, offset, ctx + " is not an object");

      const nlohmann::json* bbox = nullptr;
      const nlohmann::json* depth_value = nullptr;
      for (const auto& [key, value] : item.items()) {
        const auto& keys = options_.keys;
        const bool is_bbox = std::find(keys.bbox.begin(), keys.bbox.end(), key) != keys.bbox.end();
        const bool is_depth = std::find(keys.depth.begin(), keys.depth.end(), key) != keys.depth.end();
        if (!is_bbox && !is_depth) {
          fail(ParseErrorKind::SchemaViolation, offset, ctx + " has unknown key \"" + key + "\"");
        }
        auto& slot = is_bbox ? bbox : depth_value;
        if (slot) fail(ParseErrorKind::SchemaViolation, offset, ctx + " repeats key \"" + key + "\"");
        slot = &value;
      }
      if (!bbox) fail(ParseErrorKind::SchemaViolation, offset, ctx + " has no bbox");
      if (!depth_value) fail(ParseErrorKind::SchemaViolation, offset, ctx + " has no depth");

      if (!bbox->is_array() || bbox->size() != 4 ||
          !std::all_of(bbox->begin(), bbox->end(), [](const auto& v) { return v.is_number(); })) {
        fail(ParseErrorKind::SchemaViolation, offset, ctx + ": bbox must be an array of 4 numbers");
      }
      if (!depth_value->is_number()) {
        fail(ParseErrorKind::SchemaViolation, offset, ctx + ": depth must be a number");
      }

      Region region;
      region.box = {(*bbox)[0].get<double>(), (*bbox)[1].get<double>(), (*bbox)[2].get<double>(),
                    (*bbox)[3].get<double>()};
      region.depth = depth_value->get<double>();
      try {
        validate(region.box);
      } catch (const ValidationError& e) {
        fail(ParseErrorKind::InvalidBox, offset, ctx + ": " + e.what());
      }
      if (!std::isfinite(region.depth) || region.depth < 0.0 || region.depth > 1.0) {
        fail(ParseErrorKind::DepthOutOfRange, offset, ctx + ": depth outside [0,1]");
      }
      regions.push_back(region);
    }
    return regions;
  }

  std::string_view raw_;
  const ParseOptions& options_;
  std::size_t pos_ = 0;
  bool think_seen_ = false;
  bool answer_seen_ = false;
};

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v + 0.0);
  return buf;
}

void append_box(std::string& out, const BBox& b, int digits) {
  const double c[4] = {b.x1, b.y1, b.x2, b.y2};
  std::array<std::string, 4> text;
  bool exact = digits < 0;
  if (!exact) {
    for (int i = 0; i < 4; ++i) text[i] = format_fixed(c[i], digits);
    // Rounding must not collapse the box; fall back to exact digits.
    const double rx1 = std::strtod(text[0].c_str(), nullptr), ry1 = std::strtod(text[1].c_str(), nullptr);
    const double rx2 = std::strtod(text[2].c_str(), nullptr), ry2 = std::strtod(text[3].c_str(), nullptr);
    exact = !(rx1 < rx2 && ry1 < ry2);
  }
  if (exact) {
    for (int i = 0; i < 4; ++i) text[i] = format_shortest(c[i]);
  }
  out += '[';
  for (int i = 0; i < 4; ++i) {
    if (i) out += ',';
    out += text[i];
  }
  out += ']';
}

}  // namespace

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::MissingTag: return "missing_tag";
    case ParseErrorKind::DuplicateTag: return "duplicate_tag";
    case ParseErrorKind::MisorderedTag: return "misordered_tag";
    case ParseErrorKind::UnexpectedContent: return "unexpected_content";
    case ParseErrorKind::MalformedJson: return "malformed_json";
    case ParseErrorKind::SchemaViolation: return "schema_violation";
    case ParseErrorKind::InvalidBox: return "invalid_box";
    case ParseErrorKind::DepthOutOfRange: return "depth_out_of_range";
    case ParseErrorKind::EmptyAnswer: return "empty_answer";
  }
  return "unknown";
}

ParseResult parse_trace(std::string_view raw, const ParseOptions& options) {
  try {
    return Parser(raw, options).run();
  } catch (const Failure& f) {
    return f.diag;
  }
}

std::string format_shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v + 0.0);
  return std::string(buf, res.ptr);
}

std::string serialize_trace(const ReasoningTrace& trace, const SerializeOptions& options) {
  const auto& keys = KeyAliases{};
  std::string out = "<think>";
  for (const auto& step : trace.steps) {
    out += "<area>[";
    for (std::size_t i = 0; i < step.regions.size(); ++i) {
      if (i) out += ',';
      out += "{\"" + keys.bbox.front() + "\":";
      append_box(out, step.regions[i].box, options.coordinate_digits);
      out += ",\"" + keys.depth.front() + "\":" + format_shortest(step.regions[i].depth) + "}";
    }
    out += "]</area><text>";
    out += step.narration;
    out += "</text>";
  }
  out += "</think><answer>";
  out += trace.answer;
  out += "</answer>";
  return out;
}

double format_reward(std::string_view raw, const ParseOptions& options) {
  return parse_trace(raw, options).ok() ? 1.0 : 0.0;
}

std::vector<BoxSet> extract_boxsets(const ReasoningTrace& trace) {
  std::vector<BoxSet> sets;
  sets.reserve(trace.steps.size());
  for (const auto& step : trace.steps) {
    BoxSet s;
    s.reserve(step.regions.size());
    for (const auto& r : step.regions) s.push_back(r.box);
    sets.push_back(std::move(s));
  }
  return sets;
}

std::optional<std::string> extract_answer_loose(std::string_view raw) {
  const auto open = raw.find(spelling(Tag::AnswerOpen));
  if (open == std::string_view::npos) return std::nullopt;
  const auto start = open + spelling(Tag::AnswerOpen).size();
  const auto close = raw.find(spelling(Tag::AnswerClose), start);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(raw.substr(start, close - start));
}

}  // namespace sif
