#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sif/geometry.hpp"

namespace sif {

struct Region {
  BBox box;
  double depth = 0.0;

  bool operator==(const Region&) const = default;
};

/// One <area>/<text> pair of a reasoning trace.
struct FocusStep {
  std::vector<Region> regions;  // nonempty
  std::string narration;

  bool operator==(const FocusStep&) const = default;
};

struct ReasoningTrace {
  std::vector<FocusStep> steps;  // at least one
  std::string answer;

  bool operator==(const ReasoningTrace&) const = default;
};

enum class ParseErrorKind {
  MissingTag,
  DuplicateTag,
  MisorderedTag,
  UnexpectedContent,
  MalformedJson,
  SchemaViolation,
  InvalidBox,
  DepthOutOfRange,
  EmptyAnswer,
};

std::string_view to_string(ParseErrorKind kind);

/// Diagnostic for the first grammar violation; `offset` is a byte offset
/// into the raw input.
struct ParseDiagnostic {
  ParseErrorKind kind = ParseErrorKind::MissingTag;
  std::size_t offset = 0;
  std::string message;
};

/// Accepted JSON key spellings for the region fields. The first entry of
/// each list is the canonical key used by the serializer.
struct KeyAliases {
  std::vector<std::string> bbox{"bbox"};
  std::vector<std::string> depth{"depth"};
};

struct ParseOptions {
  KeyAliases keys;
};

class ParseResult {
 public:
  ParseResult(ReasoningTrace trace) : value_(std::move(trace)) {}
  ParseResult(ParseDiagnostic diag) : value_(std::move(diag)) {}

  bool ok() const noexcept { return std::holds_alternative<ReasoningTrace>(value_); }
  explicit operator bool() const noexcept { return ok(); }

  const ReasoningTrace& trace() const { return std::get<ReasoningTrace>(value_); }
  ReasoningTrace& trace() { return std::get<ReasoningTrace>(value_); }
  const ParseDiagnostic& error() const { return std::get<ParseDiagnostic>(value_); }

 private:
  std::variant<ReasoningTrace, ParseDiagnostic> value_;
};

/// Strict parser for
///   ws <think> ws (<area>JSON</area> ws <text>TEXT</text> ws)+ </think> ws
///   <answer>TEXT</answer> ws
/// Runs in time linear in the input length and never throws.
ParseResult parse_trace(std::string_view raw, const ParseOptions& options = {});

struct SerializeOptions {
  /// Fractional digits for box coordinates. A negative value writes the
  /// shortest representation that reads back to the same double.
  int coordinate_digits = 3;
};

/// Canonical rendering: key order "bbox","depth", no whitespace between
/// tags. Depth values use the shortest round-trip representation.
std::string serialize_trace(const ReasoningTrace& trace, const SerializeOptions& options = {});

/// 1.0 iff `raw` parses; never throws.
double format_reward(std::string_view raw, const ParseOptions& options = {});

std::vector<BoxSet> extract_boxsets(const ReasoningTrace& trace);

/// Text between the first <answer> and the following </answer>, if any.
std::optional<std::string> extract_answer_loose(std::string_view raw);

/// Shortest decimal string that reads back as exactly `v`.
std::string format_shortest(double v);

}  // namespace sif
