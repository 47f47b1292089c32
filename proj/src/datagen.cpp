#include "sif/datagen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <tuple>

#include <omp.h>

#include "sif/image.hpp"
#include "sif/scoring.hpp"
#include "sif/trace.hpp"

namespace sif {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v + 0.0);
  return buf;
}

std::string describe_boxes(const BoxSet& boxes) {
  std::string out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (i) out += ", ";
    const auto& b = boxes[i];
    out += "[" + fixed3(b.x1) + "," + fixed3(b.y1) + "," + fixed3(b.x2) + "," + fixed3(b.y2) + "]";
  }
  return out;
}

std::string describe_depths(const std::vector<double>& depths) {
  std::string out;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (i) out += ", ";
    out += fixed3(depths[i]);
  }
  return out;
}

std::string base64(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    const unsigned v = (bytes[i] << 16) | (i + 1 < bytes.size() ? bytes[i + 1] << 8 : 0);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::vector<double>> scaffold_depths(const FocusTrajectory& traj, const DepthMap& depth) {
  std::vector<std::vector<double>> out;
  for (const auto& set : traj.sets) {
    std::vector<double> d;
    for (const auto& b : set) d.push_back(region_depth(depth, b));
    out.push_back(std::move(d));
  }
  return out;
}

bool same_boxes(BoxSet a, BoxSet b) {
  if (a.size() != b.size()) return false;
  const auto key = [](const BBox& x, const BBox& y) {
    return std::tie(x.x1, x.y1, x.x2, x.y2) < std::tie(y.x1, y.y1, y.x2, y.y2);
  };
  std::sort(a.begin(), a.end(), key);
  std::sort(b.begin(), b.end(), key);
  return a == b;
}

std::string string_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) throw WireError(std::string("field \"") + key + "\" must be a string");
  return j.at(key).get<std::string>();
}

std::uint64_t record_seed_word(std::uint64_t seed, int half) {
  return half == 0 ? (seed & 0xFFFFFFFFu) : (seed >> 32);
}

struct Outcome {
  std::optional<std::string> line;
  std::optional<RecordReject> reject;
  StageTimings seconds;
};

Outcome process_record(const SourceRecord& record, std::size_t index, const DatagenOptions& options,
                       const std::filesystem::path& overlay_dir, const std::filesystem::path& out_dir,
                       CotCompleter& completer) {
  Outcome outcome;
  std::string stage = "scaffold";
  try {
    auto t0 = Clock::now();
    std::seed_seq seq{record_seed_word(options.scaffold.seed, 0), record_seed_word(options.scaffold.seed, 1),
                      static_cast<std::uint64_t>(index)};
    Rng rng(seq);
    const auto scaffold = build_scaffold(record.gt_boxes, options.scaffold, rng);
    outcome.seconds.scaffold = seconds_since(t0);

    stage = "overlays";
    t0 = Clock::now();
    const auto overlays = render_overlays(record.image_path, scaffold, record.id, overlay_dir);
    outcome.seconds.overlays = seconds_since(t0);

    stage = "depth";
    const auto depth = load_depth_map(record.depth_path);

    stage = "completion";
    t0 = Clock::now();
    auto cot = complete_cot(record, scaffold, depth, overlays, completer, options.completion_attempts);
    outcome.seconds.completion = seconds_since(t0);

    auto overlay_refs = nlohmann::json::array();
    for (const auto& p : overlays) overlay_refs.push_back(p.lexically_relative(out_dir).generic_string());
    const nlohmann::json sif = {
        {"id", record.id},
        {"question", record.question},
        {"image_path", record.image_ref},
        {"depth_path", record.depth_ref},
        {"gt_boxes", boxes_to_json(record.gt_boxes)},
        {"answer", record.answer},
        {"cot", std::move(cot)},
        {"scaffold", trajectory_to_json(scaffold)},
        {"overlays", std::move(overlay_refs)},
    };
    outcome.line = sif.dump();
  } catch (const std::exception& e) {
    outcome.reject = RecordReject{0, record.id, stage, e.what()};
  }
  return outcome;
}

}  // namespace

const std::string_view kDefaultCotPrompt =
    "You are writing a step-by-step visual reasoning chain for the question below.\n"
    "Question: {question}\n"
    "Known answer: {answer}\n"
    "The attached images show, in order, the regions attended at each step (red boxes). "
    "Their normalized coordinates and the mean relative depth inside each box are:\n"
    "{steps}\n"
    "Write one step per region set, in the given order. Early steps may look at regions that "
    "turn out to be irrelevant; say so and move on. Use exactly this format, with the boxes and "
    "depths copied verbatim:\n"
    "<think><area>[{\"bbox\":[x1,y1,x2,y2],\"depth\":d}]</area><text>reasoning for this step</text>"
    "...</think><answer>final answer</answer>";

SourceLoad load_source_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read source records from " + path.string());
  const auto base = path.parent_path();
  SourceLoad out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string id;
    try {
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw WireError("line is not a JSON object");
      SourceRecord r;
      r.id = string_field(j, "id");
      id = r.id;
      if (r.id.empty()) throw WireError("id must not be empty");
      if (!seen.insert(r.id).second) throw WireError("duplicate id \"" + r.id + "\"");
      r.image_ref = string_field(j, "image_path");
      if (!j.contains("depth_path")) throw WireError("depth_path is required");
      r.depth_ref = string_field(j, "depth_path");
      r.question = string_field(j, "question");
      r.answer = string_field(j, "answer");
      if (r.answer.find_first_not_of(" \t\r\n") == std::string::npos) throw WireError("answer must not be empty");
      if (!j.contains("gt_boxes")) throw WireError("gt_boxes is required");
      r.gt_boxes = boxes_from_json(j.at("gt_boxes"));
      if (r.gt_boxes.empty()) throw WireError("gt_boxes must not be empty");
      r.image_path = std::filesystem::path(r.image_ref).is_relative() ? base / r.image_ref : std::filesystem::path(r.image_ref);
      r.depth_path = std::filesystem::path(r.depth_ref).is_relative() ? base / r.depth_ref : std::filesystem::path(r.depth_ref);
      out.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.rejects.push_back({lineno, id, "load", e.what()});
    }
  }
  if (out.records.empty() && out.rejects.empty()) out.warnings.push_back("source file " + path.string() + " is empty");
  return out;
}

std::vector<std::filesystem::path> render_overlays(const std::filesystem::path& image_path,
                                                   const FocusTrajectory& traj, const std::string& id,
                                                   const std::filesystem::path& out_dir) {
  const auto base = read_ppm(image_path);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t k = 0; k < traj.sets.size(); ++k) {
    auto frame = base;
    for (const auto& b : traj.sets[k]) draw_box_outline(frame, b);
    auto p = out_dir / (id + "_step" + std::to_string(k) + ".ppm");
    write_ppm(frame, p);
    paths.push_back(std::move(p));
  }
  return paths;
}

std::string MockCompleter::complete(const CotRequest& request) {
  const auto& sets = request.scaffold.sets;
  const auto distractors = static_cast<std::size_t>(request.scaffold.distractor_count);
  ReasoningTrace trace;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    FocusStep step;
    for (std::size_t i = 0; i < sets[k].size(); ++i) step.regions.push_back({sets[k][i], request.region_depths[k][i]});
    const auto where = describe_boxes(sets[k]);
    const auto depth = describe_depths(request.region_depths[k]);
    if (k + 1 == sets.size()) {
      step.narration = "The relevant region is " + where + " at depth " + depth + "; it settles the question.";
    } else if (k < distractors) {
      step.narration = "Checking " + where + " (depth " + depth + "): nothing here bears on the question, so the focus moves on.";
    } else if (k == distractors) {
      step.narration = "Survey the whole image (mean depth " + depth + ") for content related to the question.";
    } else {
      step.narration = "Narrow the focus to " + where + " at depth " + depth + ".";
    }
    trace.steps.push_back(std::move(step));
  }
  trace.answer = request.record.answer;
  return serialize_trace(trace, {.coordinate_digits = -1});
}

HttpCompleter::HttpCompleter(HttpEndpoint endpoint, std::string prompt_template)
    : endpoint_(std::move(endpoint)), template_(std::move(prompt_template)) {}

std::string HttpCompleter::render_prompt(const CotRequest& request) const {
  std::string steps;
  for (std::size_t k = 0; k < request.scaffold.sets.size(); ++k) {
    steps += "Step " + std::to_string(k + 1) + ": ";
    const auto& set = request.scaffold.sets[k];
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& b = set[i];
      if (i) steps += "; ";
      steps += "bbox [" + format_shortest(b.x1) + "," + format_shortest(b.y1) + "," + format_shortest(b.x2) + "," +
               format_shortest(b.y2) + "] depth " + format_shortest(request.region_depths[k][i]);
    }
    steps += "\n";
  }
  return render_template(template_, {{"question", request.record.question},
                                     {"answer", request.record.answer},
                                     {"steps", steps},
                                     {"depth_path", request.record.depth_ref}});
}

std::string HttpCompleter::complete(const CotRequest& request) {
  auto content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", render_prompt(request)}});
  for (const auto& p : request.overlays) {
    const auto img = encode_ppm(read_ppm(p));
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:image/x-portable-pixmap;base64," + base64(img)}}}});
  }
  nlohmann::json body = {{"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
  if (!endpoint_.model.empty()) body["model"] = endpoint_.model;
  const auto reply = post_json(endpoint_.url, body, endpoint_.api_key, endpoint_.timeout, endpoint_.max_attempts);
  return chat_reply_text(reply);
}

std::string complete_cot(const SourceRecord& record, const FocusTrajectory& scaffold, const DepthMap& depth,
                         const std::vector<std::filesystem::path>& overlays, CotCompleter& completer,
                         int attempts) {
  const auto depths = scaffold_depths(scaffold, depth);
  const CotRequest request{record, scaffold, depth, overlays, depths};
  std::string last_problem = "no attempt made";
  for (int a = 0; a < std::max(1, attempts); ++a) {
    auto text = completer.complete(request);
    const auto parsed = parse_trace(text);
    if (!parsed) {
      last_problem = "invalid trace (" + std::string(to_string(parsed.error().kind)) + " at byte " +
                     std::to_string(parsed.error().offset) + ": " + parsed.error().message + ")";
      continue;
    }
    if (!same_boxes(extract_boxsets(parsed.trace()).back(), record.gt_boxes)) {
      last_problem = "final step does not match the ground-truth boxes";
      continue;
    }
    return text;
  }
  throw SampleRejected("completion rejected after " + std::to_string(attempts) + " attempts: " + last_problem);
}

nlohmann::json trajectory_to_json(const FocusTrajectory& traj) {
  auto sets = nlohmann::json::array();
  for (const auto& s : traj.sets) sets.push_back(boxes_to_json(s));
  return {
      {"sets", std::move(sets)},
      {"early_stop_step", traj.early_stop_step ? nlohmann::json(*traj.early_stop_step) : nlohmann::json(nullptr)},
      {"final_steps", traj.final_steps},
      {"distractor_count", traj.distractor_count},
      {"reversed", traj.reversed},
  };
}

nlohmann::json to_json(const RunReport& report) {
  auto rejects = nlohmann::json::array();
  for (const auto& r : report.rejects) {
    rejects.push_back({{"line", r.line}, {"id", r.id}, {"stage", r.stage}, {"reason", r.reason}});
  }
  return {
      {"processed", report.processed},
      {"emitted", report.emitted},
      {"rejected", report.rejected},
      {"invalid_lines", report.invalid_lines},
      {"rejects", std::move(rejects)},
      {"warnings", report.warnings},
      {"seconds",
       {{"scaffold", report.seconds.scaffold},
        {"overlays", report.seconds.overlays},
        {"completion", report.seconds.completion},
        {"total", report.seconds.total}}},
  };
}

RunReport generate_dataset(const DatagenOptions& options, CotCompleter& completer) {
  const auto start = Clock::now();
  validate(options.scaffold);
  auto source = load_source_records(options.input);

  RunReport report;
  report.invalid_lines = source.rejects.size();
  report.rejects = source.rejects;
  report.warnings = source.warnings;

  const auto out_dir = options.output.parent_path().empty() ? std::filesystem::path(".") : options.output.parent_path();
  const auto overlay_dir = options.overlay_dir.empty() ? out_dir / "overlays" : options.overlay_dir;
  std::filesystem::create_directories(out_dir);
  std::ofstream out(options.output, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + options.output.string());

  constexpr std::size_t kChunk = 256;
  const auto& records = source.records;
  for (std::size_t begin = 0; begin < records.size(); begin += kChunk) {
    const std::size_t end = std::min(records.size(), begin + kChunk);
    std::vector<Outcome> outcomes(end - begin);
    const auto n = static_cast<long>(end - begin);
#pragma omp parallel for schedule(dynamic, 1) if (options.parallel)
    for (long i = 0; i < n; ++i) {
      const auto idx = begin + static_cast<std::size_t>(i);
      outcomes[i] = process_record(records[idx], idx, options, overlay_dir, out_dir, completer);
    }
    // single writer, input order
    for (auto& o : outcomes) {
      ++report.processed;
      report.seconds.scaffold += o.seconds.scaffold;
      report.seconds.overlays += o.seconds.overlays;
      report.seconds.completion += o.seconds.completion;
      if (o.line) {
        out << *o.line << '\n';
        ++report.emitted;
      } else {
        ++report.rejected;
        report.rejects.push_back(*o.reject);
      }
    }
    if (!out) throw std::runtime_error("write failed on " + options.output.string());
  }
  out.close();
  if (!out) throw std::runtime_error("write failed on " + options.output.string());

  report.seconds.total = seconds_since(start);
  const auto report_path =
      options.report.empty() ? std::filesystem::path(options.output.string() + ".report.json") : options.report;
  std::ofstream rep(report_path);
  rep << to_json(report).dump(2) << '\n';
  if (!rep) throw std::runtime_error("cannot write run report " + report_path.string());
  return report;
}

std::filesystem::path write_synthetic_fixture(const std::filesystem::path& dir, std::size_t count,
                                              std::uint64_t seed) {
  static constexpr const char* kColors[] = {"red", "green", "blue", "yellow"};
  static constexpr Rgb kRgb[] = {{220, 30, 30}, {30, 180, 60}, {40, 60, 220}, {230, 210, 40}};
  constexpr std::size_t kWidth = 64, kHeight = 48;

  std::filesystem::create_directories(dir);
  Rng rng(seed);
  std::ofstream ann(dir / "annotations.jsonl", std::ios::binary | std::ios::trunc);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t objects = 1 + n % 3;
    BoxSet boxes;
    while (boxes.size() < objects) {
      // Coordinates on a 1/100 grid keep the annotations readable.
      const auto grid = [&](double lo, double hi) { return std::round((lo + (hi - lo) * uniform01(rng)) * 100.0) / 100.0; };
      const double w = grid(0.12, 0.3), h = grid(0.12, 0.3);
      const double x1 = grid(0.02, 0.98 - w), y1 = grid(0.02, 0.98 - h);
      const BBox b{x1, y1, std::round((x1 + w) * 100.0) / 100.0, std::round((y1 + h) * 100.0) / 100.0};
      if (!is_valid(b)) continue;
      const bool clear = std::none_of(boxes.begin(), boxes.end(), [&](const BBox& o) { return intersection_area(o, b) > 0.0; });
      if (clear) boxes.push_back(b);
    }
    const std::size_t color = n % 4;

    RgbImage img(kWidth, kHeight);
    std::vector<double> depth(kWidth * kHeight);
    for (std::size_t y = 0; y < kHeight; ++y) {
      for (std::size_t x = 0; x < kWidth; ++x) {
        const auto shade = static_cast<std::uint8_t>(90 + 100 * y / kHeight);
        img.set(x, y, {shade, shade, static_cast<std::uint8_t>(shade + 20)});
        depth[y * kWidth + x] = 0.2 + 0.5 * static_cast<double>(y) / kHeight;  // farther toward the top
      }
    }
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      const auto& b = boxes[k];
      const double object_depth = 0.75 + 0.05 * static_cast<double>(k);
      for (std::size_t y = 0; y < kHeight; ++y) {
        for (std::size_t x = 0; x < kWidth; ++x) {
          const double cx = (x + 0.5) / kWidth, cy = (y + 0.5) / kHeight;
          if (cx < b.x1 || cx > b.x2 || cy < b.y1 || cy > b.y2) continue;
          img.set(x, y, kRgb[color]);
          depth[y * kWidth + x] = object_depth;
        }
      }
    }

    char id[32];
    std::snprintf(id, sizeof id, "fx%03zu", n);
    const std::string image_name = std::string(id) + ".ppm", depth_name = std::string(id) + "_depth.pgm";
    write_ppm(img, dir / image_name);
    save_depth_map(DepthMap(kWidth, kHeight, std::move(depth), "near=high"), dir / depth_name);

    const bool counting = objects > 1;
    const nlohmann::json rec = {
        {"id", id},
        {"image_path", image_name},
        {"depth_path", depth_name},
        {"question", counting ? std::string("How many ") + kColors[color] + " blocks are in the picture?"
                              : std::string("What color is the block nearest to the camera?")},
        {"answer", counting ? std::to_string(objects) : std::string(kColors[color])},
        {"gt_boxes", boxes_to_json(boxes)},
    };
    ann << rec.dump() << '\n';
  }
  if (!ann) throw std::runtime_error("cannot write fixture annotations in " + dir.string());
  return dir / "annotations.jsonl";
}

}  // namespace sif
