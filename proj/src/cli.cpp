#include "sif/cli.hpp"

#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sif/datagen.hpp"
#include "sif/geometry.hpp"
#include "sif/service.hpp"
#include "sif/trace.hpp"

namespace sif {
namespace {

namespace fs = std::filesystem;

// Usage and configuration mistakes exit with kExitInvalid.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct JudgeFlags {
  std::string config;
  bool mock = false;
  std::string endpoint;
  std::string api_key;
  std::string model;
  std::string prompt;
  std::optional<int> group_size;
  std::optional<double> delta;
  std::optional<double> depth_threshold;
  std::string history;
  std::string depth_root;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config, "JSON config file");
    cmd.add_flag("--mock-judge", mock, "token-F1 judge, no network");
    cmd.add_option("--judge-endpoint", endpoint, "chat-completion URL of the judge");
    cmd.add_option("--judge-api-key", api_key);
    cmd.add_option("--judge-model", model);
    cmd.add_option("--judge-prompt", prompt, "judge prompt template file");
    cmd.add_option("--group-size", group_size, "completions per group (0 accepts any)");
    cmd.add_option("--delta", delta, "advantage stabilizer");
    cmd.add_option("--depth-threshold", depth_threshold);
    cmd.add_option("--history", history, "judge history file (JSONL)");
    cmd.add_option("--depth-root", depth_root, "base directory for relative depth-map paths");
  }

  // config file < environment < flags
  ServiceConfig resolve() const {
    if (mock && !endpoint.empty()) throw UsageError("--mock-judge and --judge-endpoint are mutually exclusive");
    ServiceConfig cfg = config.empty() ? ServiceConfig{} : load_service_config(config);
    apply_environment(cfg);
    if (mock) {
      cfg.mock_judge = true;
      cfg.judge_endpoint.clear();
    }
    if (!endpoint.empty()) {
      cfg.judge_endpoint = endpoint;
      cfg.mock_judge = false;
    }
    if (!api_key.empty()) cfg.judge_api_key = api_key;
    if (!model.empty()) cfg.judge_model = model;
    if (!prompt.empty()) cfg.judge_prompt = prompt;
    if (group_size) cfg.group_size = *group_size;
    if (delta) cfg.delta = *delta;
    if (depth_threshold) cfg.depth.threshold = *depth_threshold;
    if (!history.empty()) cfg.history_file = history;
    if (!depth_root.empty()) cfg.depth_root = depth_root;
    try {
      validate(cfg);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

BoxSet read_boxset(const fs::path& path) {
  const auto j = nlohmann::json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw UsageError(path.string() + ": not valid JSON");
  try {
    return boxes_from_json(j);
  } catch (const std::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

int cmd_hiou(const std::string& pred_path, const std::string& gt_path, bool parts, std::ostream& out) {
  const auto pred = read_boxset(pred_path);
  const auto gt = read_boxset(gt_path);
  if (parts) {
    const auto p = hiou_parts(pred, gt);
    out << nlohmann::json{{"giou", p.giou}, {"piou", p.piou}, {"hiou", p.hiou}}.dump() << "\n";
  } else {
    out << nlohmann::json(hiou(pred, gt)).dump() << "\n";
  }
  return kExitOk;
}

int cmd_validate(const std::string& path, std::ostream& out) {
  const auto text = read_text(path);
  const auto result = parse_trace(text);
  if (!result) {
    const auto& d = result.error();
    out << path << ":" << d.offset << ": " << to_string(d.kind) << ": " << d.message << "\n";
    return kExitInvalid;
  }
  out << path << ": ok, " << result.trace().steps.size() << " steps\n";
  return kExitOk;
}

int cmd_score(const JudgeFlags& flags, const std::string& rollouts, const std::string& out_path, bool serial,
              std::ostream& out, std::ostream& err) {
  auto cfg = flags.resolve();
  if (cfg.depth_root.empty()) cfg.depth_root = fs::path(rollouts).parent_path();
  std::ifstream in(rollouts);
  if (!in) throw std::runtime_error("cannot read " + rollouts);

  auto judge = make_judge(cfg);
  JudgeHistory history = cfg.history_file.empty() ? JudgeHistory{} : JudgeHistory{cfg.history_file};
  auto sc = scoring_config(cfg);
  sc.parallel = !serial;
  GroupScorer scorer(*judge, history, sc);

  std::ofstream file;
  std::ostream* sink = &out;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + out_path);
    sink = &file;
  }

  bool schema_failure = false, runtime_failure = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json row;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    HttpReply reply;
    if (j.is_discarded()) {
      reply = {400, {{"error", "schema"}, {"message", "line is not valid JSON"}}};
    } else {
      reply = score_group_json(j, scorer, cfg.depth_root);
      if (j.is_object()) {
        if (j.contains("sample_id")) row["sample_id"] = j["sample_id"];
        if (j.contains("iteration")) row["iteration"] = j["iteration"];
      }
    }
    if (reply.status == 200) {
      row["rewards"] = reply.body["rewards"];
      row["advantages"] = reply.body["advantages"];
    } else {
      row["status"] = reply.status;
      row["error"] = reply.body["error"];
      row["message"] = reply.body["message"];
      err << rollouts << ":" << lineno << ": " << reply.status << " " << reply.body["message"].get<std::string>()
          << "\n";
      (reply.status == 400 ? schema_failure : runtime_failure) = true;
    }
    *sink << row.dump() << "\n";
  }
  sink->flush();
  if (!*sink) throw std::runtime_error("write failed for " + out_path);
  if (runtime_failure) return kExitRuntime;
  return schema_failure ? kExitInvalid : kExitOk;
}

int cmd_serve(const JudgeFlags& flags, const std::string& host, std::optional<int> port, std::ostream& out) {
  auto cfg = flags.resolve();
  if (!host.empty()) cfg.host = host;
  if (port) cfg.port = *port;
  auto judge = make_judge(cfg);
  JudgeHistory history = cfg.history_file.empty() ? JudgeHistory{} : JudgeHistory{cfg.history_file};
  GroupScorer scorer(*judge, history, scoring_config(cfg));
  ScoringService service(scorer, history, cfg.depth_root);
  out << "sif " << kVersion << " listening on " << cfg.host << ":" << cfg.port << std::endl;
  if (!service.listen(cfg.host, cfg.port)) throw std::runtime_error("cannot listen on " + cfg.host);
  return kExitOk;
}

struct DatagenFlags {
  std::string input, output, overlays, report;
  std::uint64_t seed = 42;
  int steps = 5;
  double area_tolerance = 0.2;
  int max_distractors = 2;
  int attempts = 3;
  bool mock = false;
  std::string endpoint, api_key, model, prompt;
  bool serial = false;
};

int cmd_datagen(const DatagenFlags& f, std::ostream& out) {
  if (f.mock == !f.endpoint.empty()) throw UsageError("pass exactly one of --mock-completer or --completer-endpoint");
  DatagenOptions opt;
  opt.input = f.input;
  opt.output = f.output;
  opt.overlay_dir = f.overlays;
  opt.report = f.report;
  opt.scaffold.seed = f.seed;
  opt.scaffold.steps = f.steps;
  opt.scaffold.area_tolerance = f.area_tolerance;
  opt.scaffold.max_distractors = f.max_distractors;
  opt.completion_attempts = f.attempts;
  opt.parallel = !f.serial;
  try {
    validate(opt.scaffold);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::unique_ptr<CotCompleter> completer;
  if (f.mock) {
    completer = std::make_unique<MockCompleter>();
  } else {
    HttpEndpoint ep{f.endpoint, f.api_key, f.model};
    completer = f.prompt.empty() ? std::make_unique<HttpCompleter>(ep)
                                 : std::make_unique<HttpCompleter>(ep, read_text(f.prompt));
  }
  const auto report = generate_dataset(opt, *completer);
  out << "processed " << report.processed << ", emitted " << report.emitted << ", rejected " << report.rejected
      << ", invalid lines " << report.invalid_lines << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sif: focus-scaffold data generation and reward scoring"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string pred, gt;
  bool parts = false;
  auto* hiou_cmd = app.add_subcommand("hiou", "hierarchical IoU of two box-set files");
  hiou_cmd->add_option("--pred", pred)->required();
  hiou_cmd->add_option("--gt", gt)->required();
  hiou_cmd->add_flag("--parts", parts, "print giou, piou and hiou");

  std::string trace_file;
  auto* validate_cmd = app.add_subcommand("validate", "check a reasoning trace against the grammar");
  validate_cmd->add_option("file", trace_file)->required();

  JudgeFlags score_flags;
  std::string rollouts, score_out = "-";
  bool score_serial = false;
  auto* score_cmd = app.add_subcommand("score", "score rollout groups from a JSONL file");
  score_cmd->add_option("--rollouts", rollouts)->required();
  score_cmd->add_option("--out", score_out, "output JSONL, - for stdout");
  score_cmd->add_flag("--serial", score_serial, "score completions on one thread");
  score_flags.add_to(*score_cmd);

  JudgeFlags serve_flags;
  std::string host;
  std::optional<int> port;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP scoring service");
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);
  serve_flags.add_to(*serve_cmd);

  DatagenFlags dg;
  auto* datagen_cmd = app.add_subcommand("datagen", "build a SIF dataset from annotated records");
  datagen_cmd->add_option("--input", dg.input, "annotations JSONL")->required();
  datagen_cmd->add_option("--out", dg.output, "output JSONL")->required();
  datagen_cmd->add_option("--overlays", dg.overlays, "overlay directory");
  datagen_cmd->add_option("--report", dg.report, "run report path");
  datagen_cmd->add_option("--seed", dg.seed);
  datagen_cmd->add_option("--steps", dg.steps, "expansion steps K");
  datagen_cmd->add_option("--area-tolerance", dg.area_tolerance);
  datagen_cmd->add_option("--max-distractors", dg.max_distractors);
  datagen_cmd->add_option("--attempts", dg.attempts, "completion attempts per record");
  datagen_cmd->add_flag("--mock-completer", dg.mock);
  datagen_cmd->add_option("--completer-endpoint", dg.endpoint);
  datagen_cmd->add_option("--completer-api-key", dg.api_key);
  datagen_cmd->add_option("--completer-model", dg.model);
  datagen_cmd->add_option("--completer-prompt", dg.prompt);
  datagen_cmd->add_flag("--serial", dg.serial);

  std::string fixture_dir;
  std::size_t fixture_count = 10;
  std::uint64_t fixture_seed = 7;
  auto* fixture_cmd = app.add_subcommand("make-fixture", "write a small synthetic corpus");
  fixture_cmd->add_option("--dir", fixture_dir)->required();
  fixture_cmd->add_option("--count", fixture_count);
  fixture_cmd->add_option("--seed", fixture_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*hiou_cmd) return cmd_hiou(pred, gt, parts, out);
    if (*validate_cmd) return cmd_validate(trace_file, out);
    if (*score_cmd) return cmd_score(score_flags, rollouts, score_out, score_serial, out, err);
    if (*serve_cmd) return cmd_serve(serve_flags, host, port, out);
    if (*datagen_cmd) return cmd_datagen(dg, out);
    if (*fixture_cmd) {
      out << write_synthetic_fixture(fixture_dir, fixture_count, fixture_seed).string() << "\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace sif
