#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sif/depth.hpp"
#include "sif/geometry.hpp"
#include "sif/http_client.hpp"
#include "sif/judge.hpp"
#include "sif/scaffold.hpp"

namespace sif {

/// One annotated (question, image, boxes, answer) sample.
struct SourceRecord {
  std::string id;
  std::filesystem::path image_path;  // resolved against the input file's directory
  std::filesystem::path depth_path;
  std::string image_ref;  // paths as written in the input
  std::string depth_ref;
  std::string question;
  std::string answer;
  BoxSet gt_boxes;
};

struct RecordReject {
  std::size_t line = 0;
  std::string id;
  std::string stage;
  std::string reason;
};

struct SourceLoad {
  std::vector<SourceRecord> records;
  std::vector<RecordReject> rejects;
  std::vector<std::string> warnings;
};

/// Reads line-delimited JSON source records. Bad lines are tallied and
/// skipped; an unreadable file throws std::runtime_error.
SourceLoad load_source_records(const std::filesystem::path& path);

/// Writes one overlay per trajectory set, named <id>_step<k>.ppm.
std::vector<std::filesystem::path> render_overlays(const std::filesystem::path& image_path,
                                                   const FocusTrajectory& traj, const std::string& id,
                                                   const std::filesystem::path& out_dir);

struct CotRequest {
  const SourceRecord& record;
  const FocusTrajectory& scaffold;
  const DepthMap& depth;
  const std::vector<std::filesystem::path>& overlays;
  /// Mean depth per box, aligned with scaffold.sets.
  const std::vector<std::vector<double>>& region_depths;
};

class CotCompleter {
 public:
  virtual ~CotCompleter() = default;
  /// Raw trace text for one request; called concurrently for distinct records.
  virtual std::string complete(const CotRequest& request) = 0;
};

/// Stitches a grammatical trace directly from the scaffold: one step per
/// set, depths read from the depth map, answer copied from the record.
class MockCompleter final : public CotCompleter {
 public:
  std::string complete(const CotRequest& request) override;
};

extern const std::string_view kDefaultCotPrompt;

/// Vision-chat completion: the prompt plus every overlay as a base64 data URL.
class HttpCompleter final : public CotCompleter {
 public:
  HttpCompleter(HttpEndpoint endpoint, std::string prompt_template = std::string(kDefaultCotPrompt));
  std::string complete(const CotRequest& request) override;
  std::string render_prompt(const CotRequest& request) const;

 private:
  HttpEndpoint endpoint_;
  std::string template_;
};

struct SampleRejected : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Asks the completer for a trace until one parses and ends on exactly the
/// ground-truth boxes; throws SampleRejected when `attempts` run out.
std::string complete_cot(const SourceRecord& record, const FocusTrajectory& scaffold, const DepthMap& depth,
                         const std::vector<std::filesystem::path>& overlays, CotCompleter& completer,
                         int attempts = 3);

struct DatagenOptions {
  std::filesystem::path input;
  std::filesystem::path output;       // SIF JSONL
  std::filesystem::path overlay_dir;  // default: <output dir>/overlays
  std::filesystem::path report;       // default: <output>.report.json
  ScaffoldConfig scaffold;
  int completion_attempts = 3;
  bool parallel = true;
};

struct StageTimings {
  double scaffold = 0.0;
  double overlays = 0.0;
  double completion = 0.0;
  double total = 0.0;
};

struct RunReport {
  std::size_t processed = 0;
  std::size_t emitted = 0;
  std::size_t rejected = 0;
  std::size_t invalid_lines = 0;
  std::vector<RecordReject> rejects;
  std::vector<std::string> warnings;
  StageTimings seconds;
};

nlohmann::json to_json(const RunReport& report);

/// Scaffold -> overlays -> completion for every source record, one SIF JSON
/// line per emitted record, in input order. Per-record failures are
/// rejected and reported; I/O failure on the outputs throws.
RunReport generate_dataset(const DatagenOptions& options, CotCompleter& completer);

nlohmann::json trajectory_to_json(const FocusTrajectory& traj);

/// Writes a small synthetic corpus (images, depth maps, annotations.jsonl)
/// for offline runs of the pipeline.
std::filesystem::path write_synthetic_fixture(const std::filesystem::path& dir, std::size_t count = 10,
                                              std::uint64_t seed = 7);

}  // namespace sif
