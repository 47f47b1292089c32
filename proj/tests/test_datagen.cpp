#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "sif/datagen.hpp"
#include "sif/image.hpp"
#include "sif/rewards.hpp"
#include "sif/scoring.hpp"
#include "sif/trace.hpp"

using namespace sif;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<nlohmann::json> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

bool is_red(const RgbImage& img, std::size_t x, std::size_t y) {
  const auto c = img.get(x, y);
  return c.r == 255 && c.g == 0 && c.b == 0;
}

DatagenOptions options_for(const std::filesystem::path& input, const std::filesystem::path& out_dir) {
  DatagenOptions o;
  o.input = input;
  o.output = out_dir / "sif.jsonl";
  o.scaffold.seed = 42;
  return o;
}

}  // namespace

TEST_CASE("ppm round trip") {
  RgbImage img(5, 3, {10, 20, 30});
  img.set(4, 2, {1, 2, 3});
  const auto back = parse_ppm(encode_ppm(img));
  CHECK(back.width == 5);
  CHECK(back.height == 3);
  CHECK(back.pixels == img.pixels);
  CHECK(back.get(4, 2).b == 3);

  const std::string bad = "P6\n2 2\n255\n\x01";
  CHECK_THROWS_AS(parse_ppm(std::span(reinterpret_cast<const std::uint8_t*>(bad.data()), bad.size())), ImageError);
  const std::string wrong = "P3\n1 1\n255\n";
  CHECK_THROWS_AS(parse_ppm(std::span(reinterpret_cast<const std::uint8_t*>(wrong.data()), wrong.size())), ImageError);
}

TEST_CASE("unit box outline hugs the border") {
  RgbImage img(100, 100, {200, 200, 200});
  draw_box_outline(img, kFullImage);
  CHECK(is_red(img, 0, 0));
  CHECK(is_red(img, 99, 99));
  CHECK(is_red(img, 0, 50));
  CHECK(is_red(img, 50, 99));
  CHECK(is_red(img, 2, 50));
  CHECK_FALSE(is_red(img, 3, 50));
  CHECK_FALSE(is_red(img, 50, 50));

  RgbImage small(100, 100);
  draw_box_outline(small, {0.5, 0.5, 0.505, 0.505});
  CHECK(is_red(small, 50, 50));
}

TEST_CASE("source records") {
  fixtures::ScratchDir dir("sif_datagen_records");
  const auto ann = write_synthetic_fixture(dir.path, 10, 7);
  const auto load = load_source_records(ann);
  CHECK(load.records.size() == 10);
  CHECK(load.rejects.empty());
  CHECK(load.records[0].image_path == dir.path / "fx000.ppm");

  std::ofstream(dir.path / "mixed.jsonl")
      << R"({"id":"a","image_path":"fx000.ppm","depth_path":"fx000_depth.pgm","question":"q","answer":"x","gt_boxes":[[0.1,0.1,0.2,0.2]]})"
      << "\n\n"
      << R"({"id":"b","image_path":"fx000.ppm","depth_path":"fx000_depth.pgm","question":"q","answer":"x","gt_boxes":[[0.5,0.1,0.2,0.2]]})"
      << "\nnot json\n"
      << R"({"id":"a","image_path":"fx000.ppm","depth_path":"fx000_depth.pgm","question":"q","answer":"x","gt_boxes":[[0.1,0.1,0.2,0.2]]})"
      << "\n";
  const auto mixed = load_source_records(dir.path / "mixed.jsonl");
  CHECK(mixed.records.size() == 1);
  REQUIRE(mixed.rejects.size() == 3);
  CHECK(mixed.rejects[0].line == 3);
  CHECK(mixed.rejects[0].id == "b");
  CHECK(mixed.rejects[1].line == 4);
  CHECK(mixed.rejects[2].reason.find("duplicate") != std::string::npos);

  std::ofstream(dir.path / "empty.jsonl");
  const auto empty = load_source_records(dir.path / "empty.jsonl");
  CHECK(empty.records.empty());
  CHECK(empty.warnings.size() == 1);
  CHECK_THROWS_AS(load_source_records(dir.path / "missing.jsonl"), std::runtime_error);
}

TEST_CASE("overlays are named per step and deterministic") {
  fixtures::ScratchDir dir("sif_datagen_overlays");
  write_synthetic_fixture(dir.path, 1, 3);
  FocusTrajectory traj;
  traj.sets = {{kFullImage}, {{0.1, 0.1, 0.4, 0.4}}};
  const auto a = render_overlays(dir.path / "fx000.ppm", traj, "rec", dir.path / "a");
  const auto b = render_overlays(dir.path / "fx000.ppm", traj, "rec", dir.path / "b");
  REQUIRE(a.size() == 2);
  CHECK(a[0].filename() == "rec_step0.ppm");
  CHECK(a[1].filename() == "rec_step1.ppm");
  CHECK(slurp(a[1]) == slurp(b[1]));
  const auto first = read_ppm(a[0]);
  CHECK(is_red(first, 0, 0));
  CHECK_FALSE(is_red(read_ppm(a[1]), 0, 0));
}

TEST_CASE("pipeline on the synthetic fixture") {
  fixtures::ScratchDir dir("sif_datagen_pipeline");
  const auto ann = write_synthetic_fixture(dir.path / "src", 10, 7);
  MockCompleter completer;
  const auto report = generate_dataset(options_for(ann, dir.path / "run1"), completer);
  CHECK(report.processed == 10);
  CHECK(report.emitted == 10);
  CHECK(report.rejected == 0);
  CHECK(std::filesystem::exists(dir.path / "run1" / "sif.jsonl.report.json"));

  const auto lines = read_lines(dir.path / "run1" / "sif.jsonl");
  REQUIRE(lines.size() == 10);
  for (const auto& rec : lines) {
    const std::string cot = rec["cot"];
    CHECK(format_reward(cot) == 1.0);
    const auto parsed = parse_trace(cot);
    REQUIRE(parsed);
    const auto gt = boxes_from_json(rec["gt_boxes"]);
    CHECK(extract_boxsets(parsed.trace()).back() == gt);
    CHECK(grounding_reward(parsed.trace(), gt).s_end == 1.0);
    const auto depth = load_depth_map(dir.path / "src" / rec["depth_path"].get<std::string>());
    CHECK(depth_reward(parsed.trace(), depth) == 1.0);
    CHECK(parsed.trace().answer == rec["answer"]);
    CHECK(rec["scaffold"]["reversed"] == true);
    CHECK(rec["overlays"].size() == rec["scaffold"]["sets"].size());
    for (const auto& o : rec["overlays"]) CHECK(std::filesystem::exists(dir.path / "run1" / o.get<std::string>()));
  }

  auto serial = options_for(ann, dir.path / "run2");
  serial.parallel = false;
  generate_dataset(serial, completer);
  CHECK(slurp(dir.path / "run1" / "sif.jsonl") == slurp(dir.path / "run2" / "sif.jsonl"));
  CHECK(slurp(dir.path / "run1" / "overlays" / "fx004_step1.ppm") ==
        slurp(dir.path / "run2" / "overlays" / "fx004_step1.ppm"));

  auto other_seed = options_for(ann, dir.path / "run3");
  other_seed.scaffold.seed = 43;
  generate_dataset(other_seed, completer);
  CHECK(slurp(dir.path / "run1" / "sif.jsonl") != slurp(dir.path / "run3" / "sif.jsonl"));
}

TEST_CASE("one bad record does not disturb the others") {
  fixtures::ScratchDir dir("sif_datagen_reject");
  const auto ann = write_synthetic_fixture(dir.path / "src", 10, 7);
  MockCompleter completer;
  generate_dataset(options_for(ann, dir.path / "clean"), completer);

  std::ofstream(dir.path / "src" / "fx003.ppm", std::ios::trunc) << "garbage";
  const auto report = generate_dataset(options_for(ann, dir.path / "broken"), completer);
  CHECK(report.emitted == 9);
  CHECK(report.rejected == 1);
  REQUIRE(report.rejects.size() == 1);
  CHECK(report.rejects[0].id == "fx003");
  CHECK(report.rejects[0].stage == "overlays");

  auto clean = read_lines(dir.path / "clean" / "sif.jsonl");
  clean.erase(clean.begin() + 3);
  CHECK(clean == read_lines(dir.path / "broken" / "sif.jsonl"));
}

TEST_CASE("completions that miss the ground truth are rejected") {
  struct Wrong final : CotCompleter {
    int calls = 0;
    std::string complete(const CotRequest&) override {
      ++calls;
      return R"(<think><area>[{"bbox":[0,0,1,1],"depth":0.5}]</area><text>x</text></think><answer>a</answer>)";
    }
  } wrong;
  fixtures::ScratchDir dir("sif_datagen_wrong");
  const auto ann = write_synthetic_fixture(dir.path / "src", 2, 7);
  auto opts = options_for(ann, dir.path / "out");
  opts.parallel = false;
  const auto report = generate_dataset(opts, wrong);
  CHECK(report.emitted == 0);
  CHECK(report.rejected == 2);
  CHECK(wrong.calls == 6);
  CHECK(report.rejects[0].stage == "completion");
}

TEST_CASE("shipped prompt file matches the built-in template") {
  CHECK(slurp(std::string(SIF_SOURCE_DIR) + "/assets/prompts/cot.txt") == std::string(kDefaultCotPrompt) + "\n");
}
