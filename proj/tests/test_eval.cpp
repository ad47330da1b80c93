#include <opencv2/imgcodecs.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "mvrecon/eval.hpp"
#include "mvrecon/experiment.hpp"

using namespace mvrecon;
using testing::code_of;

namespace {

const std::vector<int> kGaps{1, 3, 5, 7, 15, 30};

FusionWeights one_hot(const std::string& tag, const std::vector<std::string>& tags) {
  FusionWeights w;
  for (int gap : kGaps) {
    WeightVector v;
    for (const auto& t : tags) v.emplace_back(t, t == tag ? 1.0 : 0.0);
    w.set(gap, v);
  }
  return w;
}

std::uint64_t oracle_fnv(const std::string& bytes, std::uint64_t h = 14695981039346656037ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TEST_CASE("sweep reports one row per gap over the test split") {
  const SequenceStore store = testing::patterned_store({1, 2, 3}, 200, 16);
  const std::vector<std::string> tags{"past", "future", "ref_2", "ref_3"};
  const testing::OracleProvider provider(tags, "ref_2");
  const auto report = run_sweep(provider, one_hot("ref_2", tags), store, kGaps, ViewMode::Multi);
  REQUIRE(report.rows.size() == 6);
  for (std::size_t i = 0; i < kGaps.size(); ++i) {
    const GapRow& r = report.rows[i];
    CHECK(r.gap == kGaps[i]);
    CHECK(r.mean_psnr == 100.0);
    CHECK(r.mean_ssim == 1.0);
    std::size_t expected = 0;
    for (FrameIndex c : store.split_indices(Split::Test)) expected += (c - r.gap >= 0 && c + r.gap <= 199) ? 1 : 0;
    CHECK(r.task_count == expected);
  }
  CHECK(report.row(30).task_count == 10);
  CHECK(code_of([&] { report.row(2); }) == ErrorCode::InvalidArgument);

  // Single view loses the planted reference and falls back to the intra pair.
  const auto single = run_sweep(provider, one_hot("ref_2", tags), store, kGaps, ViewMode::Single);
  for (const auto& r : single.rows) CHECK(r.mean_psnr < 100.0);
  CHECK(single.mode == ViewMode::Single);
}

TEST_CASE("sweep results do not depend on the thread count") {
  const SequenceStore store = testing::patterned_store({1, 2}, 200, 16);
  const std::vector<std::string> tags{"past", "future", "ref_2"};
  const testing::OracleProvider provider(tags, "nobody");
  FusionWeights w;
  for (int gap : kGaps) w.set(gap, {{"past", 0.25}, {"future", 0.35}, {"ref_2", 0.4}});
  SweepOptions one, many;
  many.threads = 3;
  const auto a = emit_report(run_sweep(provider, w, store, kGaps, ViewMode::Multi, one), ReportFormat::Csv);
  const auto b = emit_report(run_sweep(provider, w, store, kGaps, ViewMode::Multi, many), ReportFormat::Csv);
  CHECK(a == b);
}

TEST_CASE("sweeps fail on uncalibrated gaps") {
  const SequenceStore store = testing::patterned_store({1, 2}, 120, 16);
  const testing::OracleProvider provider({"past", "future", "ref_2"}, "past");
  FusionWeights w;
  w.set(1, {{"past", 1.0}});
  CHECK(code_of([&] { run_sweep(provider, w, store, {1, 3}, ViewMode::Multi); }) == ErrorCode::GapNotCalibrated);
}

TEST_CASE("prepare_task drops references for single view") {
  const SequenceStore store = testing::patterned_store({1, 2, 3}, 20, 16);
  const ActivityGate gate(store);
  const auto task = make_task(store, 10, 1);
  CHECK(prepare_task(task, store.rig(), gate, ViewMode::Single, 0.0).references.empty());
  CHECK(prepare_task(task, store.rig(), gate, ViewMode::Multi, 0.0).references.size() == 2);
  CHECK(parse_view_mode("single") == ViewMode::Single);
  CHECK(parse_view_mode("multi_view") == ViewMode::Multi);
  CHECK(std::string(view_mode_name(ViewMode::Single)) == "single_view");
  CHECK(code_of([] { parse_view_mode("stereo"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("report csv and markdown") {
  GapSweepReport r;
  r.mode = ViewMode::Multi;
  r.dataset_id = "synthetic";
  r.fingerprint = "00ff";
  r.rows = {{1, 31.25, 0.9375, 39}, {30, 22.1, 0.7, 10}};
  const std::string csv = emit_report(r, ReportFormat::Csv);
  CHECK(csv ==
        "gap,mean_psnr,mean_ssim,task_count,mode,dataset_id,fingerprint\n"
        "1,31.25,0.9375,39,multi_view,synthetic,00ff\n"
        "30,22.1,0.7,10,multi_view,synthetic,00ff\n");
  const GapSweepReport back = parse_report_csv(csv);
  CHECK(emit_report(back, ReportFormat::Csv) == csv);
  CHECK(back.rows[1].mean_psnr == 22.1);

  const std::string md = emit_report(r, ReportFormat::Markdown);
  CHECK(md ==
        "| multi_view | Gap 1 | Gap 30 |\n|---|---|---|\n| PSNR (dB) | 31.25 | 22.10 |\n"
        "| SSIM | 0.9375 | 0.7000 |\n| Tasks | 39 | 10 |\n");

  GapSweepReport empty;
  CHECK(emit_report(empty, ReportFormat::Csv) == "gap,mean_psnr,mean_ssim,task_count,mode,dataset_id,fingerprint\n");
  CHECK(emit_report(empty, ReportFormat::Markdown) == "| multi_view |\n|---|\n");
  CHECK(parse_report_csv(emit_report(empty, ReportFormat::Csv)).rows.empty());
  CHECK(code_of([] { parse_report_csv("gap,psnr\n"); }) == ErrorCode::ConfigError);
}

TEST_CASE("ablation table lines up shared gaps") {
  GapSweepReport single, multi;
  single.mode = ViewMode::Single;
  single.rows = {{1, 30.0, 0.9, 5}, {30, 20.0, 0.6, 5}};
  multi.rows = {{1, 30.1, 0.9, 5}, {7, 25.0, 0.8, 5}, {30, 21.5, 0.7, 5}};
  CHECK(emit_ablation(single, multi) ==
        "| PSNR (dB) | Gap 1 | Gap 30 |\n|---|---|---|\n| Single | 30.00 | 20.00 |\n| Multi | 30.10 | 21.50 |\n"
        "| Delta | 0.10 | 1.50 |\n");
}

TEST_CASE("fingerprint is FNV-1a over config and separated blobs") {
  const std::string fp = report_fingerprint("a = 1\n", {"xy", "z"});
  std::uint64_t h = oracle_fnv("a = 1\n");
  h = oracle_fnv("\x1f", h);
  h = oracle_fnv("xy", h);
  h = oracle_fnv("\x1f", h);
  h = oracle_fnv("z", h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  CHECK(fp == buf);
  CHECK(report_fingerprint("a = 1\n", {"x", "yz"}) != fp);
}

TEST_CASE("comparison grid lays out inputs, candidates, fused and truth") {
  const SequenceStore store = testing::patterned_store({1, 2, 3}, 20, 16);
  const std::vector<std::string> tags{"past", "future", "ref_2", "ref_3"};
  const testing::OracleProvider provider(tags, "ref_3");
  const auto task = make_task(store, 10, 2);
  const CandidateSet set = generate_candidates(task, provider);
  const Frame fused = fuse(set, WeightVector{{"ref_3", 1.0}});
  const auto path = testing::scratch_dir("grid") / "grid.png";
  const ComparisonGrid grid = emit_comparison_grid(task, set, fused, task.ground_truth, path);
  REQUIRE(grid.tiles.size() == 10);
  CHECK(grid.labels.size() == 10);
  CHECK(grid.labels.back().find("truth") != std::string::npos);

  const cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  REQUIRE(!img.empty());
  for (const Rect& t : grid.tiles) {
    CHECK(t.width() == 16);
    CHECK(t.height() == 16);
    CHECK(t.x1 <= img.cols);
    CHECK(t.y1 <= img.rows);
  }
  for (std::size_t i = 0; i < grid.tiles.size(); ++i)
    for (std::size_t j = i + 1; j < grid.tiles.size(); ++j) {
      const Rect& a = grid.tiles[i];
      const Rect& b = grid.tiles[j];
      CHECK((a.x1 <= b.x0 || b.x1 <= a.x0 || a.y1 <= b.y0 || b.y1 <= a.y0));
    }
  auto tile = [&](std::size_t k) {
    const Rect& r = grid.tiles[k];
    return img(cv::Rect(r.x0, r.y0, r.width(), r.height())).clone();
  };
  CHECK(cv::norm(tile(8), tile(9), cv::NORM_INF) == 0.0);
  CHECK(cv::norm(tile(0), tile(9), cv::NORM_INF) > 0.0);

  // Single view: two inputs, two candidates, fused and truth.
  ReconstructionTask single = task;
  single.references.clear();
  const CandidateSet two = generate_candidates(single, provider);
  const ComparisonGrid small = emit_comparison_grid(single, two, fuse(two, WeightVector{{"past", 1.0}}), std::nullopt,
                                                    testing::scratch_dir("grid_small") / "g.png");
  CHECK(small.tiles.size() == 5);
  CHECK(emit_comparison_grid(single, two, fuse(two, WeightVector{{"past", 1.0}}), single.ground_truth,
                             testing::scratch_dir("grid_small2") / "g.png")
            .tiles.size() == 6);
  CHECK(code_of([&] {
          emit_comparison_grid(task, set, Frame::filled(8, 8, 0.0f), task.ground_truth, path);
        }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("experiment configs build typed settings") {
  const auto cfg = KeyValueConfig::parse(
      "resolution = 64\ncameras = 1,2,3\noffset.2 = 4.1\nmodel.depth = 6\nmodel.base_filters = 16\n"
      "model.dropout_levels = none\ndisc.norm = instance\ntrain.steps = 10\ntrain.seed = 9\n"
      "synth.view.2 = 1,0,0,1,24,20\nsynth.brightness.3 = 1.15\ngaps = 1,5\n");
  const Experiment e = build_experiment(cfg);
  CHECK(e.rig.resolution == 64);
  CHECK(e.rig.offsets_seconds.at(2) == 4.1);
  CHECK(e.generator.depth == 6);
  CHECK(e.generator.resolved_dropout_levels().empty());
  CHECK(e.discriminator.norm == DiscriminatorNorm::Instance);
  CHECK(e.train.steps == 10);
  CHECK(e.train.seed == 9);
  CHECK(e.synth.canvas_size == 96);
  CHECK(e.synth.view_transforms.at(2).tx == 24);
  CHECK(e.synth.brightness.at(3) == 1.15);
  CHECK(e.gaps == std::vector<int>{1, 5});
  CHECK(e.dataset_id == "synthetic");

  const Experiment defaults = build_experiment(KeyValueConfig{});
  CHECK(defaults.rig.resolution == 256);
  CHECK(defaults.generator.depth == 8);
  CHECK(defaults.generator.base_filters == 64);
  CHECK(defaults.train.lambda_l1 == 100.0);
  CHECK(defaults.grid_step == 0.05);

  CHECK(code_of([] { build_experiment(KeyValueConfig::parse("resolutoin = 64\n")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { build_experiment(KeyValueConfig::parse("disc.norm = batch\n")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { build_experiment(KeyValueConfig::parse("data.source = frames\n")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { build_experiment(KeyValueConfig::parse("synth.view.2 = 1,2\n")); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { KeyValueConfig::parse("just words\n"); }) == ErrorCode::ConfigError);
}

TEST_CASE("rig config describes an exported rig") {
  RigSettings rs;
  rs.cameras = {1, 2};
  rs.offsets_seconds = {{2, 0.4}};
  rs.resolution = 32;
  rs.overlap_zones = {{2, Rect{1, 2, 30, 31}}};
  const CameraRig rig(rs);
  KeyValueConfig cfg = rig_config(rig);
  cfg.set("data.source", "frames");
  cfg.set("data.root", "/tmp/x");
  const Experiment e = build_experiment(cfg);
  const CameraRig back(e.rig);
  CHECK(back.cameras() == rig.cameras());
  CHECK(back.frame_shift(2) == rig.frame_shift(2));
  CHECK(back.overlap_zone(2) == rig.overlap_zone(2));
  CHECK(back.resolution() == 32);
}

TEST_CASE("shipped configs build") {
  for (const auto& entry : std::filesystem::directory_iterator(std::string(MVRECON_SOURCE_DIR) + "/configs")) {
    if (entry.path().extension() != ".cfg") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(build_experiment(KeyValueConfig::load(entry.path())));
  }
}
