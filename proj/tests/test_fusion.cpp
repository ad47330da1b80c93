#include "doctest.h"
#include "helpers.hpp"
#include "mvrecon/fusion.hpp"
#include "mvrecon/metrics.hpp"

using namespace mvrecon;
using testing::code_of;

namespace {

CandidateSet make_set(int gap, const std::vector<std::pair<std::string, Frame>>& items) {
  CandidateSet s(gap);
  for (const auto& [tag, f] : items) s.add(tag, f);
  return s;
}

// Reference fusion: weighted sum in double, clamped to the per-pixel envelope.
Frame oracle_fuse(const std::vector<Frame>& frames, const std::vector<double>& w) {
  const Frame& f0 = frames.front();
  std::vector<float> out(f0.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0, lo = 1e9, hi = -1e9;
    for (std::size_t s = 0; s < frames.size(); ++s) {
      const double v = frames[s].pixels()[i];
      acc += w[s] * v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out[i] = float(std::clamp(acc, lo, hi));
  }
  return Frame(f0.height(), f0.width(), out, f0.camera_id(), f0.index());
}

// Independent enumeration of count vectors summing to m.
void enumerate(int n, int m, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (int(cur.size()) == n - 1) {
    int used = 0;
    for (int c : cur) used += c;
    cur.push_back(m - used);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  int used = 0;
  for (int c : cur) used += c;
  for (int c = 0; c <= m - used; ++c) {
    cur.push_back(c);
    enumerate(n, m, cur, out);
    cur.pop_back();
  }
}

}  // namespace

TEST_CASE("fusion averages with the given weights") {
  const auto set = make_set(1, {{"past", Frame::filled(4, 4, 0.0f)}, {"future", Frame::filled(4, 4, 0.5f)}});
  const Frame f = fuse(set, WeightVector{{"past", 0.3}, {"future", 0.7}});
  for (float v : f.pixels()) CHECK(v == doctest::Approx(0.35).epsilon(1e-6));
  const Frame one = fuse(set, WeightVector{{"past", 1.0}, {"future", 0.0}});
  CHECK(pixels_equal(one, set.candidates()[0].second));
}

TEST_CASE("fusion matches the reference and stays inside the envelope") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<Frame> frames;
    for (int s = 0; s < 3; ++s) frames.push_back(testing::random_frame(rng, 6, 6));
    std::vector<double> w(3);
    double total = 0;
    for (double& v : w) total += (v = nn::uniform01(rng));
    for (double& v : w) v /= total;
    const auto set = make_set(3, {{"past", frames[0]}, {"future", frames[1]}, {"ref_2", frames[2]}});
    const Frame fused = fuse(set, WeightVector{{"past", w[0]}, {"future", w[1]}, {"ref_2", w[2]}});
    const Frame expected = oracle_fuse(frames, w);
    for (std::size_t i = 0; i < fused.size(); ++i) {
      CHECK(fused.pixels()[i] == doctest::Approx(expected.pixels()[i]).epsilon(1e-6));
      const float lo = std::min({frames[0].pixels()[i], frames[1].pixels()[i], frames[2].pixels()[i]});
      const float hi = std::max({frames[0].pixels()[i], frames[1].pixels()[i], frames[2].pixels()[i]});
      CHECK(fused.pixels()[i] >= lo);
      CHECK(fused.pixels()[i] <= hi);
    }
  }
}

TEST_CASE("weights renormalize over the candidates present") {
  const auto set = make_set(1, {{"past", Frame::filled(2, 2, 0.0f)}, {"future", Frame::filled(2, 2, 0.0f)}});
  const auto w = effective_weights(set, {{"past", 0.5}, {"future", 0.25}, {"ref_2", 0.25}});
  CHECK(w[0] == doctest::Approx(2.0 / 3.0));
  CHECK(w[1] == doctest::Approx(1.0 / 3.0));
  const auto uniform = effective_weights(set, {{"ref_2", 1.0}});
  CHECK(uniform == std::vector<double>{0.5, 0.5});
  const auto absent = effective_weights(set, {{"past", 1.0}});
  CHECK(absent == std::vector<double>{1.0, 0.0});
}

TEST_CASE("fusion errors") {
  CHECK(code_of([] { fuse(CandidateSet(1), WeightVector{{"past", 1.0}}); }) == ErrorCode::NoCandidates);
  FusionWeights fw;
  fw.set(3, {{"past", 1.0}});
  const auto set = make_set(1, {{"past", Frame::filled(2, 2, 0.0f)}});
  CHECK(code_of([&] { fuse(set, fw); }) == ErrorCode::GapNotCalibrated);
  CHECK_NOTHROW(fuse(make_set(3, {{"past", Frame::filled(2, 2, 0.0f)}}), fw));
}

TEST_CASE("simplex grid enumerates every point in descending order") {
  const auto grid = simplex_grid(3, 0.05);
  CHECK(grid.size() == 231);
  CHECK(grid.front() == std::vector<int>{20, 0, 0});
  CHECK(grid.back() == std::vector<int>{0, 0, 20});
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i - 1] > grid[i]);
  for (const auto& p : grid) CHECK(p[0] + p[1] + p[2] == 20);
  CHECK(simplex_grid(2, 0.5) == std::vector<std::vector<int>>{{2, 0}, {1, 1}, {0, 2}});
  CHECK(simplex_grid(1, 0.05) == std::vector<std::vector<int>>{{20}});
  CHECK(simplex_grid(4, 0.05).size() == 1771);
  CHECK(code_of([] { simplex_grid(2, 0.3); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("calibration picks the best grid point") {
  std::mt19937_64 rng(12);
  const std::vector<std::string> tags{"past", "future", "ref_2"};
  std::vector<ScoredTask> tasks;
  for (int t = 0; t < 4; ++t) {
    const Frame gt = testing::random_frame(rng, 12, 12);
    CandidateSet set(5);
    for (int s = 0; s < 3; ++s) {
      std::vector<float> px(gt.pixels().begin(), gt.pixels().end());
      for (float& v : px) v = std::clamp(v + float((0.2 + 0.3 * s) * (nn::uniform01(rng) - 0.5)), -1.0f, 1.0f);
      set.add(tags[s], Frame(12, 12, px, 1, 0));
    }
    tasks.push_back({set, gt});
  }
  CalibrationOptions opt;
  opt.grid_step = 0.1;
  const GapCalibration best = calibrate_gap(5, tags, tasks, opt);
  CHECK(best.task_count == 4);

  std::vector<std::vector<int>> points;
  std::vector<int> cur;
  enumerate(3, 10, cur, points);
  CHECK(points.size() == 66);
  double top = -1;
  for (const auto& p : points) {
    std::vector<double> w{p[0] / 10.0, p[1] / 10.0, p[2] / 10.0};
    double sum = 0;
    for (const auto& t : tasks) {
      std::vector<Frame> frames;
      for (const auto& [tag, f] : t.candidates.candidates()) frames.push_back(f);
      sum += psnr(oracle_fuse(frames, w), t.ground_truth);
    }
    top = std::max(top, sum / 4.0);
  }
  CHECK(best.mean_psnr == doctest::Approx(top).epsilon(1e-5));
  double total = 0;
  for (const auto& [tag, w] : best.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(code_of([&] { calibrate_gap(5, tags, {}, opt); }) == ErrorCode::EmptyValidation);
}

TEST_CASE("calibration ties prefer intra mass, then the earlier point") {
  const Frame gt = Frame::filled(12, 12, 0.2f);
  const Frame same = Frame::filled(12, 12, 0.4f);
  CandidateSet a(1);
  a.add("past", same);
  a.add("ref_2", same);
  CalibrationOptions opt;
  const auto intra = calibrate_gap(1, {"past", "ref_2"}, {{a, gt}}, opt);
  CHECK(intra.weights == WeightVector{{"past", 1.0}, {"ref_2", 0.0}});

  CandidateSet b(1);
  b.add("ref_2", same);
  b.add("ref_3", same);
  const auto refs = calibrate_gap(1, {"ref_2", "ref_3"}, {{b, gt}}, opt);
  CHECK(refs.weights == WeightVector{{"ref_2", 1.0}, {"ref_3", 0.0}});

  const auto single = calibrate_gap(1, {"ref_2"}, {{make_set(1, {{"ref_2", gt}}), gt}}, opt);
  CHECK(single.weights == WeightVector{{"ref_2", 1.0}});
  CHECK(single.mean_psnr == 100.0);
}

TEST_CASE("a planted ground-truth source gets all the weight at every gap") {
  const SequenceStore store = testing::patterned_store({1, 2, 3}, 120, 16);
  const std::vector<int> gaps{1, 3, 5, 7};
  for (const std::string planted : {"past", "future", "ref_2", "ref_3"}) {
    const testing::OracleProvider provider({"past", "future", "ref_2", "ref_3"}, planted);
    std::vector<GapCalibration> details;
    const FusionWeights w = calibrate_weights(provider, store, gaps, {}, &details);
    REQUIRE(details.size() == gaps.size());
    for (int gap : gaps) {
      for (const auto& [tag, v] : w.at(gap)) CHECK(v == (tag == planted ? 1.0 : 0.0));
    }
    for (const auto& d : details) CHECK(d.mean_psnr == 100.0);
  }
}

TEST_CASE("calibration needs validation tasks") {
  const SequenceStore store = testing::patterned_store({1, 2}, 30, 16);
  const testing::OracleProvider provider({"past", "future", "ref_2"}, "past");
  CHECK_NOTHROW(calibrate_weights(provider, store, {1}));
  CHECK(code_of([&] { calibrate_weights(provider, store, {25}); }) == ErrorCode::EmptyValidation);
}

TEST_CASE("candidates follow the tags present in the task") {
  const SequenceStore store = testing::patterned_store({1, 2, 3}, 20, 16);
  const auto task = make_task(store, 10, 2);
  const testing::OracleProvider full({"past", "future", "ref_2", "ref_3"}, "ref_3");
  const CandidateSet set = generate_candidates(task, full);
  REQUIRE(set.size() == 4);
  CHECK(set.candidates()[2].first == "ref_2");
  CHECK(pixels_equal(*set.find("ref_3"), *task.ground_truth));
  CHECK(pixels_equal(*set.find("past"), task.past));
  CHECK(pixels_equal(condition_for(task, "ref_2"), task.references[0]));

  const testing::OracleProvider partial({"past", "future", "ref_2"}, "past");
  try {
    generate_candidates(task, partial);
    FAIL("expected MissingModel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingModel);
    CHECK(std::string(e.what()).find("ref_3") != std::string::npos);
  }
  ReconstructionTask gated = task;
  gated.references.pop_back();
  CHECK(generate_candidates(gated, partial).size() == 3);
}

TEST_CASE("weights csv round trips exactly") {
  FusionWeights w;
  w.set(1, {{"past", 0.35}, {"future", 0.6}, {"ref_2", 0.05}});
  w.set(30, {{"past", 1.0 / 3.0}, {"future", 1.0 / 3.0}, {"ref_2", 1.0 / 3.0}});
  const std::string csv = weights_csv(w);
  CHECK(csv.rfind("gap,source_tag,weight\n1,past,0.35\n", 0) == 0);
  const FusionWeights back = parse_weights_csv(csv);
  CHECK(back.table() == w.table());
  CHECK(weights_csv(back) == csv);

  const auto path = testing::scratch_dir("weights") / "w.csv";
  save_weights(path, w);
  CHECK(load_weights(path).table() == w.table());
  CHECK(code_of([] { parse_weights_csv("gap,source_tag,weight\n1,past,0.5\n"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { parse_weights_csv("1,past,1\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_weights_csv("gap,source_tag,weight\n1,past,x\n"); }) == ErrorCode::ConfigError);
}
