#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mvrecon/image_io.hpp"

using namespace mvrecon;
using testing::patterned_store;

using testing::code_of;

namespace {

SynthConfig small_synth() {
  SynthConfig c;
  c.resolution = 32;
  c.canvas_size = 48;
  c.sequence_length = 40;
  c.object_radius = 5;
  c.seed = 7;
  c.view_transforms = {{1, {1, 0, 0, 1, 8, 8}}, {2, {1, 0, 0, 1, 12, 10}}, {3, {1, 0, 0, 1, 5, 11}}};
  c.brightness = {{2, 0.85}, {3, 1.15}};
  return c;
}

}  // namespace

TEST_CASE("sample_tasks counts sliding-window centres") {
  const SequenceStore store = patterned_store({1}, 100, 8);
  CHECK(sample_tasks(store, 1, Split::All).size() == 98);

  std::size_t expected = 0;
  for (int i = 0; i < 100; ++i) expected += (i - 30 >= 0 && i + 30 <= 99) ? 1 : 0;
  const auto tasks = sample_tasks(store, 30, Split::All);
  CHECK(tasks.size() == expected);
  CHECK(tasks.size() == 40);
  CHECK(tasks.front().missing_index == 30);
  CHECK(tasks.back().missing_index == 69);
  for (const auto& t : tasks) {
    CHECK(t.past.index() == t.missing_index - 30);
    CHECK(t.future.index() == t.missing_index + 30);
    REQUIRE(t.ground_truth);
    CHECK(pixels_equal(*t.ground_truth, store.frame(1, t.missing_index)));
  }

  const SequenceStore tiny = patterned_store({1}, 3, 8);
  CHECK(code_of([&] { sample_tasks(tiny, 5, Split::All); }) == ErrorCode::GapTooLarge);
  CHECK(code_of([&] { sample_tasks(tiny, 0, Split::All); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("tasks carry one reference per reference camera") {
  const SequenceStore store = patterned_store({1, 2, 3}, 20, 8);
  const auto tasks = sample_tasks(store, 3, Split::All);
  for (const auto& t : tasks) {
    REQUIRE(t.references.size() == 2);
    CHECK(t.references[0].camera_id() == 2);
    CHECK(t.references[1].index() == t.missing_index);
    CHECK_NOTHROW(validate_task(t, store.rig()));
  }
}

TEST_CASE("splits are contiguous, disjoint and sized by the fractions") {
  const SequenceStore store = patterned_store({1}, 100, 8);
  const auto train = store.split_indices(Split::Train);
  const auto val = store.split_indices(Split::Val);
  const auto test = store.split_indices(Split::Test);
  CHECK(test.size() == 20);
  CHECK(val.size() == 8);
  CHECK(train.size() == 72);
  CHECK(train.back() < val.front());
  CHECK(val.back() < test.front());
  CHECK(train.size() + val.size() + test.size() == store.frame_count());
  CHECK(store.split_of(71) == Split::Train);
  CHECK(store.split_of(72) == Split::Val);
  CHECK(store.split_of(80) == Split::Test);

  // Test tasks are centred in the test split only.
  for (const auto& t : sample_tasks(store, 1, Split::Test)) CHECK(store.split_of(t.missing_index) == Split::Test);
}

TEST_CASE("store rejects unordered or misaligned frames") {
  RigSettings rs;
  rs.cameras = {1};
  rs.resolution = 4;
  std::map<CameraId, std::vector<Frame>> frames;
  frames[1] = {Frame::filled(4, 4, 0, 1, 2), Frame::filled(4, 4, 0, 1, 1)};
  CHECK(code_of([&] { SequenceStore s(CameraRig(rs), frames); }) == ErrorCode::IndexMismatch);
  frames[1] = {Frame::filled(4, 4, 0, 1, 1), Frame::filled(4, 4, 0, 1, 1)};
  CHECK(code_of([&] { SequenceStore s(CameraRig(rs), frames); }) == ErrorCode::IndexMismatch);
  frames[1] = {};
  CHECK(code_of([&] { SequenceStore s(CameraRig(rs), frames); }) == ErrorCode::EmptyCamera);
}

TEST_CASE("ingest shifts reference cameras by rounded offsets") {
  const auto root = testing::scratch_dir("ingest");
  RigSettings rs;
  rs.cameras = {1, 2, 3};
  rs.target_camera = 1;
  rs.offsets_seconds = {{2, 4.1}, {3, 1.33}};
  rs.fps = 10;
  rs.resolution = 8;
  const CameraRig rig(rs);
  // A frame's colour encodes its wall-clock time so synchrony is checkable.
  auto frame_for_time = [](int t) { return Frame::filled(8, 8, normalize_u8(std::uint8_t(t)), 0, 0); };
  const int n = 60;
  for (int f = 0; f < n; ++f) write_frame_png(root / "cam1" / (std::to_string(1000000 + f).substr(1) + ".png"), frame_for_time(f));
  for (int f = 0; f < n + 41; ++f) {
    // Camera 2 started 4.1 s earlier: its file f was shot at target time f - 41.
    if (f >= 41) write_frame_png(root / "cam2" / (std::to_string(1000000 + f).substr(1) + ".png"), frame_for_time(f - 41));
  }
  for (int f = 13; f < n + 13 - 5; ++f) {
    write_frame_png(root / "cam3" / (std::to_string(1000000 + f).substr(1) + ".png"), frame_for_time(f - 13));
  }
  const SequenceStore store = ingest(default_camera_dirs(root, rig), rig);
  // Camera 3 stops five frames early, so the last five target indices lack partners.
  CHECK(store.frame_count() == std::size_t(n - 5));
  CHECK(store.indices().front() == 0);
  CHECK(store.indices().back() == n - 6);
  for (FrameIndex i : store.indices()) {
    const float expected = normalize_u8(std::uint8_t(i));
    CHECK(store.frame(1, i).at(0, 0, 0) == expected);
    CHECK(store.frame(2, i).at(0, 0, 0) == expected);
    CHECK(store.frame(3, i).at(0, 0, 0) == expected);
    for (CameraId c : rig.cameras()) {
      const double wall = double(i + rig.frame_shift(c)) / rig.fps() - rig.offset_seconds(c);
      CHECK(std::abs(wall - double(i) / rig.fps()) <= 0.5 / rig.fps());
    }
  }
  CHECK(store.frame(2, 0).source_path().find("000041.png") != std::string::npos);
}

TEST_CASE("ingest with a single camera keeps indices") {
  const auto root = testing::scratch_dir("ingest_single");
  for (int f : {3, 4, 7}) write_frame_png(root / "cam1" / ("00000" + std::to_string(f) + ".png"), Frame::filled(8, 8, 0.0f));
  RigSettings rs;
  rs.cameras = {1};
  rs.resolution = 8;
  const SequenceStore store = ingest(default_camera_dirs(root, CameraRig(rs)), CameraRig(rs));
  CHECK(store.indices() == std::vector<FrameIndex>{3, 4, 7});
}

TEST_CASE("ingest errors name the camera or file") {
  const auto root = testing::scratch_dir("ingest_errors");
  RigSettings rs;
  rs.cameras = {1, 2};
  rs.resolution = 8;
  const CameraRig rig(rs);
  write_frame_png(root / "cam1" / "000000.png", Frame::filled(8, 8, 0.0f));
  std::filesystem::create_directories(root / "cam2");
  CHECK(code_of([&] { ingest(default_camera_dirs(root, rig), rig); }) == ErrorCode::EmptyCamera);

  std::ofstream(root / "cam2" / "000000.png") << "not an image";
  try {
    ingest(default_camera_dirs(root, rig), rig);
    FAIL("expected UnreadableImage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnreadableImage);
    CHECK(std::string(e.what()).find("cam2") != std::string::npos);
  }
}

TEST_CASE("ingest resizes to the configured resolution") {
  const auto root = testing::scratch_dir("ingest_resize");
  write_frame_png(root / "cam1" / "000000.png", Frame::filled(16, 16, 0.5f));
  RigSettings rs;
  rs.cameras = {1};
  rs.resolution = 8;
  const SequenceStore store = ingest(default_camera_dirs(root, CameraRig(rs)), CameraRig(rs));
  CHECK(store.height() == 8);
  CHECK(store.frame(1, 0).at(2, 3, 3) == normalize_u8(quantize_u8(0.5f)));
}

TEST_CASE("export then ingest reproduces a synthetic store") {
  SynthConfig c = small_synth();
  c.offsets_seconds = {{2, 0.4}, {3, 1.3}};
  c.sequence_length = 12;
  const SequenceStore store = synthesize(c);
  const auto root = testing::scratch_dir("export");
  export_frames(store, root);
  CHECK(std::filesystem::exists(root / "cam2" / "000004.png"));
  CHECK(std::filesystem::exists(root / "cam3" / "000013.png"));
  const SequenceStore back = ingest(default_camera_dirs(root, store.rig()), store.rig());
  REQUIRE(back.indices() == store.indices());
  for (CameraId cam : store.rig().cameras()) {
    for (FrameIndex i : store.indices()) CHECK(pixels_equal(back.frame(cam, i), store.frame(cam, i)));
  }
}

TEST_CASE("synthesis is deterministic in the seed") {
  const SequenceStore a = synthesize(small_synth());
  const SequenceStore b = synthesize(small_synth());
  SynthConfig other = small_synth();
  other.seed = 8;
  const SequenceStore c = synthesize(other);
  bool all_equal = true;
  bool any_diff = false;
  for (CameraId cam : a.rig().cameras()) {
    for (FrameIndex i : a.indices()) {
      all_equal = all_equal && pixels_equal(a.frame(cam, i), b.frame(cam, i));
      any_diff = any_diff || !pixels_equal(a.frame(cam, i), c.frame(cam, i));
    }
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("identical views differ only by brightness") {
  SynthConfig c = small_synth();
  c.view_transforms.clear();
  c.brightness = {{2, 1.0}, {3, 1.15}};
  const SequenceStore s = synthesize(c);
  for (FrameIndex i : s.indices()) {
    const auto base = s.frame(1, i).to_rgb8();
    CHECK(s.frame(2, i).to_rgb8() == base);
    const auto bright = s.frame(3, i).to_rgb8();
    int worst = 0;
    for (std::size_t p = 0; p < base.size(); ++p) {
      const double expected = std::min(255.0, base[p] * 1.15);
      worst = std::max(worst, int(std::ceil(std::abs(bright[p] - expected) - 1e-9)));
    }
    CHECK(worst <= 1);
  }
}

TEST_CASE("without objects every frame is the background") {
  SynthConfig c = small_synth();
  c.n_objects = 0;
  const SequenceStore s = synthesize(c);
  for (CameraId cam : s.rig().cameras()) {
    for (FrameIndex i : s.indices()) CHECK(pixels_equal(s.frame(cam, i), s.frame(cam, 0)));
  }
}

TEST_CASE("synthesis rejects views that share no area") {
  SynthConfig c = small_synth();
  c.view_transforms[3] = {1, 0, 0, 1, 500, 500};
  CHECK(code_of([&] { synthesize(c); }) == ErrorCode::NonOverlappingViews);
}

TEST_CASE("synthetic overlap zones bound the pixels the target also sees") {
  const SequenceStore s = synthesize(small_synth());
  // Target sees canvas [8, 40); camera 2 pixel u sits at u + 12.5, camera 3 at u + 5.5.
  auto zone_for = [](double tx, double ty) {
    Rect z{32, 32, 0, 0};
    for (int v = 0; v < 32; ++v) {
      for (int u = 0; u < 32; ++u) {
        const double x = u + 0.5 + tx;
        const double y = v + 0.5 + ty;
        if (x >= 8 && x < 40 && y >= 8 && y < 40) {
          z.x0 = std::min(z.x0, u);
          z.y0 = std::min(z.y0, v);
          z.x1 = std::max(z.x1, u + 1);
          z.y1 = std::max(z.y1, v + 1);
        }
      }
    }
    return z;
  };
  CHECK(s.rig().overlap_zone(2) == zone_for(12, 10));
  CHECK(s.rig().overlap_zone(3) == zone_for(5, 11));
  CHECK(s.rig().overlap_zone(2) == Rect{0, 0, 28, 30});
}

TEST_CASE("activity matches an independent moving-average background") {
  const SequenceStore s = synthesize(small_synth());
  const ActivityGate gate(s);
  const Rect z = s.rig().overlap_zone(2);
  const auto& frames = s.camera_frames(2);
  std::vector<double> bg;
  auto zone = [&](const Frame& f) {
    std::vector<double> out;
    for (int c = 0; c < 3; ++c)
      for (int y = z.y0; y < z.y1; ++y)
        for (int x = z.x0; x < z.x1; ++x) out.push_back((f.at(c, y, x) + 1.0) / 2.0);
    return out;
  };
  bg = zone(frames[0]);
  for (std::size_t p = 0; p < frames.size(); ++p) {
    const auto cur = zone(frames[p]);
    double diff = 0;
    for (std::size_t k = 0; k < cur.size(); ++k) diff += std::abs(cur[k] - bg[k]);
    CHECK(gate.activity(2, frames[p].index(), frames[p]) == doctest::Approx(diff / cur.size()).epsilon(1e-5));
    for (std::size_t k = 0; k < cur.size(); ++k) bg[k] = 0.95 * bg[k] + 0.05 * cur[k];
  }
}

TEST_CASE("gating removes static references and keeps moving ones") {
  SynthConfig still = small_synth();
  still.n_objects = 0;
  const SequenceStore quiet = synthesize(still);
  const ActivityGate quiet_gate(quiet);
  const auto t = make_task(quiet, 20, 3);
  CHECK(gate_references(t, quiet.rig(), quiet_gate, 0.01).references.empty());
  CHECK(gate_references(t, quiet.rig(), quiet_gate, 0.0).references.size() == 2);

  SynthConfig busy = small_synth();
  busy.n_objects = 3;
  busy.object_radius = 7;
  const SequenceStore moving = synthesize(busy);
  const ActivityGate gate(moving);
  std::size_t kept = 0;
  for (const auto& task : sample_tasks(moving, 1, Split::All)) {
    for (const Frame& ref : task.references) CHECK(gate.activity(ref.camera_id(), task.missing_index, ref) >= 0.0);
    kept += gate_references(task, moving.rig(), gate, 0.01).references.size();
  }
  CHECK(kept > 0);
}

TEST_CASE("raising the activity threshold never adds references") {
  const SequenceStore s = synthesize(small_synth());
  const ActivityGate gate(s);
  for (const auto& task : sample_tasks(s, 1, Split::All)) {
    std::size_t previous = task.references.size();
    for (double th : {0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 1.0}) {
      const std::size_t n = gate_references(task, s.rig(), gate, th).references.size();
      CHECK(n <= previous);
      previous = n;
    }
  }
}
