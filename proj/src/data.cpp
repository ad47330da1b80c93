#include "mvrecon/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "mvrecon/image_io.hpp"
#include "mvrecon/nn.hpp"

namespace mvrecon {

namespace fs = std::filesystem;

const char* split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::All: return "all";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// SequenceStore

SequenceStore::SequenceStore(CameraRig rig, std::map<CameraId, std::vector<Frame>> frames, SplitConfig split)
    : rig_(std::move(rig)), frames_(std::move(frames)), split_(split) {
  const char* where = "data.SequenceStore";
  if (!(split_.test_fraction >= 0.0 && split_.test_fraction < 1.0) ||
      !(split_.val_fraction >= 0.0 && split_.val_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, where, "split fractions must lie in [0, 1)");
  }
  for (CameraId camera : rig_.cameras()) {
    auto it = frames_.find(camera);
    if (it == frames_.end() || it->second.empty()) {
      throw Error(ErrorCode::EmptyCamera, where, "camera " + std::to_string(camera) + " has no frames");
    }
  }
  if (frames_.size() != rig_.cameras().size()) {
    throw Error(ErrorCode::InvalidArgument, where, "frames given for a camera outside the rig");
  }
  const auto& target = frames_.at(rig_.target_camera());
  height_ = target.front().height();
  width_ = target.front().width();
  for (const Frame& f : target) indices_.push_back(f.index());
  for (const auto& [camera, list] : frames_) {
    if (list.size() != indices_.size()) {
      throw Error(ErrorCode::IndexMismatch, where, "camera " + std::to_string(camera) + " is not aligned with the target");
    }
    for (std::size_t p = 0; p < list.size(); ++p) {
      const Frame& f = list[p];
      if (f.camera_id() != camera) {
        throw Error(ErrorCode::InvalidArgument, where, "frame filed under the wrong camera");
      }
      if (p > 0 && f.index() <= list[p - 1].index()) {
        throw Error(ErrorCode::IndexMismatch, where,
                    "frames of camera " + std::to_string(camera) + " are not strictly increasing");
      }
      if (f.index() != indices_[p]) {
        throw Error(ErrorCode::IndexMismatch, where, "camera " + std::to_string(camera) + " is not aligned with the target");
      }
      if (f.height() != height_ || f.width() != width_) {
        throw Error(ErrorCode::DimensionMismatch, where, "frame sizes differ across the store");
      }
    }
  }
  const auto n = static_cast<long long>(indices_.size());
  const long long n_test = std::llround(double(n) * split_.test_fraction);
  const long long n_trainval = n - n_test;
  const long long n_val = std::llround(double(n_trainval) * split_.val_fraction);
  val_end_ = static_cast<std::size_t>(n_trainval);
  train_end_ = static_cast<std::size_t>(n_trainval - n_val);
}

std::size_t SequenceStore::position(FrameIndex index) const {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), index);
  if (it == indices_.end() || *it != index) return std::size_t(-1);
  return static_cast<std::size_t>(it - indices_.begin());
}

bool SequenceStore::contains(FrameIndex index) const { return position(index) != std::size_t(-1); }

const Frame& SequenceStore::frame(CameraId camera, FrameIndex index) const {
  const std::size_t p = position(index);
  if (p == std::size_t(-1)) {
    throw Error(ErrorCode::IndexMismatch, "data.SequenceStore", "no frame at index " + std::to_string(index));
  }
  return camera_frames(camera)[p];
}

const std::vector<Frame>& SequenceStore::camera_frames(CameraId camera) const {
  auto it = frames_.find(camera);
  if (it == frames_.end()) {
    throw Error(ErrorCode::InvalidArgument, "data.SequenceStore", "unknown camera " + std::to_string(camera));
  }
  return it->second;
}

Split SequenceStore::split_of(FrameIndex index) const {
  const std::size_t p = position(index);
  if (p == std::size_t(-1)) {
    throw Error(ErrorCode::IndexMismatch, "data.SequenceStore", "no frame at index " + std::to_string(index));
  }
  if (p < train_end_) return Split::Train;
  if (p < val_end_) return Split::Val;
  return Split::Test;
}

std::vector<FrameIndex> SequenceStore::split_indices(Split split) const {
  std::size_t begin = 0;
  std::size_t end = indices_.size();
  switch (split) {
    case Split::Train: end = train_end_; break;
    case Split::Val: begin = train_end_; end = val_end_; break;
    case Split::Test: begin = val_end_; break;
    case Split::All: break;
  }
  return {indices_.begin() + begin, indices_.begin() + end};
}

// ---------------------------------------------------------------------------
// Ingest

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::map<FrameIndex, fs::path> list_frames(const fs::path& dir, CameraId camera) {
  const char* where = "data.ingest";
  std::map<FrameIndex, fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::EmptyCamera, where, "camera " + std::to_string(camera) + ": " + dir.string() + " is not a directory");
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    FrameIndex index = 0;
    auto [ptr, err] = std::from_chars(stem.data(), stem.data() + stem.size(), index);
    if (err != std::errc() || ptr != stem.data() + stem.size() || index < 0) continue;
    if (!out.emplace(index, entry.path()).second) {
      throw Error(ErrorCode::InvalidArgument, where, "duplicate frame index " + stem + " in " + dir.string());
    }
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptyCamera, where, "camera " + std::to_string(camera) + ": no frames in " + dir.string());
  }
  return out;
}

}  // namespace

std::map<CameraId, fs::path> default_camera_dirs(const fs::path& root, const CameraRig& rig) {
  std::map<CameraId, fs::path> dirs;
  for (CameraId c : rig.cameras()) dirs[c] = root / ("cam" + std::to_string(c));
  return dirs;
}

SequenceStore ingest(const std::map<CameraId, fs::path>& camera_dirs, const CameraRig& rig, SplitConfig split) {
  const char* where = "data.ingest";
  std::map<CameraId, std::map<FrameIndex, fs::path>> listed;
  for (CameraId camera : rig.cameras()) {
    auto it = camera_dirs.find(camera);
    if (it == camera_dirs.end()) {
      throw Error(ErrorCode::EmptyCamera, where, "no directory given for camera " + std::to_string(camera));
    }
    listed[camera] = list_frames(it->second, camera);
  }
  std::vector<FrameIndex> common;
  for (const auto& [file_index, path] : listed.at(rig.target_camera())) {
    bool complete = true;
    for (CameraId camera : rig.cameras()) {
      if (!listed[camera].count(file_index + rig.frame_shift(camera))) {
        complete = false;
        break;
      }
    }
    if (complete) common.push_back(file_index);
  }
  if (common.empty()) {
    throw Error(ErrorCode::EmptyCamera, where, "no target index has a synchronous frame in every camera");
  }
  std::map<CameraId, std::vector<Frame>> frames;
  for (CameraId camera : rig.cameras()) {
    auto& list = frames[camera];
    list.reserve(common.size());
    const FrameIndex shift = rig.frame_shift(camera);
    for (FrameIndex i : common) list.push_back(read_frame(listed[camera].at(i + shift), camera, i, rig.resolution()));
  }
  return SequenceStore(rig, std::move(frames), split);
}

void export_frames(const SequenceStore& store, const fs::path& root) {
  const CameraRig& rig = store.rig();
  for (CameraId camera : rig.cameras()) {
    const fs::path dir = root / ("cam" + std::to_string(camera));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::UnwritablePath, "data.export_frames", dir.string() + ": " + ec.message());
    const FrameIndex shift = rig.frame_shift(camera);
    for (const Frame& f : store.camera_frames(camera)) {
      const FrameIndex file_index = f.index() + shift;
      if (file_index < 0) {
        throw Error(ErrorCode::InvalidArgument, "data.export_frames", "negative file index after applying offset");
      }
      char name[32];
      std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(file_index));
      write_frame_png(dir / name, f);
    }
  }
}

// ---------------------------------------------------------------------------
// Task sampling

ReconstructionTask make_task(const SequenceStore& store, FrameIndex missing_index, int gap) {
  const char* where = "data.sample_tasks";
  if (gap < 1) throw Error(ErrorCode::InvalidArgument, where, "gap must be >= 1");
  if (!store.contains(missing_index)) {
    throw Error(ErrorCode::IndexMismatch, where, "no frame at index " + std::to_string(missing_index));
  }
  if (!store.contains(missing_index - gap) || !store.contains(missing_index + gap)) {
    throw Error(ErrorCode::GapTooLarge, where,
                "index " + std::to_string(missing_index) + " has no neighbours at distance " + std::to_string(gap));
  }
  const CameraRig& rig = store.rig();
  const CameraId target = rig.target_camera();
  ReconstructionTask task;
  task.missing_index = missing_index;
  task.gap = gap;
  task.past = store.frame(target, missing_index - gap);
  task.future = store.frame(target, missing_index + gap);
  for (CameraId ref : rig.reference_cameras()) task.references.push_back(store.frame(ref, missing_index));
  task.ground_truth = store.frame(target, missing_index);
  return task;
}

std::vector<ReconstructionTask> sample_tasks(const SequenceStore& store, int gap, Split split) {
  if (gap < 1) throw Error(ErrorCode::InvalidArgument, "data.sample_tasks", "gap must be >= 1");
  std::vector<ReconstructionTask> tasks;
  for (FrameIndex i : store.split_indices(split)) {
    if (store.contains(i - gap) && store.contains(i + gap)) tasks.push_back(make_task(store, i, gap));
  }
  if (tasks.empty()) {
    throw Error(ErrorCode::GapTooLarge, "data.sample_tasks",
                "no " + std::string(split_name(split)) + " center has neighbours at distance " + std::to_string(gap));
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// Activity gating

ActivityGate::ActivityGate(const SequenceStore& store, double decay) : store_(&store), decay_(decay) {
  if (!(decay >= 0.0 && decay < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "data.gate_references", "background decay must lie in [0, 1)");
  }
  for (CameraId camera : store.rig().reference_cameras()) {
    const auto& frames = store.camera_frames(camera);
    auto& saved = checkpoints_[camera];
    std::vector<float> background = zone_pixels(camera, frames.front());
    for (std::size_t p = 0; p < frames.size(); ++p) {
      if (p % kCheckpointStride == 0) saved.push_back(background);
      const auto zone = zone_pixels(camera, frames[p]);
      for (std::size_t k = 0; k < zone.size(); ++k) {
        background[k] = static_cast<float>(decay_ * background[k] + (1.0 - decay_) * zone[k]);
      }
    }
  }
}

std::vector<float> ActivityGate::zone_pixels(CameraId camera, const Frame& frame) const {
  const Rect& z = store_->rig().overlap_zone(camera);
  if (z.x1 > frame.width() || z.y1 > frame.height()) {
    throw Error(ErrorCode::DimensionMismatch, "data.gate_references", "overlap zone exceeds the frame");
  }
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(z.area()) * Frame::kChannels);
  for (int c = 0; c < Frame::kChannels; ++c) {
    for (int y = z.y0; y < z.y1; ++y) {
      for (int x = z.x0; x < z.x1; ++x) out.push_back(0.5f * (frame.at(c, y, x) + 1.0f));
    }
  }
  return out;
}

std::vector<float> ActivityGate::background_before(CameraId camera, std::size_t position) const {
  const auto& saved = checkpoints_.at(camera);
  const auto& frames = store_->camera_frames(camera);
  const std::size_t k = std::min(position / kCheckpointStride, saved.size() - 1);
  std::vector<float> background = saved[k];
  for (std::size_t p = k * kCheckpointStride; p < position && p < frames.size(); ++p) {
    const auto zone = zone_pixels(camera, frames[p]);
    for (std::size_t i = 0; i < zone.size(); ++i) {
      background[i] = static_cast<float>(decay_ * background[i] + (1.0 - decay_) * zone[i]);
    }
  }
  return background;
}

double ActivityGate::activity(CameraId camera, FrameIndex index, const Frame& frame) const {
  if (!checkpoints_.count(camera)) {
    throw Error(ErrorCode::InvalidArgument, "data.gate_references", "camera " + std::to_string(camera) + " is not a reference camera");
  }
  const auto& indices = store_->indices();
  const auto position = static_cast<std::size_t>(std::lower_bound(indices.begin(), indices.end(), index) - indices.begin());
  const auto background = background_before(camera, position);
  const auto zone = zone_pixels(camera, frame);
  double sum = 0.0;
  for (std::size_t i = 0; i < zone.size(); ++i) sum += std::abs(double(zone[i]) - background[i]);
  return sum / double(zone.size());
}

ReconstructionTask gate_references(ReconstructionTask task, const CameraRig& rig, const ActivityGate& gate,
                                   double activity_threshold) {
  if (activity_threshold <= 0.0) return task;
  std::vector<Frame> kept;
  for (Frame& ref : task.references) {
    if (!rig.has_camera(ref.camera_id())) {
      throw Error(ErrorCode::InvalidArgument, "data.gate_references", "reference from unknown camera");
    }
    if (gate.activity(ref.camera_id(), task.missing_index, ref) >= activity_threshold) kept.push_back(std::move(ref));
  }
  task.references = std::move(kept);
  return task;
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

struct Rgb {
  double r, g, b;
};

struct Disc {
  double x0, y0, vx, vy, radius;
  Rgb color;
};

struct StaticBlock {
  double x0, y0, x1, y1;
  Rgb color;
};

struct Box {
  double x0, y0, x1, y1;
};

// Triangle wave keeping a coordinate inside [lo, hi].
double bounce(double v, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0) return lo;
  double t = std::fmod(v - lo, 2 * span);
  if (t < 0) t += 2 * span;
  return lo + (t <= span ? t : 2 * span - t);
}

ViewTransform transform_for(const SynthConfig& cfg, CameraId camera) {
  auto it = cfg.view_transforms.find(camera);
  if (it != cfg.view_transforms.end()) return it->second;
  const double centre = (cfg.canvas_size - cfg.resolution) / 2.0;
  return ViewTransform{1, 0, 0, 1, centre, centre};
}

// Canvas point -> view pixel; false when the view does not see it.
bool project_into(const ViewTransform& t, int resolution, double x, double y) {
  const double det = t.a * t.d - t.b * t.c;
  const double dx = x - t.tx;
  const double dy = y - t.ty;
  const double u = (t.d * dx - t.b * dy) / det;
  const double v = (-t.c * dx + t.a * dy) / det;
  return u >= 0 && u < resolution && v >= 0 && v < resolution;
}

void to_canvas(const ViewTransform& t, double u, double v, double& x, double& y) {
  x = t.a * u + t.b * v + t.tx;
  y = t.c * u + t.d * v + t.ty;
}

Box view_bounds(const ViewTransform& t, int resolution) {
  Box b{1e300, 1e300, -1e300, -1e300};
  for (double u : {0.0, double(resolution)}) {
    for (double v : {0.0, double(resolution)}) {
      double x, y;
      to_canvas(t, u, v, x, y);
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  return b;
}

Rgb vivid_color(std::mt19937_64& rng) {
  // Fully saturated hue with one channel dark so objects stand out.
  const double h = nn::uniform01(rng) * 6.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double hi = 230.0;
  const double lo = 25.0;
  const double mid = lo + (hi - lo) * f;
  const double mid_r = hi - (hi - lo) * f;
  switch (sector) {
    case 0: return {hi, mid, lo};
    case 1: return {mid_r, hi, lo};
    case 2: return {lo, hi, mid};
    case 3: return {lo, mid_r, hi};
    case 4: return {mid, lo, hi};
    default: return {hi, lo, mid_r};
  }
}

}  // namespace

void SynthConfig::validate() const {
  const char* where = "data.synthesize";
  if (cameras.empty()) throw Error(ErrorCode::InvalidArgument, where, "need at least one camera");
  if (std::find(cameras.begin(), cameras.end(), target_camera) == cameras.end()) {
    throw Error(ErrorCode::InvalidArgument, where, "target camera is not among the cameras");
  }
  if (resolution < 8 || canvas_size < 8) throw Error(ErrorCode::InvalidArgument, where, "resolution and canvas must be >= 8");
  if (n_objects < 0) throw Error(ErrorCode::InvalidArgument, where, "n_objects must be >= 0");
  if (!(object_speed >= 0) || !(object_radius > 0)) {
    throw Error(ErrorCode::InvalidArgument, where, "object speed must be >= 0 and radius > 0");
  }
  if (sequence_length < 1) throw Error(ErrorCode::InvalidArgument, where, "sequence_length must be >= 1");
  for (const auto& [camera, b] : brightness) {
    if (!(b > 0)) throw Error(ErrorCode::InvalidArgument, where, "brightness must be positive");
  }
  for (CameraId camera : cameras) {
    const ViewTransform t = transform_for(*this, camera);
    if (std::abs(t.a * t.d - t.b * t.c) < 1e-12) {
      throw Error(ErrorCode::InvalidArgument, where, "view transform of camera " + std::to_string(camera) + " is singular");
    }
  }
}

SequenceStore synthesize(const SynthConfig& cfg) {
  cfg.validate();
  const char* where = "data.synthesize";
  const int res = cfg.resolution;

  std::map<CameraId, ViewTransform> views;
  for (CameraId camera : cfg.cameras) views[camera] = transform_for(cfg, camera);

  // Pairwise overlap, sampled at pixel centres.
  for (std::size_t i = 0; i < cfg.cameras.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.cameras.size(); ++j) {
      const ViewTransform& ti = views[cfg.cameras[i]];
      const ViewTransform& tj = views[cfg.cameras[j]];
      bool overlap = false;
      for (int v = 0; v < res && !overlap; ++v) {
        for (int u = 0; u < res && !overlap; ++u) {
          double x, y;
          to_canvas(ti, u + 0.5, v + 0.5, x, y);
          overlap = project_into(tj, res, x, y);
        }
      }
      if (!overlap) {
        throw Error(ErrorCode::NonOverlappingViews, where,
                    "cameras " + std::to_string(cfg.cameras[i]) + " and " + std::to_string(cfg.cameras[j]) +
                        " share no canvas area");
      }
    }
  }

  // Overlap zones in each reference camera's pixel grid.
  RigSettings rig_settings;
  rig_settings.cameras = cfg.cameras;
  rig_settings.target_camera = cfg.target_camera;
  rig_settings.offsets_seconds = cfg.offsets_seconds;
  rig_settings.fps = cfg.fps;
  rig_settings.resolution = res;
  const ViewTransform& target_view = views[cfg.target_camera];
  for (CameraId camera : cfg.cameras) {
    if (camera == cfg.target_camera) continue;
    Rect zone{res, res, 0, 0};
    for (int v = 0; v < res; ++v) {
      for (int u = 0; u < res; ++u) {
        double x, y;
        to_canvas(views[camera], u + 0.5, v + 0.5, x, y);
        if (!project_into(target_view, res, x, y)) continue;
        zone.x0 = std::min(zone.x0, u);
        zone.y0 = std::min(zone.y0, v);
        zone.x1 = std::max(zone.x1, u + 1);
        zone.y1 = std::max(zone.y1, v + 1);
      }
    }
    rig_settings.overlap_zones[camera] = zone;
  }
  CameraRig rig(rig_settings);

  // Scene: static background plus bouncing discs confined to the region all
  // views see, so motion stays inside every overlap zone.
  std::mt19937_64 rng(cfg.seed);
  const double canvas = cfg.canvas_size;
  const Rgb corner_a{60 + 80 * nn::uniform01(rng), 60 + 80 * nn::uniform01(rng), 60 + 80 * nn::uniform01(rng)};
  const Rgb corner_b{60 + 80 * nn::uniform01(rng), 60 + 80 * nn::uniform01(rng), 60 + 80 * nn::uniform01(rng)};
  std::vector<StaticBlock> blocks;
  for (int k = 0; k < 6; ++k) {
    const double w = canvas * (0.08 + 0.15 * nn::uniform01(rng));
    const double h = canvas * (0.08 + 0.15 * nn::uniform01(rng));
    const double x0 = (canvas - w) * nn::uniform01(rng);
    const double y0 = (canvas - h) * nn::uniform01(rng);
    const double grey = 40 + 150 * nn::uniform01(rng);
    blocks.push_back({x0, y0, x0 + w, y0 + h, {grey, grey * 0.9, grey * 0.8}});
  }

  Box motion{0, 0, canvas, canvas};
  for (const auto& [camera, t] : views) {
    const Box b = view_bounds(t, res);
    motion.x0 = std::max(motion.x0, b.x0);
    motion.y0 = std::max(motion.y0, b.y0);
    motion.x1 = std::min(motion.x1, b.x1);
    motion.y1 = std::min(motion.y1, b.y1);
  }
  const double margin = cfg.object_radius * 0.5;
  if (motion.x1 - motion.x0 > 2 * margin && motion.y1 - motion.y0 > 2 * margin) {
    motion = {motion.x0 + margin, motion.y0 + margin, motion.x1 - margin, motion.y1 - margin};
  }

  std::vector<Disc> discs;
  for (int k = 0; k < cfg.n_objects; ++k) {
    const double angle = 2.0 * 3.14159265358979323846 * nn::uniform01(rng);
    const double radius = cfg.object_radius * (0.8 + 0.4 * nn::uniform01(rng));
    discs.push_back({motion.x0 + (motion.x1 - motion.x0) * nn::uniform01(rng),
                     motion.y0 + (motion.y1 - motion.y0) * nn::uniform01(rng), cfg.object_speed * std::cos(angle),
                     cfg.object_speed * std::sin(angle), radius, vivid_color(rng)});
  }

  auto background = [&](double x, double y) {
    const double s = std::clamp((x + y) / (2 * canvas), 0.0, 1.0);
    Rgb c{corner_a.r * (1 - s) + corner_b.r * s, corner_a.g * (1 - s) + corner_b.g * s,
          corner_a.b * (1 - s) + corner_b.b * s};
    for (const auto& blk : blocks) {
      if (x >= blk.x0 && x < blk.x1 && y >= blk.y0 && y < blk.y1) c = blk.color;
    }
    return c;
  };

  std::map<CameraId, std::vector<Frame>> frames;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(res) * res * 3);
  std::vector<std::pair<double, double>> positions(discs.size());
  for (int t = 0; t < cfg.sequence_length; ++t) {
    for (std::size_t k = 0; k < discs.size(); ++k) {
      const Disc& d = discs[k];
      positions[k] = {bounce(d.x0 + d.vx * t, motion.x0, motion.x1), bounce(d.y0 + d.vy * t, motion.y0, motion.y1)};
    }
    for (CameraId camera : cfg.cameras) {
      const ViewTransform& view = views[camera];
      auto bit = cfg.brightness.find(camera);
      const double gain = bit == cfg.brightness.end() ? 1.0 : bit->second;
      for (int v = 0; v < res; ++v) {
        for (int u = 0; u < res; ++u) {
          double x, y;
          to_canvas(view, u + 0.5, v + 0.5, x, y);
          Rgb c = background(x, y);
          for (std::size_t k = 0; k < discs.size(); ++k) {
            const double dx = x - positions[k].first;
            const double dy = y - positions[k].second;
            if (dx * dx + dy * dy <= discs[k].radius * discs[k].radius) c = discs[k].color;
          }
          std::uint8_t* px = &rgb[(static_cast<std::size_t>(v) * res + u) * 3];
          px[0] = static_cast<std::uint8_t>(std::clamp(std::round(c.r * gain), 0.0, 255.0));
          px[1] = static_cast<std::uint8_t>(std::clamp(std::round(c.g * gain), 0.0, 255.0));
          px[2] = static_cast<std::uint8_t>(std::clamp(std::round(c.b * gain), 0.0, 255.0));
        }
      }
      frames[camera].push_back(Frame::from_rgb8(rgb, res, res, camera, t));
    }
  }
  return SequenceStore(std::move(rig), std::move(frames), cfg.split);
}

}  // namespace mvrecon
