#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "mvrecon/core.hpp"

namespace mvrecon {

enum class Split { Train, Val, Test, All };
const char* split_name(Split split);

struct SplitConfig {
  double test_fraction = 0.2;
  double val_fraction = 0.1;  // carved from the end of the training portion
};

/// Aligned multi-camera frame sequences. Every camera holds a frame for every
/// index in `indices()`; the timeline is split contiguously into
/// train | val | test.
class SequenceStore {
 public:
  SequenceStore(CameraRig rig, std::map<CameraId, std::vector<Frame>> frames, SplitConfig split = {});

  const CameraRig& rig() const noexcept { return rig_; }
  const std::vector<FrameIndex>& indices() const noexcept { return indices_; }
  std::size_t frame_count() const noexcept { return indices_.size(); }
  bool contains(FrameIndex index) const;
  // Throws IndexMismatch when absent.
  const Frame& frame(CameraId camera, FrameIndex index) const;
  const std::vector<Frame>& camera_frames(CameraId camera) const;
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  Split split_of(FrameIndex index) const;
  std::vector<FrameIndex> split_indices(Split split) const;
  const SplitConfig& split_config() const noexcept { return split_; }

 private:
  std::size_t position(FrameIndex index) const;  // npos when absent

  CameraRig rig_;
  std::map<CameraId, std::vector<Frame>> frames_;
  std::vector<FrameIndex> indices_;
  SplitConfig split_;
  std::size_t train_end_ = 0;
  std::size_t val_end_ = 0;
  int height_ = 0;
  int width_ = 0;
};

// Reads per-camera frame directories (files named by zero-padded index, e.g.
// 000042.png) and aligns them on the target timeline: reference file index
// i + round(offset * fps) is synchronous with target index i. Indices without
// a frame in every camera are dropped.
SequenceStore ingest(const std::map<CameraId, std::filesystem::path>& camera_dirs, const CameraRig& rig,
                     SplitConfig split = {});

// Default layout: <root>/cam<id>/.
std::map<CameraId, std::filesystem::path> default_camera_dirs(const std::filesystem::path& root,
                                                              const CameraRig& rig);

// Writes the store back in ingest's raw layout, re-applying each camera's
// frame shift so that ingest(export) reproduces the store.
void export_frames(const SequenceStore& store, const std::filesystem::path& root);

// One task per center of `split` whose +-gap neighbours exist, with every
// reference camera attached and the target frame as ground truth. Throws
// GapTooLarge when no center qualifies.
std::vector<ReconstructionTask> sample_tasks(const SequenceStore& store, int gap, Split split);

// Builds the task for one center regardless of split.
ReconstructionTask make_task(const SequenceStore& store, FrameIndex missing_index, int gap);

/// Per-reference-camera running background of the overlap zone, an
/// exponential moving average over the camera's earlier frames.
class ActivityGate {
 public:
  static constexpr double kDefaultDecay = 0.95;

  explicit ActivityGate(const SequenceStore& store, double decay = kDefaultDecay);

  // Mean absolute difference, in [0, 1] pixel units, between `frame`'s overlap
  // zone and the background estimated from frames before `index`.
  double activity(CameraId camera, FrameIndex index, const Frame& frame) const;

 private:
  static constexpr std::size_t kCheckpointStride = 32;

  std::vector<float> zone_pixels(CameraId camera, const Frame& frame) const;
  std::vector<float> background_before(CameraId camera, std::size_t position) const;

  const SequenceStore* store_;
  double decay_;
  // checkpoints_[camera][k] = background before position k * stride.
  std::map<CameraId, std::vector<std::vector<float>>> checkpoints_;
};

// Keeps a reference only when its overlap-zone activity reaches
// `activity_threshold`; threshold 0 keeps every reference.
ReconstructionTask gate_references(ReconstructionTask task, const CameraRig& rig, const ActivityGate& gate,
                                   double activity_threshold);

// Maps view pixel (u, v) to canvas point (a*u + b*v + tx, c*u + d*v + ty).
struct ViewTransform {
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;
};

struct SynthConfig {
  std::vector<CameraId> cameras{1, 2, 3};
  CameraId target_camera = 1;
  std::map<CameraId, ViewTransform> view_transforms;  // missing: identity offset to canvas centre
  std::map<CameraId, double> brightness;              // missing: 1.0
  std::map<CameraId, double> offsets_seconds;         // recorded in the rig; synthesis is aligned
  double fps = 10.0;
  int resolution = 64;
  int canvas_size = 96;
  int n_objects = 3;
  double object_speed = 1.5;  // pixels per frame
  double object_radius = 8.0;
  int sequence_length = 300;
  std::uint64_t seed = 0;
  SplitConfig split;

  void validate() const;
};

// Renders moving discs over a static background on a shared canvas and views
// it through every camera's transform with per-camera brightness. Overlap
// zones are the bounding boxes of each reference view's pixels that the
// target camera also sees. Deterministic in `seed`; throws
// NonOverlappingViews when some pair of views shares no canvas area.
SequenceStore synthesize(const SynthConfig& config);

}  // namespace mvrecon
