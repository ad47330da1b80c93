#pragma once

// Domain types shared by every module: frames, the camera rig, reconstruction
// tasks, candidate sets and fusion weight tables. All of them are immutable
// once built and validate their invariants on construction.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvrecon/error.hpp"

namespace mvrecon {

using CameraId = int;
using FrameIndex = std::int64_t;

// 8-bit <-> [-1, 1] conversion. This is the single conversion point between
// stored images and the network pixel domain.
inline float normalize_u8(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }
std::uint8_t quantize_u8(float v);

/// An RGB image in the [-1, 1] domain, stored planar (C x H x W), tagged with
/// the camera it came from and its position on the (aligned) timeline.
///
/// Pixel storage is shared between copies, so frames are cheap to pass by
/// value.
class Frame {
 public:
  static constexpr int kChannels = 3;

  Frame() = default;
  Frame(int height, int width, std::vector<float> planar, CameraId camera_id, FrameIndex index,
        std::string source_path = {});

  // `hwc` is interleaved 8-bit RGB, height * width * 3 bytes.
  static Frame from_rgb8(std::span<const std::uint8_t> hwc, int height, int width,
                         CameraId camera_id, FrameIndex index, std::string source_path = {});
  std::vector<std::uint8_t> to_rgb8() const;

  // Constant-colour frame, mostly for tests and probes.
  static Frame filled(int height, int width, float value, CameraId camera_id = 0,
                      FrameIndex index = 0);

  bool empty() const noexcept { return !pixels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return kChannels; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(kChannels) * height_ * width_; }
  CameraId camera_id() const noexcept { return camera_id_; }
  FrameIndex index() const noexcept { return index_; }
  const std::string& source_path() const noexcept { return source_path_; }

  std::span<const float> pixels() const noexcept;
  float at(int c, int y, int x) const { return (*pixels_)[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }

  bool same_shape(const Frame& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }
  // Same pixels, new timeline identity.
  Frame relabeled(CameraId camera_id, FrameIndex index) const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::shared_ptr<const std::vector<float>> pixels_;
  CameraId camera_id_ = 0;
  FrameIndex index_ = 0;
  std::string source_path_;
};

// Bit-identical pixel content and shape.
bool pixels_equal(const Frame& a, const Frame& b);

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  long area() const noexcept { return static_cast<long>(width()) * height(); }
  bool operator==(const Rect&) const = default;
};

struct RigSettings {
  std::vector<CameraId> cameras;  // target included
  CameraId target_camera = 1;
  std::map<CameraId, double> offsets_seconds;  // missing entries are 0
  double fps = 10.0;
  std::map<CameraId, Rect> overlap_zones;  // one per reference camera
  int resolution = 256;
};

/// Camera set with temporal offsets relative to the target camera and the
/// static overlap zone of every reference camera.
class CameraRig {
 public:
  explicit CameraRig(RigSettings settings);

  int n_cameras() const noexcept { return static_cast<int>(settings_.cameras.size()); }
  const std::vector<CameraId>& cameras() const noexcept { return settings_.cameras; }
  std::vector<CameraId> reference_cameras() const;
  CameraId target_camera() const noexcept { return settings_.target_camera; }
  double fps() const noexcept { return settings_.fps; }
  int resolution() const noexcept { return settings_.resolution; }
  double offset_seconds(CameraId camera) const;
  // round(offset * fps): the file index of camera `camera` that is synchronous
  // with target index i is i + frame_shift(camera).
  FrameIndex frame_shift(CameraId camera) const;
  const Rect& overlap_zone(CameraId camera) const;
  bool has_camera(CameraId camera) const;
  const RigSettings& settings() const noexcept { return settings_; }

 private:
  RigSettings settings_;
};

// Source tags name the conditioning stream a candidate came from.
inline constexpr const char* kPastTag = "past";
inline constexpr const char* kFutureTag = "future";
std::string reference_tag(CameraId camera);
bool is_intra_tag(const std::string& tag);
// Canonical ordering: past, future, then references by camera id.
bool tag_less(const std::string& a, const std::string& b);
void sort_tags(std::vector<std::string>& tags);

struct ReconstructionTask {
  FrameIndex missing_index = 0;
  int gap = 1;
  Frame past;
  Frame future;
  std::vector<Frame> references;  // one per retained reference camera
  std::optional<Frame> ground_truth;

  // Tags of every conditioning source present, in canonical order.
  std::vector<std::string> source_tags() const;
};

// Returns the task unchanged when consistent with `rig`; throws IndexMismatch
// or DimensionMismatch otherwise.
ReconstructionTask validate_task(ReconstructionTask task, const CameraRig& rig);

/// Per-source reconstructions of one missing frame.
class CandidateSet {
 public:
  explicit CandidateSet(int gap) : gap_(gap) {}

  void add(std::string tag, Frame frame);
  int gap() const noexcept { return gap_; }
  bool empty() const noexcept { return candidates_.empty(); }
  std::size_t size() const noexcept { return candidates_.size(); }
  const std::vector<std::pair<std::string, Frame>>& candidates() const noexcept { return candidates_; }
  const Frame* find(const std::string& tag) const;

 private:
  int gap_;
  std::vector<std::pair<std::string, Frame>> candidates_;
};

using WeightVector = std::vector<std::pair<std::string, double>>;

/// Per-gap convex weights over source tags.
class FusionWeights {
 public:
  static constexpr double kSumTolerance = 1e-9;

  // Throws InvalidArgument unless entries are non-negative, tags unique and
  // the vector sums to one.
  void set(int gap, WeightVector weights);
  bool has_gap(int gap) const { return table_.count(gap) != 0; }
  const WeightVector& at(int gap) const;
  std::vector<int> gaps() const;
  const std::map<int, WeightVector>& table() const noexcept { return table_; }

  // Mass on intra-camera (past + future) tags for a gap.
  double intra_mass(int gap) const;

 private:
  std::map<int, WeightVector> table_;
};

}  // namespace mvrecon
