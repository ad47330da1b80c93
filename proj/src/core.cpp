#include "mvrecon/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mvrecon {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IndexMismatch: return "IndexMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidPixelValue: return "InvalidPixelValue";
    case ErrorCode::EmptyCamera: return "EmptyCamera";
    case ErrorCode::UnreadableImage: return "UnreadableImage";
    case ErrorCode::GapTooLarge: return "GapTooLarge";
    case ErrorCode::NonOverlappingViews: return "NonOverlappingViews";
    case ErrorCode::BadResolution: return "BadResolution";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::FrameTooSmall: return "FrameTooSmall";
    case ErrorCode::UnwritablePath: return "UnwritablePath";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CheckpointError: return "CheckpointError";
    case ErrorCode::GapNotCalibrated: return "GapNotCalibrated";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string where, const std::string& message)
    : std::runtime_error(where + ": " + std::string(error_code_name(code)) + ": " + message),
      code_(code),
      where_(std::move(where)),
      detail_(message) {}

std::uint8_t quantize_u8(float v) {
  const float scaled = std::round((v + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0f, 255.0f));
}

Frame::Frame(int height, int width, std::vector<float> planar, CameraId camera_id, FrameIndex index,
             std::string source_path)
    : height_(height), width_(width), camera_id_(camera_id), index_(index),
      source_path_(std::move(source_path)) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::DimensionMismatch, "core.Frame",
                "frame dimensions must be positive, got " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (planar.size() != static_cast<std::size_t>(kChannels) * height * width) {
    throw Error(ErrorCode::DimensionMismatch, "core.Frame",
                "pixel buffer holds " + std::to_string(planar.size()) + " values, expected " +
                    std::to_string(kChannels * height * width));
  }
  for (float v : planar) {
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw Error(ErrorCode::InvalidPixelValue, "core.Frame",
                  "pixel value " + std::to_string(v) + " outside [-1, 1]");
    }
  }
  pixels_ = std::make_shared<const std::vector<float>>(std::move(planar));
}

Frame Frame::from_rgb8(std::span<const std::uint8_t> hwc, int height, int width, CameraId camera_id,
                       FrameIndex index, std::string source_path) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (height <= 0 || width <= 0 || hwc.size() != plane * kChannels) {
    throw Error(ErrorCode::DimensionMismatch, "core.Frame", "RGB buffer size does not match dimensions");
  }
  std::vector<float> planar(plane * kChannels);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < kChannels; ++c) planar[c * plane + p] = normalize_u8(hwc[p * kChannels + c]);
  }
  return Frame(height, width, std::move(planar), camera_id, index, std::move(source_path));
}

std::vector<std::uint8_t> Frame::to_rgb8() const {
  const std::size_t plane = static_cast<std::size_t>(height_) * width_;
  std::vector<std::uint8_t> out(plane * kChannels);
  const auto& px = *pixels_;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < kChannels; ++c) out[p * kChannels + c] = quantize_u8(px[c * plane + p]);
  }
  return out;
}

Frame Frame::filled(int height, int width, float value, CameraId camera_id, FrameIndex index) {
  return Frame(height, width, std::vector<float>(static_cast<std::size_t>(kChannels) * height * width, value),
               camera_id, index);
}

std::span<const float> Frame::pixels() const noexcept {
  if (!pixels_) return {};
  return {pixels_->data(), pixels_->size()};
}

Frame Frame::relabeled(CameraId camera_id, FrameIndex index) const {
  Frame copy = *this;
  copy.camera_id_ = camera_id;
  copy.index_ = index;
  return copy;
}

bool pixels_equal(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) return false;
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  return std::equal(pa.begin(), pa.end(), pb.begin(), pb.end());
}

CameraRig::CameraRig(RigSettings settings) : settings_(std::move(settings)) {
  const char* where = "core.CameraRig";
  if (settings_.cameras.empty()) throw Error(ErrorCode::InvalidArgument, where, "rig needs at least one camera");
  std::set<CameraId> unique(settings_.cameras.begin(), settings_.cameras.end());
  if (unique.size() != settings_.cameras.size()) {
    throw Error(ErrorCode::InvalidArgument, where, "camera ids must be unique");
  }
  if (!unique.count(settings_.target_camera)) {
    throw Error(ErrorCode::InvalidArgument, where, "target camera is not part of the rig");
  }
  if (!(settings_.fps > 0.0) || !std::isfinite(settings_.fps)) {
    throw Error(ErrorCode::InvalidArgument, where, "fps must be positive");
  }
  if (settings_.resolution <= 0) throw Error(ErrorCode::InvalidArgument, where, "resolution must be positive");
  for (const auto& [camera, offset] : settings_.offsets_seconds) {
    if (!unique.count(camera)) {
      throw Error(ErrorCode::InvalidArgument, where, "offset given for unknown camera " + std::to_string(camera));
    }
    if (!std::isfinite(offset)) throw Error(ErrorCode::InvalidArgument, where, "offsets must be finite");
  }
  if (offset_seconds(settings_.target_camera) != 0.0) {
    throw Error(ErrorCode::InvalidArgument, where, "target camera offset must be 0");
  }
  const int res = settings_.resolution;
  for (CameraId camera : settings_.cameras) {
    if (camera == settings_.target_camera) continue;
    auto it = settings_.overlap_zones.find(camera);
    if (it == settings_.overlap_zones.end()) {
      settings_.overlap_zones[camera] = Rect{0, 0, res, res};
      continue;
    }
    const Rect& z = it->second;
    if (z.x0 < 0 || z.y0 < 0 || z.x1 > res || z.y1 > res || z.width() <= 0 || z.height() <= 0) {
      throw Error(ErrorCode::InvalidArgument, where,
                  "overlap zone of camera " + std::to_string(camera) + " must lie within the frame and have positive area");
    }
  }
  for (const auto& [camera, zone] : settings_.overlap_zones) {
    if (!unique.count(camera) || camera == settings_.target_camera) {
      throw Error(ErrorCode::InvalidArgument, where, "overlap zone given for non-reference camera " + std::to_string(camera));
    }
  }
}

std::vector<CameraId> CameraRig::reference_cameras() const {
  std::vector<CameraId> refs;
  for (CameraId c : settings_.cameras) {
    if (c != settings_.target_camera) refs.push_back(c);
  }
  std::sort(refs.begin(), refs.end());
  return refs;
}

double CameraRig::offset_seconds(CameraId camera) const {
  auto it = settings_.offsets_seconds.find(camera);
  return it == settings_.offsets_seconds.end() ? 0.0 : it->second;
}

FrameIndex CameraRig::frame_shift(CameraId camera) const {
  return static_cast<FrameIndex>(std::llround(offset_seconds(camera) * settings_.fps));
}

const Rect& CameraRig::overlap_zone(CameraId camera) const {
  auto it = settings_.overlap_zones.find(camera);
  if (it == settings_.overlap_zones.end()) {
    throw Error(ErrorCode::InvalidArgument, "core.CameraRig", "no overlap zone for camera " + std::to_string(camera));
  }
  return it->second;
}

bool CameraRig::has_camera(CameraId camera) const {
  return std::find(settings_.cameras.begin(), settings_.cameras.end(), camera) != settings_.cameras.end();
}

std::string reference_tag(CameraId camera) { return "ref_" + std::to_string(camera); }

bool is_intra_tag(const std::string& tag) { return tag == kPastTag || tag == kFutureTag; }

namespace {
int tag_rank(const std::string& tag, long& camera) {
  camera = 0;
  if (tag == kPastTag) return 0;
  if (tag == kFutureTag) return 1;
  if (tag.rfind("ref_", 0) == 0) {
    try {
      camera = std::stol(tag.substr(4));
    } catch (...) {
      camera = 0;
    }
    return 2;
  }
  return 3;
}
}  // namespace

bool tag_less(const std::string& a, const std::string& b) {
  long ca = 0;
  long cb = 0;
  const int ra = tag_rank(a, ca);
  const int rb = tag_rank(b, cb);
  if (ra != rb) return ra < rb;
  if (ca != cb) return ca < cb;
  return a < b;
}

void sort_tags(std::vector<std::string>& tags) { std::sort(tags.begin(), tags.end(), tag_less); }

std::vector<std::string> ReconstructionTask::source_tags() const {
  std::vector<std::string> tags;
  if (!past.empty()) tags.emplace_back(kPastTag);
  if (!future.empty()) tags.emplace_back(kFutureTag);
  for (const Frame& ref : references) tags.push_back(reference_tag(ref.camera_id()));
  sort_tags(tags);
  return tags;
}

ReconstructionTask validate_task(ReconstructionTask task, const CameraRig& rig) {
  const char* where = "core.validate_task";
  if (task.gap < 1) throw Error(ErrorCode::InvalidArgument, where, "gap must be >= 1");
  if (task.past.empty() || task.future.empty()) {
    throw Error(ErrorCode::InvalidArgument, where, "task needs both past and future frames");
  }
  const auto idx = [](FrameIndex v) { return std::to_string(v); };
  if (task.past.index() != task.missing_index - task.gap) {
    throw Error(ErrorCode::IndexMismatch, where,
                "past.index=" + idx(task.past.index()) + " but missing_index-gap=" + idx(task.missing_index - task.gap));
  }
  if (task.future.index() != task.missing_index + task.gap) {
    throw Error(ErrorCode::IndexMismatch, where,
                "future.index=" + idx(task.future.index()) + " but missing_index+gap=" + idx(task.missing_index + task.gap));
  }
  const Frame& shape = task.past;
  auto check_shape = [&](const Frame& f, const std::string& what) {
    if (!f.same_shape(shape)) {
      throw Error(ErrorCode::DimensionMismatch, where,
                  what + " is " + std::to_string(f.height()) + "x" + std::to_string(f.width()) + ", expected " +
                      std::to_string(shape.height()) + "x" + std::to_string(shape.width()));
    }
  };
  check_shape(task.future, "future frame");
  std::set<CameraId> seen;
  for (const Frame& ref : task.references) {
    const std::string name = "reference frame of camera " + std::to_string(ref.camera_id());
    if (!rig.has_camera(ref.camera_id()) || ref.camera_id() == rig.target_camera()) {
      throw Error(ErrorCode::InvalidArgument, where, name + " is not a reference camera of the rig");
    }
    if (!seen.insert(ref.camera_id()).second) {
      throw Error(ErrorCode::InvalidArgument, where, "duplicate " + name);
    }
    if (ref.index() != task.missing_index) {
      throw Error(ErrorCode::IndexMismatch, where,
                  name + " has aligned index " + idx(ref.index()) + ", expected " + idx(task.missing_index));
    }
    check_shape(ref, name);
  }
  if (task.ground_truth) {
    if (task.ground_truth->index() != task.missing_index) {
      throw Error(ErrorCode::IndexMismatch, where, "ground truth index does not match missing_index");
    }
    check_shape(*task.ground_truth, "ground truth");
  }
  return task;
}

void CandidateSet::add(std::string tag, Frame frame) {
  if (frame.empty()) throw Error(ErrorCode::InvalidArgument, "core.CandidateSet", "empty candidate frame");
  if (find(tag) != nullptr) {
    throw Error(ErrorCode::InvalidArgument, "core.CandidateSet", "duplicate source tag " + tag);
  }
  if (!candidates_.empty() && !candidates_.front().second.same_shape(frame)) {
    throw Error(ErrorCode::DimensionMismatch, "core.CandidateSet", "candidate " + tag + " differs in size");
  }
  candidates_.emplace_back(std::move(tag), std::move(frame));
}

const Frame* CandidateSet::find(const std::string& tag) const {
  for (const auto& [t, f] : candidates_) {
    if (t == tag) return &f;
  }
  return nullptr;
}

void FusionWeights::set(int gap, WeightVector weights) {
  const char* where = "core.FusionWeights";
  if (gap < 1) throw Error(ErrorCode::InvalidArgument, where, "gap must be >= 1");
  if (weights.empty()) throw Error(ErrorCode::InvalidArgument, where, "empty weight vector");
  std::set<std::string> tags;
  double sum = 0.0;
  for (const auto& [tag, w] : weights) {
    if (!tags.insert(tag).second) throw Error(ErrorCode::InvalidArgument, where, "duplicate tag " + tag);
    if (!(w >= 0.0 && w <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, where, "weight for " + tag + " outside [0, 1]");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw Error(ErrorCode::InvalidArgument, where,
                "weights for gap " + std::to_string(gap) + " sum to " + std::to_string(sum));
  }
  std::sort(weights.begin(), weights.end(), [](const auto& a, const auto& b) { return tag_less(a.first, b.first); });
  table_[gap] = std::move(weights);
}

const WeightVector& FusionWeights::at(int gap) const {
  auto it = table_.find(gap);
  if (it == table_.end()) {
    throw Error(ErrorCode::GapNotCalibrated, "fusion.fuse", "no weights for gap " + std::to_string(gap));
  }
  return it->second;
}

std::vector<int> FusionWeights::gaps() const {
  std::vector<int> out;
  for (const auto& [gap, w] : table_) out.push_back(gap);
  return out;
}

double FusionWeights::intra_mass(int gap) const {
  double mass = 0.0;
  for (const auto& [tag, w] : at(gap)) {
    if (is_intra_tag(tag)) mass += w;
  }
  return mass;
}

}  // namespace mvrecon
