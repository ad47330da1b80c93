#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mvrecon/core.hpp"
#include "mvrecon/data.hpp"
#include "mvrecon/nn.hpp"
#include "mvrecon/training.hpp"

namespace testing {

using namespace mvrecon;

inline Frame random_frame(std::mt19937_64& rng, int h, int w, CameraId cam = 1, FrameIndex index = 0) {
  std::vector<float> px(std::size_t(3) * h * w);
  for (float& v : px) v = float(2.0 * nn::uniform01(rng) - 1.0);
  return Frame(h, w, std::move(px), cam, index);
}

// Frame whose pixels are a deterministic function of (camera, index).
inline Frame patterned_frame(int size, CameraId cam, FrameIndex index) {
  std::vector<float> px(std::size_t(3) * size * size);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = float(std::sin(0.37 * double(i) + 1.3 * cam + 0.11 * index));
  return Frame(size, size, std::move(px), cam, index);
}

// n aligned frames per camera on indices 0..n-1.
inline SequenceStore patterned_store(const std::vector<CameraId>& cameras, int n, int size = 16,
                                     SplitConfig split = {}) {
  RigSettings rs;
  rs.cameras = cameras;
  rs.target_camera = cameras.front();
  rs.resolution = size;
  std::map<CameraId, std::vector<Frame>> frames;
  for (CameraId c : cameras) {
    for (int i = 0; i < n; ++i) frames[c].push_back(patterned_frame(size, c, i));
  }
  return SequenceStore(CameraRig(rs), std::move(frames), split);
}

// Candidate for `oracle_tag` is the ground truth; every other tag returns its
// conditioning frame.
class OracleProvider : public CandidateProvider {
 public:
  OracleProvider(std::vector<std::string> tags, std::string oracle_tag)
      : tags_(std::move(tags)), oracle_(std::move(oracle_tag)) {}
  bool has(const std::string& tag) const override {
    return std::find(tags_.begin(), tags_.end(), tag) != tags_.end();
  }
  std::vector<std::string> tags() const override { return tags_; }
  Frame generate(const std::string& tag, const Frame& condition, const ReconstructionTask& task) const override {
    if (tag == oracle_) return task.ground_truth->relabeled(task.past.camera_id(), task.missing_index);
    return condition.relabeled(task.past.camera_id(), task.missing_index);
  }

 private:
  std::vector<std::string> tags_;
  std::string oracle_;
};

// Code of the Error thrown by fn, or 0 when it returns normally.
inline ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode(0);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mvrecon_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
