#include "mvrecon/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace mvrecon {

Frame read_frame(const std::filesystem::path& path, CameraId camera_id, FrameIndex index, int resolution) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::UnreadableImage, "data.ingest", path.string() + ": " + e.what());
  }
  if (bgr.empty()) throw Error(ErrorCode::UnreadableImage, "data.ingest", path.string());
  if (bgr.rows != resolution || bgr.cols != resolution) {
    cv::resize(bgr, bgr, cv::Size(resolution, resolution), 0, 0, cv::INTER_AREA);
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (!rgb.isContinuous()) rgb = rgb.clone();
  return Frame::from_rgb8({rgb.data, rgb.total() * 3}, rgb.rows, rgb.cols, camera_id, index, path.string());
}

void write_rgb_png(const std::filesystem::path& path, int height, int width, std::span<const std::uint8_t> hwc) {
  cv::Mat rgb(height, width, CV_8UC3, const_cast<std::uint8_t*>(hwc.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    ok = cv::imwrite(path.string(), bgr);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::UnwritablePath, "image_io.write_png", path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::UnwritablePath, "image_io.write_png", path.string());
}

void write_frame_png(const std::filesystem::path& path, const Frame& frame) {
  const auto bytes = frame.to_rgb8();
  write_rgb_png(path, frame.height(), frame.width(), bytes);
}

}  // namespace mvrecon
