#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "mvrecon/core.hpp"

namespace mvrecon {

// Reads a PNG/JPEG as RGB and resizes it to resolution x resolution when the
// stored size differs (area interpolation). Throws UnreadableImage.
Frame read_frame(const std::filesystem::path& path, CameraId camera_id, FrameIndex index, int resolution);

// Writes a frame as 8-bit RGB PNG. Throws UnwritablePath.
void write_frame_png(const std::filesystem::path& path, const Frame& frame);
void write_rgb_png(const std::filesystem::path& path, int height, int width, std::span<const std::uint8_t> hwc);

}  // namespace mvrecon
