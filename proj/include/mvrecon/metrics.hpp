#pragma once

// Image quality metrics. Inputs are frames in [-1, 1]; both metrics work on
// [0, 1] values, per RGB channel, averaged over channels.

#include "mvrecon/core.hpp"

namespace mvrecon {

inline constexpr double kDefaultPsnrCap = 100.0;

// 10 log10(1 / MSE), capped; identical frames give exactly `cap`.
double psnr(const Frame& a, const Frame& b, double cap = kDefaultPsnrCap);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean SSIM over every fully contained Gaussian window. Throws
// DimensionMismatch or FrameTooSmall.
double ssim(const Frame& a, const Frame& b, const SsimParams& params = {});

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_taps(int size, double sigma);

}  // namespace mvrecon
