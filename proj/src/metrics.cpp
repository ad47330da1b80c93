#include "mvrecon/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mvrecon {

namespace {

void check_shapes(const Frame& a, const Frame& b, const char* where) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, where, "empty frame");
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch, where,
                std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                    std::to_string(b.width()));
  }
}

}  // namespace

double psnr(const Frame& a, const Frame& b, double cap) {
  check_shapes(a, b, "metrics.psnr");
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = 0.5 * (double(pa[i]) - double(pb[i]));
    sum += d * d;
  }
  const double mse = sum / double(pa.size());
  if (mse == 0.0) return cap;
  return std::min(cap, -10.0 * std::log10(mse));
}

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(size);
  const double centre = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    taps[i] = std::exp(-(i - centre) * (i - centre) / (2 * sigma * sigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

double ssim(const Frame& a, const Frame& b, const SsimParams& params) {
  const char* where = "metrics.ssim";
  check_shapes(a, b, where);
  const int n = params.window;
  if (n < 1 || !(params.sigma > 0)) throw Error(ErrorCode::InvalidArgument, where, "bad window parameters");
  const int h = a.height();
  const int w = a.width();
  if (h < n || w < n) {
    throw Error(ErrorCode::FrameTooSmall, where, "frame smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");
  }
  const double c1 = params.k1 * params.k1;
  const double c2 = params.k2 * params.k2;
  const auto taps = gaussian_taps(n, params.sigma);
  const int oh = h - n + 1;
  const int ow = w - n + 1;

  // Separable filtering of the five moment images: rows first, then columns.
  std::vector<double> x(std::size_t(h) * w), y(std::size_t(h) * w);
  std::vector<double> rows(5 * std::size_t(h) * ow);
  double total = 0.0;
  for (int c = 0; c < Frame::kChannels; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        x[std::size_t(r) * w + col] = 0.5 * (double(a.at(c, r, col)) + 1.0);
        y[std::size_t(r) * w + col] = 0.5 * (double(b.at(c, r, col)) + 1.0);
      }
    }
    const std::size_t plane = std::size_t(h) * ow;
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < ow; ++col) {
        double s[5] = {0, 0, 0, 0, 0};
        for (int k = 0; k < n; ++k) {
          const double t = taps[k];
          const double xv = x[std::size_t(r) * w + col + k];
          const double yv = y[std::size_t(r) * w + col + k];
          s[0] += t * xv;
          s[1] += t * yv;
          s[2] += t * (xv * xv);
          s[3] += t * (yv * yv);
          s[4] += t * (xv * yv);
        }
        for (int m = 0; m < 5; ++m) rows[m * plane + std::size_t(r) * ow + col] = s[m];
      }
    }
    double channel_sum = 0.0;
    for (int r = 0; r < oh; ++r) {
      for (int col = 0; col < ow; ++col) {
        double s[5] = {0, 0, 0, 0, 0};
        for (int k = 0; k < n; ++k) {
          for (int m = 0; m < 5; ++m) s[m] += taps[k] * rows[m * plane + std::size_t(r + k) * ow + col];
        }
        const double mx = s[0], my = s[1];
        const double vx = s[2] - mx * mx;
        const double vy = s[3] - my * my;
        const double cxy = s[4] - mx * my;
        channel_sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
    total += channel_sum / (double(oh) * ow);
  }
  return total / Frame::kChannels;
}

}  // namespace mvrecon
