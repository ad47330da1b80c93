#include <chrono>

#include "doctest.h"
#include "helpers.hpp"
#include "mvrecon/metrics.hpp"

using namespace mvrecon;
using testing::code_of;

namespace {

double oracle_psnr(const Frame& a, const Frame& b) {
  long double se = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) {
        const long double d = (a.at(c, y, x) - (long double)b.at(c, y, x)) / 2.0L;
        se += d * d;
      }
  const long double mse = se / (3.0L * a.height() * a.width());
  if (mse == 0) return 100.0;
  return std::min(100.0, double(10.0L * std::log10(1.0L / mse)));
}

// Direct 2-D Gaussian-window SSIM, no separability.
double oracle_ssim(const Frame& a, const Frame& b) {
  const int win = 11;
  const double sigma = 1.5;
  std::vector<double> w(win * win);
  double total = 0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - 5, dj = j - 5;
      w[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      total += w[i * win + j];
    }
  for (double& v : w) v /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double sum = 0;
  int count = 0;
  for (int c = 0; c < 3; ++c) {
    double channel = 0;
    int windows = 0;
    for (int y0 = 0; y0 + win <= a.height(); ++y0)
      for (int x0 = 0; x0 + win <= a.width(); ++x0) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double p = (a.at(c, y0 + i, x0 + j) + 1.0) / 2.0;
            const double q = (b.at(c, y0 + i, x0 + j) + 1.0) / 2.0;
            const double k = w[i * win + j];
            ma += k * p;
            mb += k * q;
            saa += k * p * p;
            sbb += k * q * q;
            sab += k * p * q;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        channel += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
    sum += channel / windows;
    ++count;
  }
  return sum / count;
}

}  // namespace

TEST_CASE("psnr and ssim agree with brute-force oracles") {
  std::mt19937_64 rng(11);
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 20; ++t) {
    const Frame a = testing::random_frame(rng, 16, 16);
    Frame b = testing::random_frame(rng, 16, 16);
    if (t % 2 == 0) {
      // Correlated pairs exercise the high-similarity regime too.
      std::vector<float> px(a.pixels().begin(), a.pixels().end());
      for (float& v : px) v = std::clamp(v + float(0.1 * (nn::uniform01(rng) - 0.5)), -1.0f, 1.0f);
      b = Frame(16, 16, px, 1, 0);
    }
    CHECK(std::abs(psnr(a, b) - oracle_psnr(a, b)) <= 1e-6);
    CHECK(std::abs(ssim(a, b) - oracle_ssim(a, b)) <= 1e-6);
    CHECK(psnr(a, a) == 100.0);
    CHECK(ssim(a, a) == 1.0);
  }
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
}

TEST_CASE("psnr of a constant offset") {
  const Frame a = Frame::filled(8, 8, 0.0f);
  const Frame b = Frame::filled(8, 8, 0.1f);
  // Offset 0.05 on the [0, 1] scale: MSE 0.0025.
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / 0.0025)).epsilon(1e-6));
  CHECK(psnr(a, Frame::filled(8, 8, 1.0f), 100.0) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-6));
  CHECK(psnr(a, b, 20.0) == 20.0);
}

TEST_CASE("ssim is symmetric and bounded") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 5; ++t) {
    const Frame a = testing::random_frame(rng, 24, 20);
    const Frame b = testing::random_frame(rng, 24, 20);
    CHECK(ssim(a, b) == ssim(b, a));
    CHECK(ssim(a, b) <= 1.0);
    CHECK(ssim(a, b) >= -1.0);
  }
}

TEST_CASE("metric argument errors") {
  CHECK(code_of([] { ssim(Frame::filled(10, 10, 0.0f), Frame::filled(10, 10, 0.0f)); }) == ErrorCode::FrameTooSmall);
  CHECK(code_of([] { ssim(Frame::filled(12, 12, 0.0f), Frame::filled(16, 16, 0.0f)); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([] { psnr(Frame::filled(12, 12, 0.0f), Frame::filled(16, 16, 0.0f)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("gaussian taps are normalized and symmetric") {
  const auto taps = gaussian_taps(11, 1.5);
  REQUIRE(taps.size() == 11);
  double total = 0;
  for (double v : taps) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 5; ++i) CHECK(taps[i] == doctest::Approx(taps[10 - i]).epsilon(1e-15));
  CHECK(taps[5] / taps[6] == doctest::Approx(std::exp(1.0 / (2 * 1.5 * 1.5))).epsilon(1e-12));
}
