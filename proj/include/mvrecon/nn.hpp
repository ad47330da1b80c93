#pragma once

// Minimal single-sample (C x H x W) tensor and the layers the generator and
// discriminator are built from. Every layer caches what its backward pass
// needs during forward, so each instance may appear once per graph.
//
// Instantiated for float (training, inference) and double (gradient checks).

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mvrecon::nn {

template <typename T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w, T fill = T(0)) : channels(c), height(h), width(w), data(std::size_t(c) * h * w, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return std::size_t(height) * width; }
  T& at(int c, int y, int x) { return data[(std::size_t(c) * height + y) * width + x]; }
  const T& at(int c, int y, int x) const { return data[(std::size_t(c) * height + y) * width + x]; }
  bool same_shape(const Tensor& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
// Splits a gradient of concat_channels(a, b) back into its two parts.
template <typename T>
void split_channels(const Tensor<T>& joined, int first_channels, Tensor<T>& a, Tensor<T>& b);

template <typename T>
struct Param {
  std::vector<T> value;
  std::vector<T> grad;

  explicit Param(std::size_t n = 0) : value(n, T(0)), grad(n, T(0)) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Deterministic across standard libraries, unlike std::normal_distribution.
double gaussian(std::mt19937_64& rng);
double uniform01(std::mt19937_64& rng);

/// 2-D convolution, square kernel, zero padding.
template <typename T>
class Conv2d {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);
  // Forward pass without caching; safe to call concurrently.
  Tensor<T> apply(const Tensor<T>& x) const;
  void init(std::mt19937_64& rng, double stddev);
  std::vector<Param<T>*> params() { return {&weight_, &bias_}; }
  int out_size(int in) const { return (in + 2 * padding_ - kernel_) / stride_ + 1; }

 private:
  Tensor<T> convolve(const Tensor<T>& x, std::vector<T>& cols) const;

  int in_, out_, kernel_, stride_, padding_;
  Param<T> weight_;  // out x (in * k * k)
  Param<T> bias_;
  std::vector<T> columns_;
  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
};

/// Transposed convolution (fractionally strided), the adjoint of Conv2d with
/// the same geometry.
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int padding);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);
  Tensor<T> apply(const Tensor<T>& x) const;
  void init(std::mt19937_64& rng, double stddev);
  std::vector<Param<T>*> params() { return {&weight_, &bias_}; }

 private:
  int in_, out_, kernel_, stride_, padding_;
  Param<T> weight_;  // in x (out * k * k)
  Param<T> bias_;
  Tensor<T> input_;
  int out_h_ = 0, out_w_ = 0;
};

/// Per-sample, per-channel normalization with learned scale and shift.
template <typename T>
class InstanceNorm {
 public:
  explicit InstanceNorm(int channels, double eps = 1e-5);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);
  Tensor<T> apply(const Tensor<T>& x) const;
  void init(std::mt19937_64& rng, double stddev);
  std::vector<Param<T>*> params() { return {&gamma_, &beta_}; }

 private:
  int channels_;
  double eps_;
  Param<T> gamma_;
  Param<T> beta_;
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
};

// slope = 0 gives ReLU.
template <typename T>
class LeakyRelu {
 public:
  explicit LeakyRelu(T slope) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  T slope_;
  Tensor<T> input_;
};

template <typename T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  Tensor<T> output_;
};

/// Inverted dropout; the mask is drawn from the caller's generator.
template <typename T>
class Dropout {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  Tensor<T> forward(const Tensor<T>& x, std::mt19937_64& rng);
  Tensor<T> apply(const Tensor<T>& x, std::mt19937_64& rng) const;
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  double rate_;
  std::vector<T> mask_;
};

/// Adam with bias correction over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, double learning_rate, double beta1, double beta2, double eps = 1e-8);
  void step();
  void zero_grad();
  long steps_taken() const noexcept { return t_; }

 private:
  std::vector<Param<T>*> params_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace mvrecon::nn
