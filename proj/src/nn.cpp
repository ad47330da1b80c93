#include "mvrecon/nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mvrecon::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct Geometry {
  int channels, height, width, kernel, stride, padding, out_h, out_w;
};

// cols has (channels * k * k) rows and (out_h * out_w) columns.
template <typename T>
void im2col(const T* src, const Geometry& g, T* cols) {
  const int n = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = src + std::size_t(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + (std::size_t(c * g.kernel + ky) * g.kernel + kx) * n;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + std::size_t(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* line = plane + std::size_t(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? line[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds columns back into an image.
template <typename T>
void col2im(const T* cols, const Geometry& g, T* dst) {
  const int n = g.out_h * g.out_w;
  std::fill(dst, dst + std::size_t(g.channels) * g.height * g.width, T(0));
  for (int c = 0; c < g.channels; ++c) {
    T* plane = dst + std::size_t(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* row = cols + (std::size_t(c * g.kernel + ky) * g.kernel + kx) * n;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* line = plane + std::size_t(iy) * g.width;
          const T* src = row + std::size_t(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void init_gaussian(Param<T>& p, std::mt19937_64& rng, double mean, double stddev) {
  for (auto& v : p.value) v = static_cast<T>(mean + stddev * gaussian(rng));
  p.zero_grad();
}

}  // namespace

double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.height != b.height || a.width != b.width) throw std::invalid_argument("concat_channels: spatial mismatch");
  Tensor<T> out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.size());
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& joined, int first_channels, Tensor<T>& a, Tensor<T>& b) {
  a = Tensor<T>(first_channels, joined.height, joined.width);
  b = Tensor<T>(joined.channels - first_channels, joined.height, joined.width);
  std::copy(joined.data.begin(), joined.data.begin() + a.size(), a.data.begin());
  std::copy(joined.data.begin() + a.size(), joined.data.end(), b.data.begin());
}

// ---------------------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding),
      weight_(std::size_t(out_channels) * in_channels * kernel * kernel), bias_(out_channels) {}

template <typename T>
void Conv2d<T>::init(std::mt19937_64& rng, double stddev) {
  init_gaussian(weight_, rng, 0.0, stddev);
  std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  bias_.zero_grad();
}

template <typename T>
Tensor<T> Conv2d<T>::convolve(const Tensor<T>& x, std::vector<T>& cols) const {
  if (x.channels != in_) throw std::invalid_argument("Conv2d: channel mismatch");
  const int out_h = out_size(x.height);
  const int out_w = out_size(x.width);
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("Conv2d: input too small");
  const int rows = in_ * kernel_ * kernel_;
  const int n = out_h * out_w;
  cols.resize(std::size_t(rows) * n);
  im2col(x.data.data(), Geometry{in_, x.height, x.width, kernel_, stride_, padding_, out_h, out_w}, cols.data());
  Tensor<T> y(out_, out_h, out_w);
  MapMat<T> ym(y.data.data(), out_, n);
  ym.noalias() = ConstMapMat<T>(weight_.value.data(), out_, rows) * ConstMapMat<T>(cols.data(), rows, n);
  for (int o = 0; o < out_; ++o) ym.row(o).array() += bias_.value[o];
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = convolve(x, columns_);
  in_h_ = x.height;
  in_w_ = x.width;
  out_h_ = y.height;
  out_w_ = y.width;
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::apply(const Tensor<T>& x) const {
  std::vector<T> cols;
  return convolve(x, cols);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  const int rows = in_ * kernel_ * kernel_;
  const int n = out_h_ * out_w_;
  ConstMapMat<T> dy(grad_out.data.data(), out_, n);
  ConstMapMat<T> cols(columns_.data(), rows, n);
  MapMat<T>(weight_.grad.data(), out_, rows).noalias() += dy * cols.transpose();
  // Plain loop: Eigen's vectorized sum would order the additions by the
  // buffer's alignment and break run-to-run reproducibility.
  for (int o = 0; o < out_; ++o) {
    const T* row = grad_out.data.data() + std::size_t(o) * n;
    T acc = 0;
    for (int i = 0; i < n; ++i) acc += row[i];
    bias_.grad[o] += acc;
  }

  std::vector<T> dcols(std::size_t(rows) * n);
  MapMat<T>(dcols.data(), rows, n).noalias() = ConstMapMat<T>(weight_.value.data(), out_, rows).transpose() * dy;
  Tensor<T> dx(in_, in_h_, in_w_);
  col2im(dcols.data(), Geometry{in_, in_h_, in_w_, kernel_, stride_, padding_, out_h_, out_w_}, dx.data.data());
  return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int padding)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding),
      weight_(std::size_t(in_channels) * out_channels * kernel * kernel), bias_(out_channels) {}

template <typename T>
void ConvTranspose2d<T>::init(std::mt19937_64& rng, double stddev) {
  init_gaussian(weight_, rng, 0.0, stddev);
  std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  bias_.zero_grad();
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = apply(x);
  input_ = x;
  out_h_ = y.height;
  out_w_ = y.width;
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::apply(const Tensor<T>& x) const {
  if (x.channels != in_) throw std::invalid_argument("ConvTranspose2d: channel mismatch");
  const int out_h = (x.height - 1) * stride_ - 2 * padding_ + kernel_;
  const int out_w = (x.width - 1) * stride_ - 2 * padding_ + kernel_;
  const int rows = out_ * kernel_ * kernel_;
  const int n = x.height * x.width;
  std::vector<T> cols(std::size_t(rows) * n);
  MapMat<T>(cols.data(), rows, n).noalias() =
      ConstMapMat<T>(weight_.value.data(), in_, rows).transpose() * ConstMapMat<T>(x.data.data(), in_, n);
  Tensor<T> y(out_, out_h, out_w);
  col2im(cols.data(), Geometry{out_, out_h, out_w, kernel_, stride_, padding_, x.height, x.width}, y.data.data());
  const std::size_t plane = y.plane();
  for (int o = 0; o < out_; ++o) {
    T* p = y.data.data() + o * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += bias_.value[o];
  }
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& grad_out) {
  const int rows = out_ * kernel_ * kernel_;
  const int n = input_.height * input_.width;
  const std::size_t plane = grad_out.plane();
  for (int o = 0; o < out_; ++o) {
    const T* p = grad_out.data.data() + o * plane;
    T s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    bias_.grad[o] += s;
  }
  std::vector<T> dcols(std::size_t(rows) * n);
  im2col(grad_out.data.data(), Geometry{out_, out_h_, out_w_, kernel_, stride_, padding_, input_.height, input_.width},
         dcols.data());
  ConstMapMat<T> dc(dcols.data(), rows, n);
  ConstMapMat<T> xin(input_.data.data(), in_, n);
  MapMat<T>(weight_.grad.data(), in_, rows).noalias() += xin * dc.transpose();
  Tensor<T> dx(in_, input_.height, input_.width);
  MapMat<T>(dx.data.data(), in_, n).noalias() = ConstMapMat<T>(weight_.value.data(), in_, rows) * dc;
  return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
InstanceNorm<T>::InstanceNorm(int channels, double eps)
    : channels_(channels), eps_(eps), gamma_(channels), beta_(channels) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
}

template <typename T>
void InstanceNorm<T>::init(std::mt19937_64& rng, double stddev) {
  init_gaussian(gamma_, rng, 1.0, stddev);
  std::fill(beta_.value.begin(), beta_.value.end(), T(0));
  beta_.zero_grad();
}

namespace {

// Normalizes x per channel; optionally records x-hat and 1/sigma for backward.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const std::vector<T>& gamma, const std::vector<T>& beta, double eps,
                        Tensor<T>* normalized, std::vector<T>* inv_std) {
  const std::size_t plane = x.plane();
  if (normalized) *normalized = Tensor<T>(x.channels, x.height, x.width);
  if (inv_std) inv_std->assign(x.channels, T(0));
  Tensor<T> y(x.channels, x.height, x.width);
  for (int c = 0; c < x.channels; ++c) {
    const T* src = x.data.data() + c * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += src[i];
    mean /= double(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= double(plane);
    const double inv = 1.0 / std::sqrt(var + eps);
    if (inv_std) (*inv_std)[c] = static_cast<T>(inv);
    T* dst = y.data.data() + c * plane;
    T* xn = normalized ? normalized->data.data() + c * plane : nullptr;
    for (std::size_t i = 0; i < plane; ++i) {
      const T v = static_cast<T>((src[i] - mean) * inv);
      if (xn) xn[i] = v;
      dst[i] = gamma[c] * v + beta[c];
    }
  }
  return y;
}

}  // namespace

template <typename T>
Tensor<T> InstanceNorm<T>::forward(const Tensor<T>& x) {
  if (x.channels != channels_) throw std::invalid_argument("InstanceNorm: channel mismatch");
  return instance_norm(x, gamma_.value, beta_.value, eps_, &normalized_, &inv_std_);
}

template <typename T>
Tensor<T> InstanceNorm<T>::apply(const Tensor<T>& x) const {
  if (x.channels != channels_) throw std::invalid_argument("InstanceNorm: channel mismatch");
  return instance_norm<T>(x, gamma_.value, beta_.value, eps_, nullptr, nullptr);
}

template <typename T>
Tensor<T> InstanceNorm<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t plane = grad_out.plane();
  Tensor<T> dx(grad_out.channels, grad_out.height, grad_out.width);
  for (int c = 0; c < channels_; ++c) {
    const T* dy = grad_out.data.data() + c * plane;
    const T* xn = normalized_.data.data() + c * plane;
    double sum_dy = 0.0;
    double sum_dy_xn = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      sum_dy += dy[i];
      sum_dy_xn += double(dy[i]) * xn[i];
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xn);
    beta_.grad[c] += static_cast<T>(sum_dy);
    const double mean_dy = sum_dy / double(plane);
    const double mean_dy_xn = sum_dy_xn / double(plane);
    const double scale = double(gamma_.value[c]) * inv_std_[c];
    T* out = dx.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      out[i] = static_cast<T>(scale * (dy[i] - mean_dy - xn[i] * mean_dy_xn));
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> LeakyRelu<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return apply(x);
}

template <typename T>
Tensor<T> LeakyRelu<T>::apply(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : v * slope_;
  return y;
}

template <typename T>
Tensor<T> LeakyRelu<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(input_.data[i] > T(0))) dx.data[i] *= slope_;
  }
  return dx;
}

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x) {
  output_ = apply(x);
  return output_;
}

template <typename T>
Tensor<T> Tanh<T>::apply(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (auto& v : y.data) v = std::tanh(v);
  return y;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= T(1) - output_.data[i] * output_.data[i];
  return dx;
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, std::mt19937_64& rng) {
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
  mask_.resize(x.size());
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask_[i] = uniform01(rng) >= rate_ ? keep_scale : T(0);
    y.data[i] *= mask_[i];
  }
  return y;
}

template <typename T>
Tensor<T> Dropout<T>::apply(const Tensor<T>& x, std::mt19937_64& rng) const {
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
  Tensor<T> y = x;
  for (auto& v : y.data) v *= uniform01(rng) >= rate_ ? keep_scale : T(0);
  return y;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask_[i];
  return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
Adam<T>::Adam(std::vector<Param<T>*> params, double learning_rate, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.size(), T(0));
    v_.emplace_back(p->value.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  const T b1 = static_cast<T>(beta1_);
  const T b2 = static_cast<T>(beta2_);
  const T step = static_cast<T>(lr_ / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(eps_);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& value = params_[k]->value;
    const auto& grad = params_[k]->grad;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * grad[i];
      v[i] = b2 * v[i] + (T(1) - b2) * grad[i] * grad[i];
      value[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

#define MVRECON_INSTANTIATE(T)                                                              \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                \
  template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);           \
  template class Conv2d<T>;                                                                  \
  template class ConvTranspose2d<T>;                                                         \
  template class InstanceNorm<T>;                                                            \
  template class LeakyRelu<T>;                                                               \
  template class Tanh<T>;                                                                    \
  template class Dropout<T>;                                                                 \
  template class Adam<T>;

MVRECON_INSTANTIATE(float)
MVRECON_INSTANTIATE(double)

#undef MVRECON_INSTANTIATE

}  // namespace mvrecon::nn
