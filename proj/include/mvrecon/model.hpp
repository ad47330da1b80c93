#pragma once

// U-Net generator and patch-level discriminator.
//
// Generator (depth d, filters f_l = base * min(2^l, 8)):
//   encoder level l:  [LeakyReLU 0.2] -> Conv 4x4/2 -> [InstanceNorm]
//   decoder level l:  ReLU -> ConvT 4x4/2 -> InstanceNorm -> [Dropout]
//                     then concatenated with the encoder input of level l
//   outermost decoder ends in tanh; the innermost encoder has no norm.
// Dropout stays active at inference and is the generator's noise source.
//
// Discriminator (n layers): Conv 4x4/2 + LeakyReLU, (n-1) x [Conv 4x4/2,
// [norm], LeakyReLU], Conv 4x4/1, [norm], LeakyReLU, Conv 4x4/1 -> 1 channel of
// logits. Norm is off by default: instance statistics span the whole image
// and would make every cell depend on every pixel. With the defaults a
// 256x256 pair yields a 30x30 map and each cell sees a 70x70 window.

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mvrecon/core.hpp"
#include "mvrecon/nn.hpp"

namespace mvrecon {

struct GeneratorSpec {
  int in_channels = 3;
  int out_channels = 3;
  int base_filters = 64;
  int depth = 8;
  // Decoder levels (0 = outermost) with dropout. Unset means the levels whose
  // encoder and decoder both run at 8 * base_filters, excluding the innermost.
  std::optional<std::set<int>> dropout_levels;
  double dropout_rate = 0.5;

  int filters(int level) const;
  std::set<int> resolved_dropout_levels() const;
  // Throws BadResolution unless height and width are multiples of 2^depth.
  void check_resolution(int height, int width) const;
  void validate() const;
};

enum class DiscriminatorNorm { None, Instance };

struct DiscriminatorSpec {
  int in_channels = 6;
  int base_filters = 64;
  int n_layers = 3;
  DiscriminatorNorm norm = DiscriminatorNorm::None;

  // Side length of the realism map for a square input; throws BadResolution
  // when the input is too small to produce one.
  int output_size(int input_size) const;
  int receptive_field() const;
  void validate() const;
};

template <typename T>
nn::Tensor<T> to_tensor(const Frame& frame);
// Values must already lie in [-1, 1].
template <typename T>
Frame to_frame(const nn::Tensor<T>& tensor, CameraId camera_id, FrameIndex index);

template <typename T>
class Generator {
 public:
  explicit Generator(GeneratorSpec spec);

  const GeneratorSpec& spec() const noexcept { return spec_; }
  // Zero-mean Gaussian weights (sd 0.02); norm scales ~ N(1, 0.02).
  void init(std::uint64_t seed);
  void reseed_noise(std::uint64_t seed) { noise_.seed(seed); }

  nn::Tensor<T> forward(const nn::Tensor<T>& x);
  // Accumulates parameter gradients; returns the gradient w.r.t. the input.
  nn::Tensor<T> backward(const nn::Tensor<T>& grad_out);
  // Cache-free forward pass with its own noise stream; safe to call
  // concurrently on a shared generator.
  nn::Tensor<T> infer(const nn::Tensor<T>& x, std::uint64_t noise_seed) const;

  // Probe hook: a disabled skip feeds zeros in place of the encoder activation.
  void set_skip_enabled(int level, bool enabled);

  std::vector<std::pair<std::string, nn::Param<T>*>> named_params();
  std::vector<nn::Param<T>*> params();
  std::size_t parameter_count() const;

 private:
  struct Level {
    nn::LeakyRelu<T> down_act{T(0.2)};
    nn::Conv2d<T> down_conv;
    std::optional<nn::InstanceNorm<T>> down_norm{};
    nn::LeakyRelu<T> up_act{T(0)};
    nn::ConvTranspose2d<T> up_conv;
    std::optional<nn::InstanceNorm<T>> up_norm{};
    std::optional<nn::Dropout<T>> dropout{};
    bool skip_enabled = true;
  };

  GeneratorSpec spec_;
  std::vector<Level> levels_;
  nn::Tanh<T> out_act_;
  std::vector<nn::Tensor<T>> encoded_;  // encoded_[l] = input of level l; encoded_[depth] = bottleneck
  std::mt19937_64 noise_{0};
};

template <typename T>
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorSpec spec);

  const DiscriminatorSpec& spec() const noexcept { return spec_; }
  void init(std::uint64_t seed);

  // Logit map for a (conditioning, candidate) pair.
  nn::Tensor<T> forward(const nn::Tensor<T>& condition, const nn::Tensor<T>& candidate);
  nn::Tensor<T> apply(const nn::Tensor<T>& condition, const nn::Tensor<T>& candidate) const;
  // Accumulates parameter gradients; returns the gradient w.r.t. the candidate.
  nn::Tensor<T> backward(const nn::Tensor<T>& grad_map);

  std::vector<std::pair<std::string, nn::Param<T>*>> named_params();
  std::vector<nn::Param<T>*> params();
  std::size_t parameter_count() const;

 private:
  struct Block {
    nn::Conv2d<T> conv;
    std::optional<nn::InstanceNorm<T>> norm;
    std::optional<nn::LeakyRelu<T>> act;
  };

  DiscriminatorSpec spec_;
  std::vector<Block> blocks_;
  int condition_channels_ = 3;
};

}  // namespace mvrecon
