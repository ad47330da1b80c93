#include "mvrecon/model.hpp"

#include <algorithm>

namespace mvrecon {

namespace {
constexpr double kInitStddev = 0.02;
constexpr int kKernel = 4;
}  // namespace

int GeneratorSpec::filters(int level) const { return base_filters * std::min(1 << std::min(level, 3), 8); }

std::set<int> GeneratorSpec::resolved_dropout_levels() const {
  if (dropout_levels) return *dropout_levels;
  std::set<int> levels;
  for (int l = 4; l <= depth - 2; ++l) levels.insert(l);
  return levels;
}

void GeneratorSpec::validate() const {
  const char* where = "model.build_generator";
  if (in_channels != 3 || out_channels != 3) {
    throw Error(ErrorCode::InvalidArgument, where, "generator maps RGB to RGB");
  }
  if (base_filters < 1) throw Error(ErrorCode::InvalidArgument, where, "base_filters must be >= 1");
  if (depth < 2 || depth > 12) throw Error(ErrorCode::InvalidArgument, where, "depth must lie in [2, 12]");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, where, "dropout_rate must lie in [0, 1)");
  }
  for (int l : resolved_dropout_levels()) {
    if (l < 1 || l >= depth - 1) {
      throw Error(ErrorCode::InvalidArgument, where,
                  "dropout level " + std::to_string(l) + " must be an intermediate decoder level");
    }
  }
}

void GeneratorSpec::check_resolution(int height, int width) const {
  const int factor = 1 << depth;
  if (height < factor || width < factor || height % factor != 0 || width % factor != 0) {
    throw Error(ErrorCode::BadResolution, "model.build_generator",
                std::to_string(height) + "x" + std::to_string(width) + " input is incompatible with depth " +
                    std::to_string(depth) + " (needs multiples of " + std::to_string(factor) + ")");
  }
}

int DiscriminatorSpec::output_size(int input_size) const {
  int s = input_size;
  for (int i = 0; i < n_layers; ++i) {
    if (s < 2) break;
    s = (s - 2) / 2 + 1;
  }
  s -= 2;
  if (input_size < 2 || s < 1) {
    throw Error(ErrorCode::BadResolution, "model.build_discriminator",
                "input of size " + std::to_string(input_size) + " is too small for " + std::to_string(n_layers) +
                    " layers");
  }
  return s;
}

int DiscriminatorSpec::receptive_field() const {
  int rf = 1;
  rf = rf + (kKernel - 1);  // final stride-1 conv
  rf = rf + (kKernel - 1);  // stride-1 conv before it
  for (int i = 0; i < n_layers; ++i) rf = rf * 2 + (kKernel - 2);
  return rf;
}

void DiscriminatorSpec::validate() const {
  const char* where = "model.build_discriminator";
  if (in_channels != 6) throw Error(ErrorCode::InvalidArgument, where, "discriminator takes a 6-channel pair");
  if (base_filters < 1) throw Error(ErrorCode::InvalidArgument, where, "base_filters must be >= 1");
  if (n_layers < 1 || n_layers > 8) throw Error(ErrorCode::InvalidArgument, where, "n_layers must lie in [1, 8]");
}

template <typename T>
nn::Tensor<T> to_tensor(const Frame& frame) {
  nn::Tensor<T> t(frame.channels(), frame.height(), frame.width());
  const auto px = frame.pixels();
  std::copy(px.begin(), px.end(), t.data.begin());
  return t;
}

template <typename T>
Frame to_frame(const nn::Tensor<T>& tensor, CameraId camera_id, FrameIndex index) {
  if (tensor.channels != Frame::kChannels) {
    throw Error(ErrorCode::DimensionMismatch, "model.to_frame", "tensor is not RGB");
  }
  std::vector<float> px(tensor.data.begin(), tensor.data.end());
  return Frame(tensor.height, tensor.width, std::move(px), camera_id, index);
}

// ---------------------------------------------------------------------------

template <typename T>
Generator<T>::Generator(GeneratorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const int d = spec_.depth;
  const auto dropout = spec_.resolved_dropout_levels();
  levels_.reserve(d);
  for (int l = 0; l < d; ++l) {
    const int down_in = l == 0 ? spec_.in_channels : spec_.filters(l - 1);
    const int down_out = spec_.filters(l);
    const int up_in = l == d - 1 ? down_out : 2 * down_out;
    const int up_out = l == 0 ? spec_.out_channels : spec_.filters(l - 1);
    Level level{
        .down_conv = nn::Conv2d<T>(down_in, down_out, kKernel, 2, 1),
        .up_conv = nn::ConvTranspose2d<T>(up_in, up_out, kKernel, 2, 1),
    };
    if (l > 0 && l < d - 1) level.down_norm.emplace(down_out);
    if (l > 0) level.up_norm.emplace(up_out);
    if (dropout.count(l)) level.dropout.emplace(spec_.dropout_rate);
    levels_.push_back(std::move(level));
  }
  init(0);
}

template <typename T>
void Generator<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& level : levels_) {
    level.down_conv.init(rng, kInitStddev);
    if (level.down_norm) level.down_norm->init(rng, kInitStddev);
    level.up_conv.init(rng, kInitStddev);
    if (level.up_norm) level.up_norm->init(rng, kInitStddev);
  }
  noise_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
}

template <typename T>
void Generator<T>::set_skip_enabled(int level, bool enabled) {
  if (level < 1 || level >= spec_.depth) {
    throw Error(ErrorCode::InvalidArgument, "model.Generator", "skip connections exist on levels 1..depth-1");
  }
  levels_[level].skip_enabled = enabled;
}

template <typename T>
nn::Tensor<T> Generator<T>::forward(const nn::Tensor<T>& x) {
  spec_.check_resolution(x.height, x.width);
  if (x.channels != spec_.in_channels) {
    throw Error(ErrorCode::DimensionMismatch, "model.Generator", "unexpected input channel count");
  }
  const int d = spec_.depth;
  encoded_.resize(d + 1);
  encoded_[0] = x;
  for (int l = 0; l < d; ++l) {
    Level& level = levels_[l];
    nn::Tensor<T> h = l == 0 ? level.down_conv.forward(encoded_[0])
                             : level.down_conv.forward(level.down_act.forward(encoded_[l]));
    if (level.down_norm) h = level.down_norm->forward(h);
    encoded_[l + 1] = std::move(h);
  }
  nn::Tensor<T> u = encoded_[d];
  for (int l = d - 1; l >= 0; --l) {
    Level& level = levels_[l];
    nn::Tensor<T> y = level.up_conv.forward(level.up_act.forward(u));
    if (l == 0) return out_act_.forward(y);
    y = level.up_norm->forward(y);
    if (level.dropout) y = level.dropout->forward(y, noise_);
    if (level.skip_enabled) {
      u = nn::concat_channels(encoded_[l], y);
    } else {
      const nn::Tensor<T>& e = encoded_[l];
      u = nn::concat_channels(nn::Tensor<T>(e.channels, e.height, e.width), y);
    }
  }
  return u;  // unreachable: level 0 returns
}

template <typename T>
nn::Tensor<T> Generator<T>::infer(const nn::Tensor<T>& x, std::uint64_t noise_seed) const {
  spec_.check_resolution(x.height, x.width);
  if (x.channels != spec_.in_channels) {
    throw Error(ErrorCode::DimensionMismatch, "model.Generator", "unexpected input channel count");
  }
  std::mt19937_64 noise(noise_seed);
  const int d = spec_.depth;
  std::vector<nn::Tensor<T>> encoded(d + 1);
  encoded[0] = x;
  for (int l = 0; l < d; ++l) {
    const Level& level = levels_[l];
    nn::Tensor<T> h = l == 0 ? level.down_conv.apply(encoded[0])
                             : level.down_conv.apply(level.down_act.apply(encoded[l]));
    if (level.down_norm) h = level.down_norm->apply(h);
    encoded[l + 1] = std::move(h);
  }
  nn::Tensor<T> u = std::move(encoded[d]);
  for (int l = d - 1; l >= 0; --l) {
    const Level& level = levels_[l];
    nn::Tensor<T> y = level.up_conv.apply(level.up_act.apply(u));
    if (l == 0) return out_act_.apply(y);
    y = level.up_norm->apply(y);
    if (level.dropout) y = level.dropout->apply(y, noise);
    const nn::Tensor<T>& e = encoded[l];
    u = level.skip_enabled ? nn::concat_channels(e, y)
                           : nn::concat_channels(nn::Tensor<T>(e.channels, e.height, e.width), y);
  }
  return u;
}

template <typename T>
nn::Tensor<T> Generator<T>::backward(const nn::Tensor<T>& grad_out) {
  const int d = spec_.depth;
  std::vector<nn::Tensor<T>> enc_grad(d + 1);
  nn::Tensor<T> g = out_act_.backward(grad_out);
  for (int l = 0; l < d; ++l) {
    Level& level = levels_[l];
    if (l > 0) {
      if (level.dropout) g = level.dropout->backward(g);
      g = level.up_norm->backward(g);
    }
    g = level.up_act.backward(level.up_conv.backward(g));
    if (l == d - 1) {
      enc_grad[d] = std::move(g);
      break;
    }
    nn::Tensor<T> skip;
    nn::Tensor<T> rest;
    nn::split_channels(g, spec_.filters(l), skip, rest);
    if (levels_[l + 1].skip_enabled) {
      enc_grad[l + 1] = std::move(skip);
    } else {
      enc_grad[l + 1] = nn::Tensor<T>(skip.channels, skip.height, skip.width);
    }
    g = std::move(rest);
  }
  for (int l = d - 1; l >= 0; --l) {
    Level& level = levels_[l];
    nn::Tensor<T> h = enc_grad[l + 1];
    if (level.down_norm) h = level.down_norm->backward(h);
    h = level.down_conv.backward(h);
    if (l == 0) return h;
    h = level.down_act.backward(h);
    auto& acc = enc_grad[l];
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += h.data[i];
  }
  return {};
}

template <typename T>
std::vector<std::pair<std::string, nn::Param<T>*>> Generator<T>::named_params() {
  std::vector<std::pair<std::string, nn::Param<T>*>> out;
  auto add = [&](const std::string& prefix, std::vector<nn::Param<T>*> ps, const char* a, const char* b) {
    out.emplace_back(prefix + a, ps[0]);
    out.emplace_back(prefix + b, ps[1]);
  };
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    Level& level = levels_[l];
    const std::string p = "level" + std::to_string(l) + ".";
    add(p + "down_conv.", level.down_conv.params(), "weight", "bias");
    if (level.down_norm) add(p + "down_norm.", level.down_norm->params(), "gamma", "beta");
    add(p + "up_conv.", level.up_conv.params(), "weight", "bias");
    if (level.up_norm) add(p + "up_norm.", level.up_norm->params(), "gamma", "beta");
  }
  return out;
}

template <typename T>
std::vector<nn::Param<T>*> Generator<T>::params() {
  std::vector<nn::Param<T>*> out;
  for (auto& [name, p] : named_params()) out.push_back(p);
  return out;
}

template <typename T>
std::size_t Generator<T>::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, p] : const_cast<Generator*>(this)->named_params()) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------------------

template <typename T>
Discriminator<T>::Discriminator(DiscriminatorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  condition_channels_ = spec_.in_channels / 2;
  const int nf = spec_.base_filters;
  auto width = [nf](int j) { return nf * std::min(1 << std::min(j, 3), 8); };
  const bool use_norm = spec_.norm == DiscriminatorNorm::Instance;

  blocks_.push_back(Block{nn::Conv2d<T>(spec_.in_channels, nf, kKernel, 2, 1), std::nullopt, nn::LeakyRelu<T>(T(0.2))});
  for (int j = 1; j < spec_.n_layers; ++j) {
    Block b{nn::Conv2d<T>(width(j - 1), width(j), kKernel, 2, 1), std::nullopt, nn::LeakyRelu<T>(T(0.2))};
    if (use_norm) b.norm.emplace(width(j));
    blocks_.push_back(std::move(b));
  }
  const int n = spec_.n_layers;
  Block last{nn::Conv2d<T>(width(n - 1), width(n), kKernel, 1, 1), std::nullopt, nn::LeakyRelu<T>(T(0.2))};
  if (use_norm) last.norm.emplace(width(n));
  blocks_.push_back(std::move(last));
  blocks_.push_back(Block{nn::Conv2d<T>(width(n), 1, kKernel, 1, 1), std::nullopt, std::nullopt});
  init(0);
}

template <typename T>
void Discriminator<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& b : blocks_) {
    b.conv.init(rng, kInitStddev);
    if (b.norm) b.norm->init(rng, kInitStddev);
  }
}

template <typename T>
nn::Tensor<T> Discriminator<T>::forward(const nn::Tensor<T>& condition, const nn::Tensor<T>& candidate) {
  if (!condition.same_shape(candidate) || condition.channels != condition_channels_) {
    throw Error(ErrorCode::DimensionMismatch, "model.Discriminator", "condition and candidate must match");
  }
  if (condition.height != condition.width) {
    throw Error(ErrorCode::BadResolution, "model.Discriminator", "discriminator expects square frames");
  }
  spec_.output_size(condition.height);
  nn::Tensor<T> h = nn::concat_channels(condition, candidate);
  for (auto& b : blocks_) {
    h = b.conv.forward(h);
    if (b.norm) h = b.norm->forward(h);
    if (b.act) h = b.act->forward(h);
  }
  return h;
}

template <typename T>
nn::Tensor<T> Discriminator<T>::apply(const nn::Tensor<T>& condition, const nn::Tensor<T>& candidate) const {
  if (!condition.same_shape(candidate) || condition.channels != condition_channels_) {
    throw Error(ErrorCode::DimensionMismatch, "model.Discriminator", "condition and candidate must match");
  }
  if (condition.height != condition.width) {
    throw Error(ErrorCode::BadResolution, "model.Discriminator", "discriminator expects square frames");
  }
  spec_.output_size(condition.height);
  nn::Tensor<T> h = nn::concat_channels(condition, candidate);
  for (const auto& b : blocks_) {
    h = b.conv.apply(h);
    if (b.norm) h = b.norm->apply(h);
    if (b.act) h = b.act->apply(h);
  }
  return h;
}

template <typename T>
nn::Tensor<T> Discriminator<T>::backward(const nn::Tensor<T>& grad_map) {
  nn::Tensor<T> g = grad_map;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    if (it->act) g = it->act->backward(g);
    if (it->norm) g = it->norm->backward(g);
    g = it->conv.backward(g);
  }
  nn::Tensor<T> cond_grad;
  nn::Tensor<T> cand_grad;
  nn::split_channels(g, condition_channels_, cond_grad, cand_grad);
  return cand_grad;
}

template <typename T>
std::vector<std::pair<std::string, nn::Param<T>*>> Discriminator<T>::named_params() {
  std::vector<std::pair<std::string, nn::Param<T>*>> out;
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const std::string p = "block" + std::to_string(j) + ".";
    auto conv = blocks_[j].conv.params();
    out.emplace_back(p + "conv.weight", conv[0]);
    out.emplace_back(p + "conv.bias", conv[1]);
    if (blocks_[j].norm) {
      auto norm = blocks_[j].norm->params();
      out.emplace_back(p + "norm.gamma", norm[0]);
      out.emplace_back(p + "norm.beta", norm[1]);
    }
  }
  return out;
}

template <typename T>
std::vector<nn::Param<T>*> Discriminator<T>::params() {
  std::vector<nn::Param<T>*> out;
  for (auto& [name, p] : named_params()) out.push_back(p);
  return out;
}

template <typename T>
std::size_t Discriminator<T>::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, p] : const_cast<Discriminator*>(this)->named_params()) n += p->value.size();
  return n;
}

template nn::Tensor<float> to_tensor<float>(const Frame&);
template nn::Tensor<double> to_tensor<double>(const Frame&);
template Frame to_frame<float>(const nn::Tensor<float>&, CameraId, FrameIndex);
template Frame to_frame<double>(const nn::Tensor<double>&, CameraId, FrameIndex);
template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace mvrecon
