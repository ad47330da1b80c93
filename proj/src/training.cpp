#include "mvrecon/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "mvrecon/util.hpp"

namespace mvrecon {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
void check_same(const nn::Tensor<T>& a, const nn::Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "training.gan_losses", std::string(what) + " shapes differ");
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void TrainConfig::validate() const {
  const char* where = "training.train_source";
  if (!(lambda_l1 >= 0)) throw Error(ErrorCode::InvalidArgument, where, "lambda_l1 must be >= 0");
  if (!(learning_rate > 0)) throw Error(ErrorCode::InvalidArgument, where, "learning_rate must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw Error(ErrorCode::InvalidArgument, where, "Adam betas must lie in [0, 1)");
  }
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, where, "batch_size must be >= 1");
  if (steps < 0) throw Error(ErrorCode::InvalidArgument, where, "steps must be >= 0");
  for (int k : gap_schedule) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, where, "gap_schedule entries must be >= 1");
  }
}

template <typename T>
GanLosses gan_losses(const nn::Tensor<T>& d_real, const nn::Tensor<T>& d_fake, const nn::Tensor<T>& fake,
                     const nn::Tensor<T>& target, double lambda_l1) {
  check_same(d_real, d_fake, "realism map");
  check_same(fake, target, "frame");
  if (d_real.size() == 0 || fake.size() == 0) throw Error(ErrorCode::InvalidArgument, "training.gan_losses", "empty input");
  double real_term = 0, fake_term = 0, adv = 0, l1 = 0;
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    real_term += softplus(-double(d_real.data[i]));
    fake_term += softplus(double(d_fake.data[i]));
    adv += softplus(-double(d_fake.data[i]));
  }
  const double n = double(d_real.size());
  for (std::size_t i = 0; i < fake.size(); ++i) l1 += std::abs(double(fake.data[i]) - double(target.data[i]));
  GanLosses out;
  out.d_loss = 0.5 * (real_term / n + fake_term / n);
  out.l1 = l1 / double(fake.size());
  out.g_loss = adv / n + lambda_l1 * out.l1;
  if (!std::isfinite(out.d_loss) || !std::isfinite(out.g_loss) || !std::isfinite(out.l1)) {
    throw Error(ErrorCode::NonFiniteLoss, "training.gan_losses", "loss is not finite");
  }
  return out;
}

GanLosses gan_losses(const nn::Tensor<float>& d_real, const nn::Tensor<float>& d_fake, const Frame& fake,
                     const Frame& target, double lambda_l1) {
  return gan_losses(d_real, d_fake, to_tensor<float>(fake), to_tensor<float>(target), lambda_l1);
}

namespace {

// Gradient of the generator objective w.r.t. the fake image, given the
// discriminator's logits on it. `scale` divides both terms (batch averaging).
template <typename T>
nn::Tensor<T> generator_output_grad(Discriminator<T>& discriminator, const nn::Tensor<T>& map, const nn::Tensor<T>& fake,
                                    const nn::Tensor<T>& target, double lambda_l1, double scale) {
  nn::Tensor<T> grad_map(map.channels, map.height, map.width);
  const double n = double(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) grad_map.data[i] = T(-sigmoid(-double(map.data[i])) / n * scale);
  nn::Tensor<T> grad = discriminator.backward(grad_map);
  const double p = double(fake.size());
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const double d = double(fake.data[i]) - double(target.data[i]);
    const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    grad.data[i] += T(lambda_l1 * s / p * scale);
  }
  return grad;
}

template <typename T>
void zero_all(const std::vector<nn::Param<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace

template <typename T>
double generator_loss_and_gradients(Generator<T>& generator, Discriminator<T>& discriminator,
                                    const nn::Tensor<T>& condition, const nn::Tensor<T>& target, double lambda_l1,
                                    std::uint64_t noise_seed) {
  zero_all(generator.params());
  zero_all(discriminator.params());
  generator.reseed_noise(noise_seed);
  const nn::Tensor<T> fake = generator.forward(condition);
  const nn::Tensor<T> map = discriminator.forward(condition, fake);
  double adv = 0, l1 = 0;
  for (T v : map.data) adv += softplus(-double(v));
  for (std::size_t i = 0; i < fake.size(); ++i) l1 += std::abs(double(fake.data[i]) - double(target.data[i]));
  const double loss = adv / double(map.size()) + lambda_l1 * l1 / double(fake.size());
  generator.backward(generator_output_grad(discriminator, map, fake, target, lambda_l1, 1.0));
  return loss;
}

// ---------------------------------------------------------------------------

GanTrainer::GanTrainer(const GeneratorSpec& generator_spec, const DiscriminatorSpec& discriminator_spec,
                       const TrainConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      generator_(std::make_shared<Generator<float>>(generator_spec)),
      discriminator_(discriminator_spec),
      g_opt_({}, config.learning_rate, config.adam_beta1, config.adam_beta2),
      d_opt_({}, config.learning_rate, config.adam_beta1, config.adam_beta2) {
  config_.validate();
  generator_->init(mix_seed(seed, 1));
  discriminator_.init(mix_seed(seed, 2));
  g_opt_ = nn::Adam<float>(generator_->params(), config.learning_rate, config.adam_beta1, config.adam_beta2);
  d_opt_ = nn::Adam<float>(discriminator_.params(), config.learning_rate, config.adam_beta1, config.adam_beta2);
}

std::uint64_t GanTrainer::noise_seed(std::size_t sample) const {
  return mix_seed(mix_seed(seed_, 3), std::uint64_t(steps_) * 1024 + sample);
}

double GanTrainer::d_step(const std::vector<const TrainingPair*>& batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptySplit, "training.train_source", "empty batch");
  const double scale = 1.0 / double(batch.size());
  Generator<float>& g = *generator_;
  double d_loss = 0;
  fakes_.assign(batch.size(), {});
  d_opt_.zero_grad();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const TrainingPair& pair = *batch[b];
    g.reseed_noise(noise_seed(b));
    fakes_[b] = g.forward(pair.condition);
    const nn::Tensor<float> real_map = discriminator_.forward(pair.condition, pair.target);
    nn::Tensor<float> grad(real_map.channels, real_map.height, real_map.width);
    const std::size_t n = real_map.size();
    for (std::size_t i = 0; i < n; ++i) grad.data[i] = float(-0.5 * sigmoid(-double(real_map.data[i])) / double(n) * scale);
    discriminator_.backward(grad);
    const nn::Tensor<float> fake_map = discriminator_.forward(pair.condition, fakes_[b]);
    for (std::size_t i = 0; i < n; ++i) grad.data[i] = float(0.5 * sigmoid(double(fake_map.data[i])) / double(n) * scale);
    discriminator_.backward(grad);
    d_loss += scale * gan_losses(real_map, fake_map, fakes_[b], pair.target, config_.lambda_l1).d_loss;
  }
  d_opt_.step();
  return d_loss;
}

std::pair<double, double> GanTrainer::g_step(const std::vector<const TrainingPair*>& batch) {
  if (fakes_.size() != batch.size()) {
    throw Error(ErrorCode::InvalidArgument, "training.train_source", "g_step needs a preceding d_step on the same batch");
  }
  const double scale = 1.0 / double(batch.size());
  Generator<float>& g = *generator_;
  double g_loss = 0;
  double l1 = 0;
  // The discriminator gradients computed here are discarded.
  g_opt_.zero_grad();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const TrainingPair& pair = *batch[b];
    if (batch.size() > 1) {
      // Re-run with the same noise to restore this sample's activations.
      g.reseed_noise(noise_seed(b));
      fakes_[b] = g.forward(pair.condition);
    }
    const nn::Tensor<float> map = discriminator_.forward(pair.condition, fakes_[b]);
    const GanLosses losses = gan_losses(map, map, fakes_[b], pair.target, config_.lambda_l1);
    g_loss += scale * losses.g_loss;
    l1 += scale * losses.l1;
    g.backward(generator_output_grad(discriminator_, map, fakes_[b], pair.target, config_.lambda_l1, scale));
  }
  g_opt_.step();
  d_opt_.zero_grad();
  fakes_.clear();
  ++steps_;
  return {g_loss, l1};
}

LossRecord GanTrainer::step(const std::vector<const TrainingPair*>& batch) {
  LossRecord record;
  record.step = steps_;
  record.d_loss = d_step(batch);
  std::tie(record.g_loss, record.l1) = g_step(batch);
  return record;
}

// ---------------------------------------------------------------------------

PairSampler::PairSampler(const SequenceStore& store, const std::string& tag, const std::vector<int>& gap_schedule) {
  const char* where = "training.train_source";
  const CameraRig& rig = store.rig();
  const auto train = store.split_indices(Split::Train);
  if (train.empty()) throw Error(ErrorCode::EmptySplit, where, "train split is empty");
  auto in_train = [&](FrameIndex i) { return std::binary_search(train.begin(), train.end(), i); };
  if (is_intra_tag(tag)) {
    condition_camera = rig.target_camera();
    direction = tag == kPastTag ? -1 : 1;
    std::set<int> unique(gap_schedule.begin(), gap_schedule.end());
    for (int k : unique) {
      std::vector<FrameIndex> c;
      for (FrameIndex i : train) {
        if (in_train(i + direction * k)) c.push_back(i);
      }
      if (!c.empty()) {
        gaps.push_back(k);
        centers.push_back(std::move(c));
      }
    }
    if (gaps.empty()) throw Error(ErrorCode::EmptySplit, where, "no train pair for source " + tag + " at any scheduled gap");
  } else {
    condition_camera = -1;
    for (CameraId c : rig.reference_cameras()) {
      if (reference_tag(c) == tag) condition_camera = c;
    }
    if (condition_camera < 0) throw Error(ErrorCode::InvalidArgument, where, "source " + tag + " is not in the rig");
    gaps.push_back(0);
    centers.push_back(train);
  }
}

std::size_t PairSampler::pair_count() const {
  std::size_t n = 0;
  for (const auto& c : centers) n += c.size();
  return n;
}

std::pair<FrameIndex, FrameIndex> PairSampler::draw(std::mt19937_64& rng) const {
  const std::size_t g = gaps.size() == 1 ? 0 : std::size_t(nn::uniform01(rng) * double(gaps.size()));
  const auto& c = centers[g];
  const FrameIndex target = c.size() == 1 ? c[0] : c[std::size_t(nn::uniform01(rng) * double(c.size()))];
  return {target + direction * gaps[g], target};
}

TrainResult train_source(const std::string& tag, const SequenceStore& store, const GeneratorSpec& generator_spec,
                         const DiscriminatorSpec& discriminator_spec, const TrainConfig& config,
                         const ProgressFn& progress) {
  const char* where = "training.train_source";
  config.validate();
  generator_spec.check_resolution(store.height(), store.width());
  discriminator_spec.output_size(std::min(store.height(), store.width()));
  const PairSampler sampler(store, tag, config.gap_schedule);
  const CameraId target_camera = store.rig().target_camera();

  GanTrainer trainer(generator_spec, discriminator_spec, config, mix_seed(config.seed, tag));
  std::mt19937_64 rng(mix_seed(mix_seed(config.seed, tag), 4));
  TrainResult result;
  result.tag = tag;
  result.history.reserve(std::size_t(config.steps));
  std::vector<TrainingPair> pairs(std::size_t(config.batch_size));
  std::vector<const TrainingPair*> batch;
  for (auto& p : pairs) batch.push_back(&p);
  for (long s = 0; s < config.steps; ++s) {
    for (auto& pair : pairs) {
      const auto [condition, target] = sampler.draw(rng);
      pair.condition = to_tensor<float>(store.frame(sampler.condition_camera, condition));
      pair.target = to_tensor<float>(store.frame(target_camera, target));
    }
    LossRecord record;
    try {
      record = trainer.step(batch);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteLoss) throw;
      throw Error(ErrorCode::NonFiniteLoss, where, "source " + tag + ", step " + std::to_string(s) + ": " + e.detail());
    }
    result.history.push_back(record);
    if (progress) progress(tag, record);
  }
  result.generator = trainer.share_generator();
  return result;
}

std::vector<std::string> bank_tags(const CameraRig& rig) {
  std::vector<std::string> tags{kPastTag, kFutureTag};
  for (CameraId c : rig.reference_cameras()) tags.push_back(reference_tag(c));
  return tags;
}

BankTraining train_bank(const SequenceStore& store, const GeneratorSpec& generator_spec,
                        const DiscriminatorSpec& discriminator_spec, const TrainConfig& config, int threads,
                        const ProgressFn& progress) {
  return train_bank(store, bank_tags(store.rig()), generator_spec, discriminator_spec, config, threads, progress);
}

BankTraining train_bank(const SequenceStore& store, const std::vector<std::string>& tags,
                        const GeneratorSpec& generator_spec, const DiscriminatorSpec& discriminator_spec,
                        const TrainConfig& config, int threads, const ProgressFn& progress) {
  std::vector<TrainResult> results(tags.size());
  parallel_for(tags.size(), threads, [&](std::size_t j) {
    try {
      results[j] = train_source(tags[j], store, generator_spec, discriminator_spec, config, progress);
    } catch (const Error& e) {
      throw Error(e.code(), "training.train_bank", "source " + tags[j] + " (" + e.where() + "): " + e.detail());
    }
  });
  BankTraining out;
  for (auto& r : results) {
    out.bank.add(r.tag, r.generator);
    out.histories[r.tag] = std::move(r.history);
  }
  return out;
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::string out = "step,d_loss,g_loss,l1\n";
  for (const auto& r : history) {
    out += std::to_string(r.step) + "," + format_double(r.d_loss) + "," + format_double(r.g_loss) + "," +
           format_double(r.l1) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bank

void SourceModelBank::add(const std::string& tag, std::shared_ptr<const Generator<float>> generator) {
  if (!generator) throw Error(ErrorCode::InvalidArgument, "training.train_bank", "null generator for " + tag);
  if (tag != kPastTag && tag != kFutureTag && tag.rfind("ref_", 0) != 0) {
    throw Error(ErrorCode::InvalidArgument, "training.train_bank", "unknown source tag " + tag);
  }
  models_[tag] = std::move(generator);
}

std::vector<std::string> SourceModelBank::tags() const {
  std::vector<std::string> out;
  for (const auto& [tag, g] : models_) out.push_back(tag);
  sort_tags(out);
  return out;
}

const Generator<float>& SourceModelBank::model(const std::string& tag) const {
  auto it = models_.find(tag);
  if (it == models_.end()) throw Error(ErrorCode::MissingModel, "fusion.generate_candidates", "no model for source " + tag);
  return *it->second;
}

Frame SourceModelBank::generate(const std::string& tag, const Frame& condition, const ReconstructionTask& task) const {
  const Generator<float>& g = model(tag);
  const std::uint64_t seed =
      mix_seed(mix_seed(fnv1a(tag), std::uint64_t(task.missing_index)), std::uint64_t(task.gap));
  const nn::Tensor<float> out = g.infer(to_tensor<float>(condition), seed);
  return to_frame(out, task.past.camera_id(), task.missing_index);
}

void SourceModelBank::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::UnwritablePath, "training.train_bank", dir.string() + ": " + ec.message());
  for (const auto& [tag, g] : models_) save_checkpoint(dir / (tag + ".ckpt"), tag, *g);
}

SourceModelBank SourceModelBank::load(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::CheckpointError, "training.load_bank", dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ckpt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::CheckpointError, "training.load_bank", "no checkpoints in " + dir.string());
  SourceModelBank bank;
  for (const auto& f : files) {
    auto [tag, g] = load_checkpoint(f);
    if (bank.has(tag)) throw Error(ErrorCode::CheckpointError, "training.load_bank", "duplicate source " + tag);
    bank.add(tag, std::move(g));
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'M', 'V', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename V>
void put(std::string& out, V v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(V) > in.size()) throw Error(ErrorCode::CheckpointError, "training.load_checkpoint", "truncated file");
  V v;
  std::memcpy(&v, in.data() + pos, sizeof(V));
  pos += sizeof(V);
  return v;
}

}  // namespace

std::string serialize_generator(const std::string& tag, const Generator<float>& generator) {
  auto& g = const_cast<Generator<float>&>(generator);
  const GeneratorSpec& spec = generator.spec();
  nlohmann::ordered_json header;
  header["format"] = "mvrecon-generator";
  header["tag"] = tag;
  header["spec"] = {{"in_channels", spec.in_channels},
                    {"out_channels", spec.out_channels},
                    {"base_filters", spec.base_filters},
                    {"depth", spec.depth},
                    {"dropout_levels", spec.resolved_dropout_levels()},
                    {"dropout_rate", spec.dropout_rate}};
  auto params = g.named_params();
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& [name, p] : params) tensors.push_back({{"name", name}, {"count", p->value.size()}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& [name, p] : params) {
    out.append(reinterpret_cast<const char*>(p->value.data()), p->value.size() * sizeof(float));
  }
  return out;
}

std::pair<std::string, std::shared_ptr<Generator<float>>> deserialize_generator(const std::string& bytes) {
  const char* where = "training.load_checkpoint";
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::CheckpointError, where, "not a generator checkpoint");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw Error(ErrorCode::CheckpointError, where, "unsupported version " + std::to_string(version));
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw Error(ErrorCode::CheckpointError, where, "truncated header");
  nlohmann::json header;
  GeneratorSpec spec;
  std::string tag;
  std::vector<std::pair<std::string, std::size_t>> layout;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
    pos += header_len;
    if (header.at("format") != "mvrecon-generator") throw Error(ErrorCode::CheckpointError, where, "unknown format");
    tag = header.at("tag").get<std::string>();
    const auto& s = header.at("spec");
    spec.in_channels = s.at("in_channels").get<int>();
    spec.out_channels = s.at("out_channels").get<int>();
    spec.base_filters = s.at("base_filters").get<int>();
    spec.depth = s.at("depth").get<int>();
    spec.dropout_levels = s.at("dropout_levels").get<std::set<int>>();
    spec.dropout_rate = s.at("dropout_rate").get<double>();
    for (const auto& t : header.at("tensors")) layout.emplace_back(t.at("name").get<std::string>(), t.at("count").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CheckpointError, where, std::string("bad header: ") + e.what());
  }
  std::shared_ptr<Generator<float>> g;
  try {
    g = std::make_shared<Generator<float>>(spec);
  } catch (const Error& e) {
    throw Error(ErrorCode::CheckpointError, where, std::string("bad spec: ") + e.what());
  }
  auto params = g->named_params();
  if (params.size() != layout.size()) throw Error(ErrorCode::CheckpointError, where, "tensor count mismatch");
  for (std::size_t j = 0; j < params.size(); ++j) {
    auto& [name, p] = params[j];
    if (layout[j].first != name || layout[j].second != p->value.size()) {
      throw Error(ErrorCode::CheckpointError, where, "tensor " + layout[j].first + " does not match the spec");
    }
    const std::size_t nbytes = p->value.size() * sizeof(float);
    if (pos + nbytes > bytes.size()) throw Error(ErrorCode::CheckpointError, where, "truncated tensor data");
    std::memcpy(p->value.data(), bytes.data() + pos, nbytes);
    pos += nbytes;
  }
  if (pos != bytes.size()) throw Error(ErrorCode::CheckpointError, where, "trailing bytes");
  return {tag, g};
}

void save_checkpoint(const std::filesystem::path& path, const std::string& tag, const Generator<float>& generator) {
  const std::string bytes = serialize_generator(tag, generator);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(bytes.data(), std::streamsize(bytes.size()))) {
    throw Error(ErrorCode::UnwritablePath, "training.save_checkpoint", path.string());
  }
}

std::pair<std::string, std::shared_ptr<Generator<float>>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::CheckpointError, "training.load_checkpoint", "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_generator(buffer.str());
}

template GanLosses gan_losses<float>(const nn::Tensor<float>&, const nn::Tensor<float>&, const nn::Tensor<float>&,
                                     const nn::Tensor<float>&, double);
template GanLosses gan_losses<double>(const nn::Tensor<double>&, const nn::Tensor<double>&, const nn::Tensor<double>&,
                                      const nn::Tensor<double>&, double);
template double generator_loss_and_gradients<float>(Generator<float>&, Discriminator<float>&, const nn::Tensor<float>&,
                                                     const nn::Tensor<float>&, double, std::uint64_t);
template double generator_loss_and_gradients<double>(Generator<double>&, Discriminator<double>&,
                                                      const nn::Tensor<double>&, const nn::Tensor<double>&, double,
                                                      std::uint64_t);

}  // namespace mvrecon
