#pragma once

// Conditional-GAN training, one independent generator/discriminator pair per
// conditioning source, and the bank of trained generators.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mvrecon/core.hpp"
#include "mvrecon/data.hpp"
#include "mvrecon/model.hpp"

namespace mvrecon {

struct TrainConfig {
  double lambda_l1 = 100.0;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 1;
  long steps = 0;
  std::uint64_t seed = 0;
  // Gaps sampled uniformly per step for the past/future sources.
  std::vector<int> gap_schedule{1, 3, 5, 7, 15, 30};

  void validate() const;
};

struct GanLosses {
  double d_loss = 0;  // halved cross-entropy of the discriminator
  double g_loss = 0;  // non-saturating adversarial term + lambda * l1
  double l1 = 0;
};

// softplus(x) = log(1 + e^x), stable for large |x|.
double softplus(double x);

// Logit maps must match in shape, as must fake and target. Throws
// NonFiniteLoss when any term is not finite.
template <typename T>
GanLosses gan_losses(const nn::Tensor<T>& d_real, const nn::Tensor<T>& d_fake, const nn::Tensor<T>& fake,
                     const nn::Tensor<T>& target, double lambda_l1);
GanLosses gan_losses(const nn::Tensor<float>& d_real, const nn::Tensor<float>& d_fake, const Frame& fake,
                     const Frame& target, double lambda_l1);

// Generator loss of one pair under a fixed noise seed, with parameter
// gradients of G accumulated into its params (D's are accumulated too and
// should be discarded by the caller).
template <typename T>
double generator_loss_and_gradients(Generator<T>& generator, Discriminator<T>& discriminator,
                                    const nn::Tensor<T>& condition, const nn::Tensor<T>& target, double lambda_l1,
                                    std::uint64_t noise_seed);

struct LossRecord {
  long step = 0;
  double d_loss = 0;
  double g_loss = 0;
  double l1 = 0;
};

struct TrainingPair {
  nn::Tensor<float> condition;
  nn::Tensor<float> target;
};

/// Alternating optimizer: one discriminator step, then one generator step
/// against the updated discriminator.
class GanTrainer {
 public:
  GanTrainer(const GeneratorSpec& generator_spec, const DiscriminatorSpec& discriminator_spec, const TrainConfig& config,
             std::uint64_t seed);

  LossRecord step(const std::vector<const TrainingPair*>& batch);
  // The two halves of step(); g_step must follow d_step on the same batch.
  double d_step(const std::vector<const TrainingPair*>& batch);
  std::pair<double, double> g_step(const std::vector<const TrainingPair*>& batch);  // (g_loss, l1)
  long steps_taken() const noexcept { return steps_; }

  Generator<float>& generator() { return *generator_; }
  Discriminator<float>& discriminator() { return discriminator_; }
  std::shared_ptr<Generator<float>> share_generator() const { return generator_; }

 private:
  std::uint64_t noise_seed(std::size_t sample) const;

  TrainConfig config_;
  std::uint64_t seed_;
  std::shared_ptr<Generator<float>> generator_;
  Discriminator<float> discriminator_;
  nn::Adam<float> g_opt_;
  nn::Adam<float> d_opt_;
  std::vector<nn::Tensor<float>> fakes_;
  long steps_ = 0;
};

struct TrainResult {
  std::string tag;
  std::shared_ptr<const Generator<float>> generator;
  std::vector<LossRecord> history;
};

using ProgressFn = std::function<void(const std::string& tag, const LossRecord&)>;

// Every (condition, target) pair available to `tag` within the train split:
// past -> (i-k, i), future -> (i+k, i), ref_<j> -> (camera j at i, i). For
// intra tags both frames must lie in the train split and k comes from
// gap_schedule.
struct PairSampler {
  PairSampler(const SequenceStore& store, const std::string& tag, const std::vector<int>& gap_schedule);

  // Draws k uniformly among gaps with at least one pair, then a center.
  std::pair<FrameIndex, FrameIndex> draw(std::mt19937_64& rng) const;  // (condition index, target index)
  std::size_t pair_count() const;

  CameraId condition_camera;
  int direction = 0;                             // condition index = target + direction * k
  std::vector<int> gaps;                         // feasible gaps, 0 for reference tags
  std::vector<std::vector<FrameIndex>> centers;  // per feasible gap
};

TrainResult train_source(const std::string& tag, const SequenceStore& store, const GeneratorSpec& generator_spec,
                         const DiscriminatorSpec& discriminator_spec, const TrainConfig& config,
                         const ProgressFn& progress = {});

// past, future, then ref_<j> for every reference camera.
std::vector<std::string> bank_tags(const CameraRig& rig);

/// Frozen per-source generators producing candidate reconstructions.
class CandidateProvider {
 public:
  virtual ~CandidateProvider() = default;
  virtual bool has(const std::string& tag) const = 0;
  virtual std::vector<std::string> tags() const = 0;
  // The candidate for `tag` given the conditioning frame that tag reads.
  virtual Frame generate(const std::string& tag, const Frame& condition, const ReconstructionTask& task) const = 0;
};

class SourceModelBank : public CandidateProvider {
 public:
  void add(const std::string& tag, std::shared_ptr<const Generator<float>> generator);
  bool has(const std::string& tag) const override { return models_.count(tag) != 0; }
  std::vector<std::string> tags() const override;
  // Dropout noise is seeded from (missing_index, gap, tag) so a candidate is
  // reproducible regardless of evaluation order.
  Frame generate(const std::string& tag, const Frame& condition, const ReconstructionTask& task) const override;
  const Generator<float>& model(const std::string& tag) const;
  std::size_t size() const noexcept { return models_.size(); }

  // <dir>/<tag>.ckpt per source.
  void save(const std::filesystem::path& dir) const;
  static SourceModelBank load(const std::filesystem::path& dir);

 private:
  std::map<std::string, std::shared_ptr<const Generator<float>>> models_;
};

struct BankTraining {
  SourceModelBank bank;
  std::map<std::string, std::vector<LossRecord>> histories;
};

// Trains bank_tags(rig) independently, up to `threads` sources at once.
// Errors are re-raised tagged with the failing source.
BankTraining train_bank(const SequenceStore& store, const GeneratorSpec& generator_spec,
                        const DiscriminatorSpec& discriminator_spec, const TrainConfig& config, int threads = 1,
                        const ProgressFn& progress = {});
BankTraining train_bank(const SequenceStore& store, const std::vector<std::string>& tags,
                        const GeneratorSpec& generator_spec, const DiscriminatorSpec& discriminator_spec,
                        const TrainConfig& config, int threads = 1, const ProgressFn& progress = {});

// "step,d_loss,g_loss,l1" with shortest round-trip numbers.
std::string loss_history_csv(const std::vector<LossRecord>& history);

// Self-describing checkpoint: magic, version, JSON header with the spec and
// tensor layout, then little-endian float32 parameters.
std::string serialize_generator(const std::string& tag, const Generator<float>& generator);
std::pair<std::string, std::shared_ptr<Generator<float>>> deserialize_generator(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const std::string& tag, const Generator<float>& generator);
std::pair<std::string, std::shared_ptr<Generator<float>>> load_checkpoint(const std::filesystem::path& path);

}  // namespace mvrecon
