#pragma once

// Weighted-average fusion of per-source candidates and per-gap weight
// calibration on the validation split.

#include <filesystem>
#include <string>
#include <vector>

#include "mvrecon/core.hpp"
#include "mvrecon/data.hpp"
#include "mvrecon/training.hpp"

namespace mvrecon {

// The frame a source reads: past, future or the matching reference.
const Frame& condition_for(const ReconstructionTask& task, const std::string& tag);

// One candidate per source present in the task, in canonical tag order.
// Throws MissingModel naming the first source the provider lacks.
CandidateSet generate_candidates(const ReconstructionTask& task, const CandidateProvider& provider);

// Weights restricted to the candidates present and renormalized to sum to
// one; tags without an entry get zero. When every present weight is zero the
// candidates are averaged uniformly.
std::vector<double> effective_weights(const CandidateSet& candidates, const WeightVector& weights);

// Per-pixel weighted average, clamped to the candidates' min/max at that
// pixel. Throws NoCandidates or GapNotCalibrated.
Frame fuse(const CandidateSet& candidates, const FusionWeights& weights);
Frame fuse(const CandidateSet& candidates, const WeightVector& weights);

// Every vector of `n_sources` non-negative multiples of grid_step summing to
// one, as integer counts out of round(1 / grid_step). Ordered so that counts
// compare lexicographically descending; the first entry is one-hot on source
// 0. Throws InvalidArgument unless 1 / grid_step is an integer.
std::vector<std::vector<int>> simplex_grid(int n_sources, double grid_step);

struct CalibrationOptions {
  double grid_step = 0.05;
  double activity_threshold = 0.0;  // gating applied to validation tasks
  double psnr_cap = 100.0;
  int threads = 1;
};

struct ScoredTask {
  CandidateSet candidates{1};
  Frame ground_truth;
};

struct GapCalibration {
  int gap = 0;
  WeightVector weights;
  double mean_psnr = 0;
  std::size_t task_count = 0;
};

// Grid point maximizing mean PSNR over `tasks`; ties go to the larger
// past + future mass, then to the earlier grid point.
GapCalibration calibrate_gap(int gap, const std::vector<std::string>& tags, const std::vector<ScoredTask>& tasks,
                             const CalibrationOptions& options);

// Per gap: validation tasks (gated), candidates from `provider`, grid search
// over provider.tags(). Throws EmptyValidation when a gap has no validation
// task.
FusionWeights calibrate_weights(const CandidateProvider& provider, const SequenceStore& store,
                                const std::vector<int>& gaps, const CalibrationOptions& options = {},
                                std::vector<GapCalibration>* details = nullptr);

// "gap,source_tag,weight" rows, shortest round-trip decimals.
std::string weights_csv(const FusionWeights& weights);
FusionWeights parse_weights_csv(const std::string& text);
void save_weights(const std::filesystem::path& path, const FusionWeights& weights);
FusionWeights load_weights(const std::filesystem::path& path);

}  // namespace mvrecon
