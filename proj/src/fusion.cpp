#include "mvrecon/fusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <fstream>
#include <sstream>

#include "mvrecon/config.hpp"
#include "mvrecon/metrics.hpp"
#include "mvrecon/util.hpp"

namespace mvrecon {

const Frame& condition_for(const ReconstructionTask& task, const std::string& tag) {
  if (tag == kPastTag) return task.past;
  if (tag == kFutureTag) return task.future;
  for (const Frame& ref : task.references) {
    if (reference_tag(ref.camera_id()) == tag) return ref;
  }
  throw Error(ErrorCode::InvalidArgument, "fusion.generate_candidates", "task has no source " + tag);
}

CandidateSet generate_candidates(const ReconstructionTask& task, const CandidateProvider& provider) {
  const auto tags = task.source_tags();
  for (const auto& tag : tags) {
    if (!provider.has(tag)) throw Error(ErrorCode::MissingModel, "fusion.generate_candidates", "no model for source " + tag);
  }
  CandidateSet set(task.gap);
  for (const auto& tag : tags) set.add(tag, provider.generate(tag, condition_for(task, tag), task));
  return set;
}

std::vector<double> effective_weights(const CandidateSet& candidates, const WeightVector& weights) {
  std::vector<double> w;
  double total = 0;
  for (const auto& [tag, frame] : candidates.candidates()) {
    double v = 0;
    for (const auto& [t, x] : weights) {
      if (t == tag) v = x;
    }
    w.push_back(v);
    total += v;
  }
  if (total > 0) {
    for (double& v : w) v /= total;
  } else {
    std::fill(w.begin(), w.end(), 1.0 / double(w.size()));
  }
  return w;
}

Frame fuse(const CandidateSet& candidates, const WeightVector& weights) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "fusion.fuse", "no candidates to fuse");
  const auto w = effective_weights(candidates, weights);
  const auto& list = candidates.candidates();
  const Frame& first = list.front().second;
  std::vector<std::span<const float>> px;
  for (const auto& [tag, f] : list) px.push_back(f.pixels());
  std::vector<float> out(first.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0;
    float lo = px[0][i];
    float hi = px[0][i];
    for (std::size_t s = 0; s < px.size(); ++s) {
      const float v = px[s][i];
      acc += w[s] * double(v);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out[i] = std::clamp(static_cast<float>(acc), lo, hi);
  }
  return Frame(first.height(), first.width(), std::move(out), first.camera_id(), first.index());
}

Frame fuse(const CandidateSet& candidates, const FusionWeights& weights) {
  if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "fusion.fuse", "no candidates to fuse");
  return fuse(candidates, weights.at(candidates.gap()));
}

std::vector<std::vector<int>> simplex_grid(int n_sources, double grid_step) {
  const char* where = "fusion.calibrate_weights";
  if (n_sources < 1) throw Error(ErrorCode::InvalidArgument, where, "need at least one source");
  if (!(grid_step > 0 && grid_step <= 1)) throw Error(ErrorCode::InvalidArgument, where, "grid_step must lie in (0, 1]");
  const double inv = 1.0 / grid_step;
  const long m = std::lround(inv);
  if (std::abs(inv - double(m)) > 1e-9 * inv) {
    throw Error(ErrorCode::InvalidArgument, where, "1 / grid_step must be an integer");
  }
  std::vector<std::vector<int>> out;
  std::vector<int> counts(n_sources, 0);
  // Depth-first with the largest count first gives descending lexicographic order.
  auto rec = [&](auto& self, int pos, int remaining) -> void {
    if (pos == n_sources - 1) {
      counts[pos] = remaining;
      out.push_back(counts);
      return;
    }
    for (int c = remaining; c >= 0; --c) {
      counts[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  rec(rec, 0, int(m));
  return out;
}

GapCalibration calibrate_gap(int gap, const std::vector<std::string>& tags, const std::vector<ScoredTask>& tasks,
                             const CalibrationOptions& options) {
  if (tasks.empty()) {
    throw Error(ErrorCode::EmptyValidation, "fusion.calibrate_weights", "no validation task for gap " + std::to_string(gap));
  }
  const auto grid = simplex_grid(int(tags.size()), options.grid_step);
  const int m = std::accumulate(grid.front().begin(), grid.front().end(), 0);
  auto to_weights = [&](const std::vector<int>& counts) {
    WeightVector w;
    for (std::size_t s = 0; s < tags.size(); ++s) w.emplace_back(tags[s], double(counts[s]) / double(m));
    return w;
  };
  std::vector<double> scores(grid.size());
  parallel_for(grid.size(), options.threads, [&](std::size_t g) {
    const WeightVector w = to_weights(grid[g]);
    double sum = 0;
    for (const auto& t : tasks) sum += psnr(fuse(t.candidates, w), t.ground_truth, options.psnr_cap);
    scores[g] = sum / double(tasks.size());
  });
  auto intra_counts = [&](const std::vector<int>& counts) {
    int n = 0;
    for (std::size_t s = 0; s < tags.size(); ++s) {
      if (is_intra_tag(tags[s])) n += counts[s];
    }
    return n;
  };
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (scores[g] > scores[best] || (scores[g] == scores[best] && intra_counts(grid[g]) > intra_counts(grid[best]))) {
      best = g;
    }
  }
  return GapCalibration{gap, to_weights(grid[best]), scores[best], tasks.size()};
}

FusionWeights calibrate_weights(const CandidateProvider& provider, const SequenceStore& store,
                                const std::vector<int>& gaps, const CalibrationOptions& options,
                                std::vector<GapCalibration>* details) {
  const char* where = "fusion.calibrate_weights";
  const auto tags = provider.tags();
  if (tags.empty()) throw Error(ErrorCode::MissingModel, where, "empty model bank");
  const ActivityGate gate(store);
  FusionWeights weights;
  for (int gap : gaps) {
    std::vector<ReconstructionTask> tasks;
    try {
      tasks = sample_tasks(store, gap, Split::Val);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::GapTooLarge) throw;
      throw Error(ErrorCode::EmptyValidation, where, "no validation task for gap " + std::to_string(gap));
    }
    std::vector<ScoredTask> scored(tasks.size());
    parallel_for(tasks.size(), options.threads, [&](std::size_t j) {
      const ReconstructionTask task = gate_references(tasks[j], store.rig(), gate, options.activity_threshold);
      scored[j] = ScoredTask{generate_candidates(task, provider), *task.ground_truth};
    });
    GapCalibration result = calibrate_gap(gap, tags, scored, options);
    weights.set(gap, result.weights);
    if (details) details->push_back(std::move(result));
  }
  return weights;
}

std::string weights_csv(const FusionWeights& weights) {
  std::string out = "gap,source_tag,weight\n";
  for (const auto& [gap, vec] : weights.table()) {
    for (const auto& [tag, w] : vec) out += std::to_string(gap) + "," + tag + "," + format_double(w) + "\n";
  }
  return out;
}

FusionWeights parse_weights_csv(const std::string& text) {
  const char* where = "fusion.load_weights";
  std::istringstream in(text);
  std::string line;
  std::map<int, WeightVector> rows;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != "gap,source_tag,weight") throw Error(ErrorCode::ConfigError, where, "missing header gap,source_tag,weight");
      header = true;
      continue;
    }
    const auto fields = split_list(line);
    if (fields.size() != 3) throw Error(ErrorCode::ConfigError, where, "line " + std::to_string(line_no) + ": expected 3 fields");
    int gap = 0;
    double w = 0;
    auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), gap);
    auto r2 = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), w);
    if (r1.ec != std::errc() || r1.ptr != fields[0].data() + fields[0].size() || r2.ec != std::errc() ||
        r2.ptr != fields[2].data() + fields[2].size()) {
      throw Error(ErrorCode::ConfigError, where, "line " + std::to_string(line_no) + ": bad number");
    }
    rows[gap].emplace_back(fields[1], w);
  }
  if (!header) throw Error(ErrorCode::ConfigError, where, "empty weights file");
  FusionWeights weights;
  for (auto& [gap, vec] : rows) weights.set(gap, std::move(vec));
  return weights;
}

void save_weights(const std::filesystem::path& path, const FusionWeights& weights) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  const std::string text = weights_csv(weights);
  if (!out || !out.write(text.data(), std::streamsize(text.size()))) {
    throw Error(ErrorCode::UnwritablePath, "fusion.calibrate_weights", path.string());
  }
}

FusionWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "fusion.load_weights", "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_weights_csv(buffer.str());
}

}  // namespace mvrecon
