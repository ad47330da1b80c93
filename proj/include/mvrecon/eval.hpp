#pragma once

// Gap sweeps over the test split, single- vs multi-view ablation, report
// serialization and side-by-side comparison images.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvrecon/core.hpp"
#include "mvrecon/data.hpp"
#include "mvrecon/fusion.hpp"

namespace mvrecon {

enum class ViewMode { Single, Multi };
const char* view_mode_name(ViewMode mode);  // single_view / multi_view
ViewMode parse_view_mode(const std::string& text);  // single|multi|single_view|multi_view

struct GapRow {
  int gap = 0;
  double mean_psnr = 0;
  double mean_ssim = 0;
  std::size_t task_count = 0;
};

struct GapSweepReport {
  ViewMode mode = ViewMode::Multi;
  std::string dataset_id;
  std::string fingerprint;
  std::vector<GapRow> rows;

  const GapRow& row(int gap) const;
};

struct SweepOptions {
  double activity_threshold = 0.0;
  double psnr_cap = 100.0;
  int threads = 1;
  std::string dataset_id = "synthetic";
  std::string fingerprint;
};

// Single view drops every reference; multi view keeps those that pass the
// activity gate.
ReconstructionTask prepare_task(ReconstructionTask task, const CameraRig& rig, const ActivityGate& gate, ViewMode mode,
                                double activity_threshold);

GapSweepReport run_sweep(const CandidateProvider& provider, const FusionWeights& weights, const SequenceStore& store,
                         const std::vector<int>& gaps, ViewMode mode, const SweepOptions& options = {});

enum class ReportFormat { Csv, Markdown };
std::string emit_report(const GapSweepReport& report, ReportFormat format);
GapSweepReport parse_report_csv(const std::string& text);

// Single, Multi and Delta PSNR rows over the gaps both reports share.
std::string emit_ablation(const GapSweepReport& single_view, const GapSweepReport& multi_view);

// FNV-1a over the canonical config text and every artifact blob, hex.
std::string report_fingerprint(const std::string& config_text, const std::vector<std::string>& blobs);

struct ComparisonGrid {
  std::vector<std::string> labels;
  std::vector<Rect> tiles;  // pixel area of each image in the written PNG
};

// Rows: conditioning inputs, candidates, then fused and ground truth. Each
// tile carries a text label above it. Throws DimensionMismatch or
// UnwritablePath.
ComparisonGrid emit_comparison_grid(const ReconstructionTask& task, const CandidateSet& candidates, const Frame& fused,
                                    const std::optional<Frame>& ground_truth, const std::filesystem::path& out_path);

}  // namespace mvrecon
