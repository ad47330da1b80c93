#include "mvrecon/eval.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "mvrecon/config.hpp"
#include "mvrecon/image_io.hpp"
#include "mvrecon/metrics.hpp"
#include "mvrecon/util.hpp"

namespace mvrecon {

const char* view_mode_name(ViewMode mode) { return mode == ViewMode::Single ? "single_view" : "multi_view"; }

ViewMode parse_view_mode(const std::string& text) {
  if (text == "single" || text == "single_view") return ViewMode::Single;
  if (text == "multi" || text == "multi_view") return ViewMode::Multi;
  throw Error(ErrorCode::InvalidArgument, "eval.run_sweep", "mode must be single or multi, got '" + text + "'");
}

const GapRow& GapSweepReport::row(int gap) const {
  for (const auto& r : rows) {
    if (r.gap == gap) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "eval.run_sweep", "report has no row for gap " + std::to_string(gap));
}

ReconstructionTask prepare_task(ReconstructionTask task, const CameraRig& rig, const ActivityGate& gate, ViewMode mode,
                                double activity_threshold) {
  if (mode == ViewMode::Single) {
    task.references.clear();
    return task;
  }
  return gate_references(std::move(task), rig, gate, activity_threshold);
}

GapSweepReport run_sweep(const CandidateProvider& provider, const FusionWeights& weights, const SequenceStore& store,
                         const std::vector<int>& gaps, ViewMode mode, const SweepOptions& options) {
  GapSweepReport report;
  report.mode = mode;
  report.dataset_id = options.dataset_id;
  report.fingerprint = options.fingerprint;
  const ActivityGate gate(store);
  for (int gap : gaps) {
    const auto tasks = sample_tasks(store, gap, Split::Test);
    std::vector<double> p(tasks.size()), s(tasks.size());
    parallel_for(tasks.size(), options.threads, [&](std::size_t j) {
      try {
        const auto task = prepare_task(tasks[j], store.rig(), gate, mode, options.activity_threshold);
        const Frame fused = fuse(generate_candidates(task, provider), weights);
        p[j] = psnr(fused, *task.ground_truth, options.psnr_cap);
        s[j] = ssim(fused, *task.ground_truth);
      } catch (const Error& e) {
        throw Error(e.code(), "eval.run_sweep",
                    "task i=" + std::to_string(tasks[j].missing_index) + ",k=" + std::to_string(gap) + " (" + e.where() + "): " + e.detail());
      }
    });
    GapRow row;
    row.gap = gap;
    row.task_count = tasks.size();
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      row.mean_psnr += p[j];
      row.mean_ssim += s[j];
    }
    row.mean_psnr /= double(tasks.size());
    row.mean_ssim /= double(tasks.size());
    report.rows.push_back(row);
  }
  return report;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

const char* kCsvHeader = "gap,mean_psnr,mean_ssim,task_count,mode,dataset_id,fingerprint";

}  // namespace

std::string emit_report(const GapSweepReport& report, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::Csv) {
    out = std::string(kCsvHeader) + "\n";
    for (const auto& r : report.rows) {
      out += std::to_string(r.gap) + "," + format_double(r.mean_psnr) + "," + format_double(r.mean_ssim) + "," +
             std::to_string(r.task_count) + "," + view_mode_name(report.mode) + "," + report.dataset_id + "," +
             report.fingerprint + "\n";
    }
    return out;
  }
  std::string head = "| " + std::string(view_mode_name(report.mode)) + " |";
  std::string rule = "|---|";
  std::string psnr_row = "| PSNR (dB) |";
  std::string ssim_row = "| SSIM |";
  std::string count_row = "| Tasks |";
  for (const auto& r : report.rows) {
    head += " Gap " + std::to_string(r.gap) + " |";
    rule += "---|";
    psnr_row += " " + fixed(r.mean_psnr, 2) + " |";
    ssim_row += " " + fixed(r.mean_ssim, 4) + " |";
    count_row += " " + std::to_string(r.task_count) + " |";
  }
  out = head + "\n" + rule + "\n";
  if (!report.rows.empty()) out += psnr_row + "\n" + ssim_row + "\n" + count_row + "\n";
  return out;
}

GapSweepReport parse_report_csv(const std::string& text) {
  const char* where = "eval.emit_report";
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) throw Error(ErrorCode::ConfigError, where, "bad report header");
  GapSweepReport report;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::string item;
    std::istringstream fields(line);
    while (std::getline(fields, item, ',')) f.push_back(item);
    if (f.size() == 6) f.emplace_back();
    if (f.size() != 7) throw Error(ErrorCode::ConfigError, where, "bad report row: " + line);
    GapRow r;
    auto num = [&](const std::string& s, auto& v) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(ErrorCode::ConfigError, where, "bad number " + s);
    };
    num(f[0], r.gap);
    num(f[1], r.mean_psnr);
    num(f[2], r.mean_ssim);
    num(f[3], r.task_count);
    report.mode = parse_view_mode(f[4]);
    report.dataset_id = f[5];
    report.fingerprint = f[6];
    report.rows.push_back(r);
  }
  return report;
}

std::string emit_ablation(const GapSweepReport& single_view, const GapSweepReport& multi_view) {
  std::string head = "| PSNR (dB) |";
  std::string rule = "|---|";
  std::string single_row = "| Single |";
  std::string multi_row = "| Multi |";
  std::string delta_row = "| Delta |";
  for (const auto& m : multi_view.rows) {
    const GapRow* s = nullptr;
    for (const auto& r : single_view.rows) {
      if (r.gap == m.gap) s = &r;
    }
    if (!s) continue;
    head += " Gap " + std::to_string(m.gap) + " |";
    rule += "---|";
    single_row += " " + fixed(s->mean_psnr, 2) + " |";
    multi_row += " " + fixed(m.mean_psnr, 2) + " |";
    delta_row += " " + fixed(m.mean_psnr - s->mean_psnr, 2) + " |";
  }
  return head + "\n" + rule + "\n" + single_row + "\n" + multi_row + "\n" + delta_row + "\n";
}

std::string report_fingerprint(const std::string& config_text, const std::vector<std::string>& blobs) {
  std::uint64_t h = fnv1a(config_text);
  for (const auto& b : blobs) {
    h = fnv1a("\x1f", h);
    h = fnv1a(b, h);
  }
  return hex64(h);
}

ComparisonGrid emit_comparison_grid(const ReconstructionTask& task, const CandidateSet& candidates, const Frame& fused,
                                    const std::optional<Frame>& ground_truth, const std::filesystem::path& out_path) {
  const char* where = "eval.emit_comparison_grid";
  std::vector<std::vector<std::pair<std::string, Frame>>> rows(3);
  const std::string i = std::to_string(task.missing_index);
  const std::string k = std::to_string(task.gap);
  rows[0].emplace_back("past " + std::to_string(task.past.index()), task.past);
  rows[0].emplace_back("future " + std::to_string(task.future.index()), task.future);
  for (const Frame& ref : task.references) rows[0].emplace_back("cam " + std::to_string(ref.camera_id()) + " " + i, ref);
  for (const auto& [tag, frame] : candidates.candidates()) rows[1].emplace_back("G|" + tag, frame);
  rows[2].emplace_back("fused k=" + k, fused);
  if (ground_truth) rows[2].emplace_back("ground truth", *ground_truth);

  const int h = fused.height();
  const int w = fused.width();
  for (const auto& row : rows) {
    for (const auto& [label, f] : row) {
      if (f.height() != h || f.width() != w) throw Error(ErrorCode::DimensionMismatch, where, label + " differs in size");
    }
  }
  const int pad = 4;
  const int band = 14;
  std::size_t columns = 1;
  for (const auto& row : rows) columns = std::max(columns, row.size());
  const int width = pad + int(columns) * (w + pad);
  const int height = pad + 3 * (band + h + pad);
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  ComparisonGrid grid;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const int x0 = pad + int(c) * (w + pad);
      const int y0 = pad + int(r) * (band + h + pad) + band;
      grid.labels.push_back(rows[r][c].first);
      grid.tiles.push_back(Rect{x0, y0, x0 + w, y0 + h});
    }
  }
  // Labels first: descenders and long labels may spill, the images then cover them.
  for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
    cv::putText(canvas, grid.labels[t], cv::Point(grid.tiles[t].x0, grid.tiles[t].y0 - 3), cv::FONT_HERSHEY_SIMPLEX,
                0.35, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  std::size_t t = 0;
  for (const auto& row : rows) {
    for (const auto& [label, f] : row) {
      const Rect& tile = grid.tiles[t++];
      const auto rgb = f.to_rgb8();
      for (int y = 0; y < h; ++y) {
        auto* dst = canvas.ptr<std::uint8_t>(tile.y0 + y) + 3 * tile.x0;
        std::copy(rgb.begin() + std::ptrdiff_t(y) * w * 3, rgb.begin() + std::ptrdiff_t(y + 1) * w * 3, dst);
      }
    }
  }
  write_rgb_png(out_path, height, width, std::span<const std::uint8_t>(canvas.data, canvas.total() * 3));
  return grid;
}

}  // namespace mvrecon
