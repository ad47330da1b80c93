#include "mvrecon/mvrecon.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "mvrecon/eval.hpp"
#include "mvrecon/experiment.hpp"
#include "mvrecon/fusion.hpp"
#include "mvrecon/image_io.hpp"
#include "mvrecon/metrics.hpp"
#include "mvrecon/util.hpp"

struct mvr_experiment {
  mvrecon::Experiment experiment;
};

struct mvr_store {
  mvrecon::SequenceStore store;
};

struct mvr_bank {
  mvrecon::SourceModelBank bank;
  std::map<std::string, std::vector<mvrecon::LossRecord>> histories;
  std::vector<std::string> tags;
};

struct mvr_weights {
  mvrecon::FusionWeights weights;
};

struct mvr_report {
  mvrecon::GapSweepReport report;
};

namespace {

using namespace mvrecon;

thread_local std::string last_error;

mvr_status fail(mvr_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename Fn>
mvr_status guarded(Fn&& fn) {
  try {
    fn();
    return MVR_OK;
  } catch (const Error& e) {
    return fail(static_cast<mvr_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MVR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MVR_INTERNAL, std::string("internal error: ") + e.what());
  }
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, "capi", std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int threads_of(const mvr_experiment* e) { return e->experiment.threads; }

std::string fingerprint(const mvr_experiment* e, const mvr_bank* b, const mvr_weights* w) {
  KeyValueConfig cfg;
  for (const auto& [k, v] : e->experiment.config.values()) {
    if (k != "threads") cfg.set(k, v);
  }
  std::vector<std::string> blobs;
  for (const auto& tag : b->tags) blobs.push_back(serialize_generator(tag, b->bank.model(tag)));
  blobs.push_back(weights_csv(w->weights));
  return report_fingerprint(cfg.canonical_text(), blobs);
}

mvr_bank* make_bank(SourceModelBank bank, std::map<std::string, std::vector<LossRecord>> histories) {
  auto* out = new mvr_bank{std::move(bank), std::move(histories), {}};
  out->tags = out->bank.tags();
  return out;
}

}  // namespace

extern "C" {

const char* mvr_version(void) { return "1.0.0"; }

const char* mvr_last_error(void) { return last_error.c_str(); }

const char* mvr_status_name(mvr_status status) {
  if (status == MVR_OK) return "Ok";
  if (status == MVR_INTERNAL) return "Internal";
  const auto name = error_code_name(static_cast<ErrorCode>(status));
  return name.data();
}

void mvr_string_free(char* text) { std::free(text); }

mvr_status mvr_experiment_load(const char* path, mvr_experiment** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    KeyValueConfig cfg;
    if (path) {
      cfg = KeyValueConfig::load(path);
      // A relative data.root is taken relative to the config file.
      if (auto root = cfg.get("data.root"); root && !root->empty() && std::filesystem::path(*root).is_relative()) {
        cfg.set("data.root", (std::filesystem::path(path).parent_path() / *root).lexically_normal().string());
      }
    }
    *out = new mvr_experiment{build_experiment(cfg)};
  });
}

mvr_status mvr_experiment_parse(const char* text, mvr_experiment** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = nullptr;
    *out = new mvr_experiment{build_experiment(KeyValueConfig::parse(text))};
  });
}

mvr_status mvr_experiment_set(mvr_experiment* experiment, const char* assignment) {
  return guarded([&] {
    require(experiment, "experiment");
    require(assignment, "assignment");
    KeyValueConfig cfg = experiment->experiment.config;
    cfg.set_assignment(assignment);
    experiment->experiment = build_experiment(cfg);
  });
}

mvr_status mvr_experiment_text(const mvr_experiment* experiment, char** out) {
  return guarded([&] {
    require(experiment, "experiment");
    require(out, "out");
    *out = dup_string(experiment->experiment.config.canonical_text());
  });
}

void mvr_experiment_free(mvr_experiment* experiment) { delete experiment; }

mvr_status mvr_store_load(const mvr_experiment* experiment, mvr_store** out) {
  return guarded([&] {
    require(experiment, "experiment");
    require(out, "out");
    *out = nullptr;
    *out = new mvr_store{load_store(experiment->experiment)};
  });
}

mvr_status mvr_store_info_get(const mvr_store* store, mvr_store_info* out) {
  return guarded([&] {
    require(store, "store");
    require(out, "out");
    const SequenceStore& s = store->store;
    out->frame_count = s.frame_count();
    out->train_count = s.split_indices(Split::Train).size();
    out->val_count = s.split_indices(Split::Val).size();
    out->test_count = s.split_indices(Split::Test).size();
    out->height = s.height();
    out->width = s.width();
    out->n_cameras = s.rig().n_cameras();
    out->target_camera = s.rig().target_camera();
  });
}

mvr_status mvr_store_export(const mvr_store* store, const char* dir) {
  return guarded([&] {
    require(store, "store");
    require(dir, "dir");
    export_frames(store->store, dir);
    KeyValueConfig cfg = rig_config(store->store.rig());
    cfg.set("data.source", "frames");
    cfg.set("data.root", ".");
    cfg.set("test_fraction", format_double(store->store.split_config().test_fraction));
    cfg.set("val_fraction", format_double(store->store.split_config().val_fraction));
    const std::filesystem::path path = std::filesystem::path(dir) / "rig.cfg";
    std::ofstream f(path, std::ios::trunc);
    const std::string text = cfg.canonical_text();
    if (!f || !f.write(text.data(), std::streamsize(text.size()))) {
      throw Error(ErrorCode::UnwritablePath, "data.export_frames", path.string());
    }
  });
}

void mvr_store_free(mvr_store* store) { delete store; }

mvr_status mvr_train(const mvr_experiment* experiment, const mvr_store* store, const char* source,
                     mvr_progress_fn progress, void* user, mvr_bank** out) {
  return guarded([&] {
    require(experiment, "experiment");
    require(store, "store");
    require(source, "source");
    require(out, "out");
    *out = nullptr;
    const Experiment& e = experiment->experiment;
    std::vector<std::string> tags = bank_tags(store->store.rig());
    if (std::string(source) != "all") {
      if (std::find(tags.begin(), tags.end(), source) == tags.end()) {
        throw Error(ErrorCode::InvalidArgument, "training.train_bank", std::string("unknown source ") + source);
      }
      tags = {source};
    }
    ProgressFn fn;
    if (progress) {
      fn = [progress, user](const std::string& tag, const LossRecord& r) {
        progress(tag.c_str(), r.step, r.d_loss, r.g_loss, r.l1, user);
      };
    }
    BankTraining trained =
        train_bank(store->store, tags, e.generator, e.discriminator, e.train, threads_of(experiment), fn);
    *out = make_bank(std::move(trained.bank), std::move(trained.histories));
  });
}

mvr_status mvr_bank_save(const mvr_bank* bank, const char* dir) {
  return guarded([&] {
    require(bank, "bank");
    require(dir, "dir");
    bank->bank.save(dir);
    for (const auto& [tag, history] : bank->histories) {
      const auto path = std::filesystem::path(dir) / (tag + "_loss.csv");
      std::ofstream f(path, std::ios::trunc);
      const std::string text = loss_history_csv(history);
      if (!f || !f.write(text.data(), std::streamsize(text.size()))) {
        throw Error(ErrorCode::UnwritablePath, "training.train_bank", path.string());
      }
    }
  });
}

mvr_status mvr_bank_load(const char* dir, mvr_bank** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = nullptr;
    *out = make_bank(SourceModelBank::load(dir), {});
  });
}

size_t mvr_bank_size(const mvr_bank* bank) { return bank ? bank->tags.size() : 0; }

const char* mvr_bank_tag(const mvr_bank* bank, size_t i) {
  if (!bank || i >= bank->tags.size()) return nullptr;
  return bank->tags[i].c_str();
}

void mvr_bank_free(mvr_bank* bank) { delete bank; }

mvr_status mvr_calibrate(const mvr_experiment* experiment, const mvr_store* store, const mvr_bank* bank,
                         mvr_weights** out) {
  return guarded([&] {
    require(experiment, "experiment");
    require(store, "store");
    require(bank, "bank");
    require(out, "out");
    *out = nullptr;
    const Experiment& e = experiment->experiment;
    CalibrationOptions options;
    options.grid_step = e.grid_step;
    options.activity_threshold = e.activity_threshold;
    options.psnr_cap = e.psnr_cap;
    options.threads = e.threads;
    *out = new mvr_weights{calibrate_weights(bank->bank, store->store, e.gaps, options)};
  });
}

mvr_status mvr_weights_save(const mvr_weights* weights, const char* path) {
  return guarded([&] {
    require(weights, "weights");
    require(path, "path");
    save_weights(path, weights->weights);
  });
}

mvr_status mvr_weights_load(const char* path, mvr_weights** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new mvr_weights{load_weights(path)};
  });
}

mvr_status mvr_weights_text(const mvr_weights* weights, char** out) {
  return guarded([&] {
    require(weights, "weights");
    require(out, "out");
    *out = dup_string(weights_csv(weights->weights));
  });
}

mvr_status mvr_weights_get(const mvr_weights* weights, int gap, const char* tag, double* out) {
  return guarded([&] {
    require(weights, "weights");
    require(tag, "tag");
    require(out, "out");
    *out = 0.0;
    for (const auto& [t, w] : weights->weights.at(gap)) {
      if (t == tag) *out = w;
    }
  });
}

void mvr_weights_free(mvr_weights* weights) { delete weights; }

mvr_status mvr_reconstruct(const mvr_experiment* experiment, const mvr_store* store, const mvr_bank* bank,
                           const mvr_weights* weights, long long index, int gap, mvr_mode mode, const char* fused_png,
                           const char* grid_png, mvr_reconstruction* out) {
  return guarded([&] {
    require(experiment, "experiment");
    require(store, "store");
    require(bank, "bank");
    require(weights, "weights");
    const Experiment& e = experiment->experiment;
    const SequenceStore& s = store->store;
    const ActivityGate gate(s);
    const ReconstructionTask task =
        prepare_task(make_task(s, index, gap), s.rig(), gate, mode == MVR_SINGLE_VIEW ? ViewMode::Single : ViewMode::Multi,
                     e.activity_threshold);
    const CandidateSet candidates = generate_candidates(task, bank->bank);
    const Frame fused = fuse(candidates, weights->weights);
    if (fused_png) write_frame_png(fused_png, fused);
    if (grid_png) emit_comparison_grid(task, candidates, fused, task.ground_truth, grid_png);
    if (out) {
      out->n_candidates = int(candidates.size());
      out->has_ground_truth = task.ground_truth.has_value();
      out->psnr = task.ground_truth ? psnr(fused, *task.ground_truth, e.psnr_cap) : NAN;
      out->ssim = task.ground_truth ? ssim(fused, *task.ground_truth) : NAN;
    }
  });
}

mvr_status mvr_evaluate(const mvr_experiment* experiment, const mvr_store* store, const mvr_bank* bank,
                        const mvr_weights* weights, mvr_mode mode, mvr_report** out) {
  return guarded([&] {
    require(experiment, "experiment");
    require(store, "store");
    require(bank, "bank");
    require(weights, "weights");
    require(out, "out");
    *out = nullptr;
    const Experiment& e = experiment->experiment;
    SweepOptions options;
    options.activity_threshold = e.activity_threshold;
    options.psnr_cap = e.psnr_cap;
    options.threads = e.threads;
    options.dataset_id = e.dataset_id;
    options.fingerprint = fingerprint(experiment, bank, weights);
    *out = new mvr_report{run_sweep(bank->bank, weights->weights, store->store, e.gaps,
                                    mode == MVR_SINGLE_VIEW ? ViewMode::Single : ViewMode::Multi, options)};
  });
}

mvr_status mvr_report_render(const mvr_report* report, mvr_format format, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup_string(emit_report(report->report, format == MVR_CSV ? ReportFormat::Csv : ReportFormat::Markdown));
  });
}

mvr_status mvr_ablation_render(const mvr_report* single_view, const mvr_report* multi_view, char** out) {
  return guarded([&] {
    require(single_view, "single_view");
    require(multi_view, "multi_view");
    require(out, "out");
    *out = dup_string(emit_ablation(single_view->report, multi_view->report));
  });
}

size_t mvr_report_rows(const mvr_report* report) { return report ? report->report.rows.size() : 0; }

mvr_status mvr_report_row(const mvr_report* report, size_t i, int* gap, double* mean_psnr, double* mean_ssim,
                          size_t* task_count) {
  return guarded([&] {
    require(report, "report");
    if (i >= report->report.rows.size()) throw Error(ErrorCode::InvalidArgument, "capi", "row index out of range");
    const GapRow& r = report->report.rows[i];
    if (gap) *gap = r.gap;
    if (mean_psnr) *mean_psnr = r.mean_psnr;
    if (mean_ssim) *mean_ssim = r.mean_ssim;
    if (task_count) *task_count = r.task_count;
  });
}

void mvr_report_free(mvr_report* report) { delete report; }

}  // extern "C"
