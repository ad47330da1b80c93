// mvrecon command-line front end. Talks to the library only through the C API.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvrecon/mvrecon.h"

namespace fs = std::filesystem;

namespace {

// Thrown when a library call fails; carries the library's message.
struct DomainFailure {
  std::string message;
};

void check(mvr_status status) {
  if (status != MVR_OK) throw DomainFailure{mvr_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Experiment = Handle<mvr_experiment, mvr_experiment_free>;
using Store = Handle<mvr_store, mvr_store_free>;
using Bank = Handle<mvr_bank, mvr_bank_free>;
using Weights = Handle<mvr_weights, mvr_weights_free>;
using Report = Handle<mvr_report, mvr_report_free>;

std::string take(char* text) {
  std::string s(text ? text : "");
  mvr_string_free(text);
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out || !out.write(text.data(), std::streamsize(text.size()))) {
    throw DomainFailure{"cli.write: UnwritablePath: " + path.string()};
  }
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  int threads = -1;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--set", c.overrides, "Override a config key (key=value), repeatable");
  cmd->add_option("--threads", c.threads, "Cap on worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
}

// Without --config, commands that read a bank use the config it was trained with.
void load_experiment(Experiment& e, const Common& c, const std::string& bank_dir = {}) {
  std::string path = c.config;
  if (path.empty() && !bank_dir.empty() && fs::exists(fs::path(bank_dir) / "experiment.cfg")) {
    path = (fs::path(bank_dir) / "experiment.cfg").string();
  }
  check(mvr_experiment_load(path.empty() ? nullptr : path.c_str(), e.out()));
  for (const auto& o : c.overrides) check(mvr_experiment_set(e.get(), o.c_str()));
  if (c.threads >= 0) check(mvr_experiment_set(e.get(), ("threads=" + std::to_string(c.threads)).c_str()));
}

struct TaskSpec {
  long long index = -1;
  int gap = 0;
};

TaskSpec parse_task(const std::string& text) {
  TaskSpec t;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--task", "expected i=<index>,k=<gap>");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "i") {
        t.index = std::stoll(value);
      } else if (key == "k") {
        t.gap = std::stoi(value);
      } else {
        throw CLI::ValidationError("--task", "unknown field " + key);
      }
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--task", "bad number in " + item);
    }
  }
  if (t.index < 0 || t.gap < 1) throw CLI::ValidationError("--task", "expected i=<index>,k=<gap> with k >= 1");
  return t;
}

mvr_mode parse_mode(const std::string& m) { return m == "single" ? MVR_SINGLE_VIEW : MVR_MULTI_VIEW; }

void progress(const char* tag, long step, double d_loss, double g_loss, double l1, void* user) {
  const long every = *static_cast<long*>(user);
  if (every > 0 && (step % every == 0)) {
    std::fprintf(stderr, "%s step %ld d_loss=%.5f g_loss=%.5f l1=%.5f\n", tag, step, d_loss, g_loss, l1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera missing-frame reconstruction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mvr_version()));

  Common common;
  std::string out, bank_dir, weights_path, source = "all", mode = "multi", task_text, grid_path, format = "auto";
  long seed = -1;
  long log_every = 100;

  auto* synth = app.add_subcommand("synth-data", "Render the synthetic multi-camera dataset to frame directories");
  add_common(synth, common, false);
  synth->add_option("--seed", seed, "Synthesis seed (overrides synth.seed)")->check(CLI::NonNegativeNumber);
  synth->add_option("--out", out, "Output directory")->required();

  auto* ingest = app.add_subcommand("ingest", "Load and align the configured frames and print a summary");
  add_common(ingest, common, true);
  ingest->add_option("--out", out, "Optional directory for an aligned, resized copy");

  auto* train = app.add_subcommand("train", "Train one generator per conditioning source");
  add_common(train, common, true);
  train->add_option("--source", source, "past, future, ref_<id> or all");
  train->add_option("--out", out, "Bank directory")->required();
  train->add_option("--log-every", log_every, "Print losses every N steps (0 = quiet)");

  auto* calibrate = app.add_subcommand("calibrate", "Fit per-gap fusion weights on the validation split");
  add_common(calibrate, common, false);
  calibrate->add_option("--bank", bank_dir, "Bank directory")->required();
  calibrate->add_option("--out", out, "Weights CSV")->required();

  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct one missing frame");
  add_common(reconstruct, common, false);
  reconstruct->add_option("--bank", bank_dir, "Bank directory")->required();
  reconstruct->add_option("--weights", weights_path, "Weights CSV")->required();
  reconstruct->add_option("--task", task_text, "i=<index>,k=<gap>")->required();
  reconstruct->add_option("--mode", mode, "single or multi")->check(CLI::IsMember({"single", "multi"}));
  reconstruct->add_option("--out", out, "Fused PNG (default fused_i<i>_k<k>.png)");
  reconstruct->add_option("--grid", grid_path, "Also write a comparison grid PNG");

  auto* evaluate = app.add_subcommand("evaluate", "Gap sweep over the test split");
  add_common(evaluate, common, false);
  evaluate->add_option("--bank", bank_dir, "Bank directory")->required();
  evaluate->add_option("--weights", weights_path, "Weights CSV")->required();
  evaluate->add_option("--mode", mode, "single or multi")->check(CLI::IsMember({"single", "multi"}));
  evaluate->add_option("--out", out, "Report file (.csv or .md)");
  evaluate->add_option("--format", format, "csv, markdown or auto (by extension)")
      ->check(CLI::IsMember({"csv", "markdown", "auto"}));

  auto* ablate = app.add_subcommand("ablate", "Single- vs multi-view sweep with a delta table");
  add_common(ablate, common, false);
  ablate->add_option("--bank", bank_dir, "Bank directory")->required();
  ablate->add_option("--weights", weights_path, "Weights CSV")->required();
  ablate->add_option("--out", out, "Directory for single.csv, multi.csv and ablation.md");

  auto* grid = app.add_subcommand("grid", "Write a labeled comparison grid for one task");
  add_common(grid, common, false);
  grid->add_option("--bank", bank_dir, "Bank directory")->required();
  grid->add_option("--weights", weights_path, "Weights CSV")->required();
  grid->add_option("--task", task_text, "i=<index>,k=<gap>")->required();
  grid->add_option("--mode", mode, "single or multi")->check(CLI::IsMember({"single", "multi"}));
  grid->add_option("--out", out, "Grid PNG")->required();

  TaskSpec task;
  try {
    app.parse(argc, argv);
    if (!task_text.empty()) task = parse_task(task_text);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Experiment experiment;
    if (synth->parsed()) {
      if (seed >= 0) common.overrides.push_back("synth.seed=" + std::to_string(seed));
      common.overrides.push_back("data.source=synth");
      load_experiment(experiment, common);
      Store store;
      check(mvr_store_load(experiment.get(), store.out()));
      check(mvr_store_export(store.get(), out.c_str()));
      mvr_store_info info{};
      check(mvr_store_info_get(store.get(), &info));
      std::printf("wrote %zu frames x %d cameras (%dx%d) to %s\n", info.frame_count, info.n_cameras, info.width,
                  info.height, out.c_str());
      return 0;
    }
    if (ingest->parsed()) {
      load_experiment(experiment, common);
      Store store;
      check(mvr_store_load(experiment.get(), store.out()));
      mvr_store_info info{};
      check(mvr_store_info_get(store.get(), &info));
      std::printf("frames %zu (train %zu, val %zu, test %zu), %d cameras, %dx%d\n", info.frame_count, info.train_count,
                  info.val_count, info.test_count, info.n_cameras, info.width, info.height);
      if (!out.empty()) check(mvr_store_export(store.get(), out.c_str()));
      return 0;
    }
    if (train->parsed()) {
      load_experiment(experiment, common);
      Store store;
      check(mvr_store_load(experiment.get(), store.out()));
      Bank bank;
      check(mvr_train(experiment.get(), store.get(), source.c_str(), progress, &log_every, bank.out()));
      check(mvr_bank_save(bank.get(), out.c_str()));
      char* text = nullptr;
      check(mvr_experiment_text(experiment.get(), &text));
      write_text(fs::path(out) / "experiment.cfg", take(text));
      std::printf("trained %zu source model(s) into %s\n", mvr_bank_size(bank.get()), out.c_str());
      return 0;
    }

    load_experiment(experiment, common, bank_dir);
    Store store;
    check(mvr_store_load(experiment.get(), store.out()));
    Bank bank;
    check(mvr_bank_load(bank_dir.c_str(), bank.out()));

    if (calibrate->parsed()) {
      Weights weights;
      check(mvr_calibrate(experiment.get(), store.get(), bank.get(), weights.out()));
      check(mvr_weights_save(weights.get(), out.c_str()));
      char* text = nullptr;
      check(mvr_weights_text(weights.get(), &text));
      std::cout << take(text);
      return 0;
    }

    Weights weights;
    check(mvr_weights_load(weights_path.c_str(), weights.out()));

    if (reconstruct->parsed() || grid->parsed()) {
      std::string fused_path;
      if (reconstruct->parsed()) {
        fused_path = out.empty() ? "fused_i" + std::to_string(task.index) + "_k" + std::to_string(task.gap) + ".png" : out;
      } else {
        grid_path = out;
      }
      mvr_reconstruction result{};
      check(mvr_reconstruct(experiment.get(), store.get(), bank.get(), weights.get(), task.index, task.gap,
                            parse_mode(mode), fused_path.empty() ? nullptr : fused_path.c_str(),
                            grid_path.empty() ? nullptr : grid_path.c_str(), &result));
      if (!fused_path.empty()) std::printf("fused: %s\n", fused_path.c_str());
      if (!grid_path.empty()) std::printf("grid: %s\n", grid_path.c_str());
      std::printf("candidates: %d\n", result.n_candidates);
      if (result.has_ground_truth) std::printf("psnr: %.4f dB\nssim: %.6f\n", result.psnr, result.ssim);
      return 0;
    }

    if (evaluate->parsed()) {
      Report report;
      check(mvr_evaluate(experiment.get(), store.get(), bank.get(), weights.get(), parse_mode(mode), report.out()));
      char* md = nullptr;
      check(mvr_report_render(report.get(), MVR_MARKDOWN, &md));
      std::cout << take(md);
      if (!out.empty()) {
        const bool markdown = format == "markdown" || (format == "auto" && fs::path(out).extension() == ".md");
        char* text = nullptr;
        check(mvr_report_render(report.get(), markdown ? MVR_MARKDOWN : MVR_CSV, &text));
        write_text(out, take(text));
      }
      return 0;
    }

    if (ablate->parsed()) {
      Report single, multi;
      check(mvr_evaluate(experiment.get(), store.get(), bank.get(), weights.get(), MVR_SINGLE_VIEW, single.out()));
      check(mvr_evaluate(experiment.get(), store.get(), bank.get(), weights.get(), MVR_MULTI_VIEW, multi.out()));
      char* table = nullptr;
      check(mvr_ablation_render(single.get(), multi.get(), &table));
      const std::string ablation = take(table);
      std::cout << ablation;
      if (!out.empty()) {
        char* s = nullptr;
        char* m = nullptr;
        check(mvr_report_render(single.get(), MVR_CSV, &s));
        write_text(fs::path(out) / "single.csv", take(s));
        check(mvr_report_render(multi.get(), MVR_CSV, &m));
        write_text(fs::path(out) / "multi.csv", take(m));
        write_text(fs::path(out) / "ablation.md", ablation);
      }
      return 0;
    }
  } catch (const DomainFailure& f) {
    std::fprintf(stderr, "mvrecon: %s\n", f.message.c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mvrecon: %s\n", e.what());
    return 1;
  }
  return 2;
}
