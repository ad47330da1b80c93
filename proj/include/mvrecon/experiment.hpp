#pragma once

// Typed view of a key-value experiment config. Recognized keys:
//
//   resolution, cameras, target_camera, fps, offset.<cam>, zone.<cam>
//   test_fraction, val_fraction, gaps, activity_threshold, grid_step,
//   psnr_cap, threads, dataset_id, data.source (synth|frames), data.root
//   model.base_filters, model.depth, model.dropout_levels, model.dropout_rate
//   disc.base_filters, disc.n_layers, disc.norm (none|instance)
//   train.lambda_l1, train.learning_rate, train.beta1, train.beta2,
//   train.batch_size, train.steps, train.seed, train.gap_schedule
//   synth.canvas_size, synth.n_objects, synth.object_speed,
//   synth.object_radius, synth.sequence_length, synth.seed,
//   synth.view.<cam> (a,b,c,d,tx,ty), synth.brightness.<cam>
//
// Unknown keys are rejected so typos do not silently fall back to defaults.

#include <filesystem>
#include <string>
#include <vector>

#include "mvrecon/config.hpp"
#include "mvrecon/data.hpp"
#include "mvrecon/model.hpp"
#include "mvrecon/training.hpp"

namespace mvrecon {

enum class DataSource { Synth, Frames };

struct Experiment {
  KeyValueConfig config;
  DataSource data_source = DataSource::Synth;
  std::filesystem::path data_root;
  std::string dataset_id;
  RigSettings rig;
  SplitConfig split;
  SynthConfig synth;
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  TrainConfig train;
  std::vector<int> gaps{1, 3, 5, 7, 15, 30};
  double activity_threshold = 0.0;
  double grid_step = 0.05;
  double psnr_cap = 100.0;
  int threads = 1;
};

Experiment build_experiment(const KeyValueConfig& config);

// Synthesizes or ingests the sequence the experiment describes.
SequenceStore load_store(const Experiment& experiment);

// Rig keys (cameras, offsets, zones, ...) describing `rig`, suitable for a
// frames-source config over exported data.
KeyValueConfig rig_config(const CameraRig& rig);

}  // namespace mvrecon
