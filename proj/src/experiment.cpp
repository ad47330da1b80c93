#include "mvrecon/experiment.hpp"

#include <set>

#include "mvrecon/util.hpp"

namespace mvrecon {

namespace {

const char* kWhere = "config";

const std::set<std::string> kKeys = {
    "resolution", "cameras", "target_camera", "fps", "test_fraction", "val_fraction", "gaps",
    "activity_threshold", "grid_step", "psnr_cap", "threads", "dataset_id", "data.source", "data.root",
    "model.base_filters", "model.depth", "model.dropout_levels", "model.dropout_rate", "disc.base_filters",
    "disc.n_layers", "disc.norm", "train.lambda_l1", "train.learning_rate", "train.beta1", "train.beta2",
    "train.batch_size", "train.steps", "train.seed", "train.gap_schedule", "synth.canvas_size", "synth.n_objects",
    "synth.object_speed", "synth.object_radius", "synth.sequence_length", "synth.seed"};
const std::vector<std::string> kCameraPrefixes = {"offset.", "zone.", "synth.view.", "synth.brightness."};

CameraId parse_camera(const std::string& key, const std::string& suffix) {
  try {
    std::size_t used = 0;
    const int c = std::stoi(suffix, &used);
    if (used == suffix.size()) return c;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError, kWhere, "key '" + key + "' must end in a camera id");
}

int to_int(long v, const std::string& key) {
  if (v < INT32_MIN || v > INT32_MAX) throw Error(ErrorCode::ConfigError, kWhere, "key '" + key + "' is out of range");
  return int(v);
}

std::vector<int> int_list(const KeyValueConfig& cfg, const std::string& key, const std::vector<int>& fallback) {
  if (!cfg.has(key)) return fallback;
  std::vector<int> out;
  for (long v : cfg.get_ints(key, {})) out.push_back(to_int(v, key));
  return out;
}

}  // namespace

Experiment build_experiment(const KeyValueConfig& cfg) {
  for (const auto& [key, value] : cfg.values()) {
    bool known = kKeys.count(key) != 0;
    for (const auto& p : kCameraPrefixes) known = known || (key.rfind(p, 0) == 0 && key.size() > p.size());
    if (!known) throw Error(ErrorCode::ConfigError, kWhere, "unknown key '" + key + "'");
  }

  Experiment e;
  e.config = cfg;
  const std::string source = cfg.get_string("data.source", "synth");
  if (source == "synth") {
    e.data_source = DataSource::Synth;
  } else if (source == "frames") {
    e.data_source = DataSource::Frames;
  } else {
    throw Error(ErrorCode::ConfigError, kWhere, "data.source must be synth or frames");
  }
  e.data_root = cfg.get_string("data.root", "");
  if (e.data_source == DataSource::Frames && e.data_root.empty()) {
    throw Error(ErrorCode::ConfigError, kWhere, "data.root is required when data.source = frames");
  }
  e.dataset_id = cfg.get_string("dataset_id", e.data_source == DataSource::Synth ? "synthetic" : e.data_root.filename().string());

  RigSettings& rig = e.rig;
  rig.cameras = int_list(cfg, "cameras", {1, 2, 3});
  rig.target_camera = to_int(cfg.get_int("target_camera", 1), "target_camera");
  rig.fps = cfg.get_double("fps", 10.0);
  rig.resolution = to_int(cfg.get_int("resolution", 256), "resolution");
  for (const auto& [suffix, value] : cfg.with_prefix("offset.")) {
    rig.offsets_seconds[parse_camera("offset." + suffix, suffix)] = cfg.get_double("offset." + suffix, 0);
  }
  for (const auto& [suffix, value] : cfg.with_prefix("zone.")) {
    const auto v = cfg.get_ints("zone." + suffix, {});
    if (v.size() != 4) throw Error(ErrorCode::ConfigError, kWhere, "zone." + suffix + " needs x0,y0,x1,y1");
    rig.overlap_zones[parse_camera("zone." + suffix, suffix)] =
        Rect{to_int(v[0], "zone"), to_int(v[1], "zone"), to_int(v[2], "zone"), to_int(v[3], "zone")};
  }

  e.split.test_fraction = cfg.get_double("test_fraction", 0.2);
  e.split.val_fraction = cfg.get_double("val_fraction", 0.1);
  e.gaps = int_list(cfg, "gaps", e.gaps);
  e.activity_threshold = cfg.get_double("activity_threshold", 0.0);
  e.grid_step = cfg.get_double("grid_step", 0.05);
  e.psnr_cap = cfg.get_double("psnr_cap", 100.0);
  e.threads = to_int(cfg.get_int("threads", 1), "threads");
  if (e.threads < 0) throw Error(ErrorCode::ConfigError, kWhere, "threads must be >= 0");

  GeneratorSpec& g = e.generator;
  g.base_filters = to_int(cfg.get_int("model.base_filters", 64), "model.base_filters");
  g.depth = to_int(cfg.get_int("model.depth", 8), "model.depth");
  g.dropout_rate = cfg.get_double("model.dropout_rate", 0.5);
  if (auto levels = cfg.get("model.dropout_levels")) {
    if (*levels != "default") {
      std::set<int> s;
      if (*levels != "none") {
        for (int l : int_list(cfg, "model.dropout_levels", {})) s.insert(l);
      }
      g.dropout_levels = s;
    }
  }
  g.validate();

  DiscriminatorSpec& d = e.discriminator;
  d.base_filters = to_int(cfg.get_int("disc.base_filters", 64), "disc.base_filters");
  d.n_layers = to_int(cfg.get_int("disc.n_layers", 3), "disc.n_layers");
  const std::string norm = cfg.get_string("disc.norm", "none");
  if (norm == "none") {
    d.norm = DiscriminatorNorm::None;
  } else if (norm == "instance") {
    d.norm = DiscriminatorNorm::Instance;
  } else {
    throw Error(ErrorCode::ConfigError, kWhere, "disc.norm must be none or instance");
  }
  d.validate();

  TrainConfig& t = e.train;
  t.lambda_l1 = cfg.get_double("train.lambda_l1", t.lambda_l1);
  t.learning_rate = cfg.get_double("train.learning_rate", t.learning_rate);
  t.adam_beta1 = cfg.get_double("train.beta1", t.adam_beta1);
  t.adam_beta2 = cfg.get_double("train.beta2", t.adam_beta2);
  t.batch_size = to_int(cfg.get_int("train.batch_size", t.batch_size), "train.batch_size");
  t.steps = cfg.get_int("train.steps", 0);
  t.seed = cfg.get_uint("train.seed", 0);
  t.gap_schedule = int_list(cfg, "train.gap_schedule", t.gap_schedule);
  t.validate();

  SynthConfig& s = e.synth;
  s.cameras = rig.cameras;
  s.target_camera = rig.target_camera;
  s.offsets_seconds = rig.offsets_seconds;
  s.fps = rig.fps;
  s.resolution = rig.resolution;
  s.split = e.split;
  s.canvas_size = to_int(cfg.get_int("synth.canvas_size", s.resolution + s.resolution / 2), "synth.canvas_size");
  s.n_objects = to_int(cfg.get_int("synth.n_objects", s.n_objects), "synth.n_objects");
  s.object_speed = cfg.get_double("synth.object_speed", s.object_speed);
  s.object_radius = cfg.get_double("synth.object_radius", s.object_radius);
  s.sequence_length = to_int(cfg.get_int("synth.sequence_length", s.sequence_length), "synth.sequence_length");
  s.seed = cfg.get_uint("synth.seed", 0);
  for (const auto& [suffix, value] : cfg.with_prefix("synth.view.")) {
    const auto v = cfg.get_doubles("synth.view." + suffix, {});
    if (v.size() != 6) throw Error(ErrorCode::ConfigError, kWhere, "synth.view." + suffix + " needs a,b,c,d,tx,ty");
    s.view_transforms[parse_camera("synth.view." + suffix, suffix)] = ViewTransform{v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  for (const auto& [suffix, value] : cfg.with_prefix("synth.brightness.")) {
    s.brightness[parse_camera("synth.brightness." + suffix, suffix)] = cfg.get_double("synth.brightness." + suffix, 1.0);
  }
  if (e.data_source == DataSource::Synth) {
    s.validate();
  } else {
    CameraRig check(rig);
  }
  return e;
}

SequenceStore load_store(const Experiment& e) {
  if (e.data_source == DataSource::Synth) return synthesize(e.synth);
  CameraRig rig(e.rig);
  return ingest(default_camera_dirs(e.data_root, rig), rig, e.split);
}

KeyValueConfig rig_config(const CameraRig& rig) {
  KeyValueConfig cfg;
  std::string cams;
  for (CameraId c : rig.cameras()) cams += (cams.empty() ? "" : ",") + std::to_string(c);
  cfg.set("cameras", cams);
  cfg.set("target_camera", std::to_string(rig.target_camera()));
  cfg.set("fps", format_double(rig.fps()));
  cfg.set("resolution", std::to_string(rig.resolution()));
  for (CameraId c : rig.cameras()) {
    if (rig.offset_seconds(c) != 0.0) cfg.set("offset." + std::to_string(c), format_double(rig.offset_seconds(c)));
  }
  for (CameraId c : rig.reference_cameras()) {
    const Rect& z = rig.overlap_zone(c);
    cfg.set("zone." + std::to_string(c), std::to_string(z.x0) + "," + std::to_string(z.y0) + "," + std::to_string(z.x1) +
                                             "," + std::to_string(z.y1));
  }
  return cfg;
}

}  // namespace mvrecon
