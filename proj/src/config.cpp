#include "pillarcast/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace pillarcast {

using nlohmann::json;

namespace {

enum class FieldType { integer, real, boolean, text, u64, int_pair, real_pair, int_list };

struct FieldSpec {
  std::string path;
  FieldType type;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
  std::string doc;
};

template <typename T>
T checked_number(const json& v, const std::string& path) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
  } else {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
  }
  return v.get<T>();
}

std::vector<FieldSpec> build_schema() {
  std::vector<FieldSpec> f;

#define FIELD_NUM(PATH, REF, CPPT, DOC)                                     \
  f.push_back({PATH, std::is_same_v<CPPT, double> ? FieldType::real          \
                                                  : FieldType::integer,      \
               [](RunConfig& c, const json& v) {                             \
                 c.REF = checked_number<CPPT>(v, PATH);                      \
               },                                                            \
               [](const RunConfig& c) { return json(c.REF); }, DOC})

#define FIELD_BOOL(PATH, REF, DOC)                                           \
  f.push_back({PATH, FieldType::boolean,                                     \
               [](RunConfig& c, const json& v) {                             \
                 c.REF = checked_number<bool>(v, PATH);                      \
               },                                                            \
               [](const RunConfig& c) { return json(c.REF); }, DOC})

#define FIELD_TEXT(PATH, REF, DOC)                                           \
  f.push_back({PATH, FieldType::text,                                        \
               [](RunConfig& c, const json& v) {                             \
                 if (!v.is_string()) throw ConfigError(PATH ": expected a string"); \
                 c.REF = v.get<std::string>();                               \
               },                                                            \
               [](const RunConfig& c) { return json(c.REF); }, DOC})

  // shared scene layout
  FIELD_NUM("scene.t_in", t_in, int, "input timesteps per track (history length)");
  FIELD_NUM("scene.dt_in", dt_in, double, "input timestep spacing in seconds");
  FIELD_NUM("scene.horizon", horizon, int, "output timesteps T");
  FIELD_NUM("scene.horizon_seconds", horizon_seconds, double,
            "future horizon in seconds (linearly spaced waypoints)");
  FIELD_NUM("scene.fov", fov, double, "field-of-view half extent in meters");
  f.push_back({"seed", FieldType::u64,
               [](RunConfig& c, const json& v) {
                 if (!v.is_number_unsigned() && !v.is_number_integer())
                   throw ConfigError("seed: expected an integer");
                 c.seed = v.get<uint64_t>();
               },
               [](const RunConfig& c) { return json(c.seed); },
               "global seed (data generation, init, training order)"});

  // generator
  f.push_back({"generator.n_agents_range", FieldType::int_pair,
               [](RunConfig& c, const json& v) {
                 if (!v.is_array() || v.size() != 2)
                   throw ConfigError("generator.n_agents_range: expected [min, max]");
                 c.generator.n_agents_range = {v[0].get<int>(), v[1].get<int>()};
               },
               [](const RunConfig& c) {
                 return json::array({c.generator.n_agents_range[0],
                                     c.generator.n_agents_range[1]});
               },
               "inclusive agent-count range per scene (AV included)"});
  FIELD_NUM("generator.pedestrian_fraction", generator.pedestrian_fraction, double,
            "fraction of non-AV agents that are pedestrians");
  FIELD_NUM("generator.n_lanes", generator.n_lanes, int, "number of lanes");
  f.push_back({"generator.lane_geometry", FieldType::text,
               [](RunConfig& c, const json& v) {
                 if (!v.is_string())
                   throw ConfigError("generator.lane_geometry: expected a string");
                 c.generator.lane_geometry = lane_geometry_from_string(v.get<std::string>());
               },
               [](const RunConfig& c) { return json(to_string(c.generator.lane_geometry)); },
               "lane shape: straight | arc | mixed"});
  f.push_back({"generator.speed_range_vehicle", FieldType::real_pair,
               [](RunConfig& c, const json& v) {
                 if (!v.is_array() || v.size() != 2)
                   throw ConfigError("generator.speed_range_vehicle: expected [lo, hi]");
                 c.generator.speed_range_vehicle = {v[0].get<double>(), v[1].get<double>()};
               },
               [](const RunConfig& c) {
                 return json::array({c.generator.speed_range_vehicle[0],
                                     c.generator.speed_range_vehicle[1]});
               },
               "vehicle speed interval in m/s"});
  f.push_back({"generator.speed_range_pedestrian", FieldType::real_pair,
               [](RunConfig& c, const json& v) {
                 if (!v.is_array() || v.size() != 2)
                   throw ConfigError("generator.speed_range_pedestrian: expected [lo, hi]");
                 c.generator.speed_range_pedestrian = {v[0].get<double>(), v[1].get<double>()};
               },
               [](const RunConfig& c) {
                 return json::array({c.generator.speed_range_pedestrian[0],
                                     c.generator.speed_range_pedestrian[1]});
               },
               "pedestrian speed interval in m/s"});
  FIELD_NUM("generator.lane_sample_spacing", generator.lane_sample_spacing, double,
            "polyline sampling step for generated lanes (m)");
  FIELD_NUM("dataset.n_scenes", n_scenes, int, "scenes written by generate-data");

  // network
  FIELD_NUM("net.pillars_m", net.pillars_m, int, "pillar grid columns (x)");
  FIELD_NUM("net.pillars_n", net.pillars_n, int, "pillar grid rows (y)");
  FIELD_NUM("net.grid_w", net.grid_w, int, "occupancy grid width W");
  FIELD_NUM("net.grid_h", net.grid_h, int, "occupancy grid height H");
  FIELD_NUM("net.point_grid_u", net.point_grid_u, int,
            "box interior sample lattice along length");
  FIELD_NUM("net.point_grid_v", net.point_grid_v, int,
            "box interior sample lattice along width");
  FIELD_NUM("net.road_spacing", net.road_spacing, double,
            "road point resampling spacing (m)");
  FIELD_NUM("net.pillar_cap", net.pillar_cap, int,
            "max points kept per pillar (first-k, <= 0 disables)");
  FIELD_NUM("net.d_p", net.d_p, int, "per-point encoder output width");
  FIELD_NUM("net.backbone_channels", net.backbone_channels, int,
            "backbone conv channels");
  FIELD_NUM("net.backbone_blocks", net.backbone_blocks, int,
            "residual blocks in the backbone");
  FIELD_NUM("net.d_s", net.d_s, int, "shared scene feature channels");
  FIELD_NUM("net.occ_hidden", net.occ_hidden, int,
            "occupancy head hidden channels");
  FIELD_NUM("net.traj_hidden", net.traj_hidden, int,
            "trajectory head hidden width");
  FIELD_NUM("net.state_embed", net.state_embed, int,
            "agent state embedding width");
  FIELD_NUM("net.n_anchors", net.n_anchors, int, "anchor count K");
  FIELD_NUM("net.patch_half", net.patch_half, int,
            "agent patch half width (5 -> 11x11)");
  FIELD_BOOL("net.gaussian_regression", net.gaussian_regression,
             "regression loss: Gaussian NLL instead of squared L2");

  // loss weights
  FIELD_NUM("loss.lambda_o", loss.lambda_o, double, "occupancy loss weight");
  FIELD_NUM("loss.lambda_s", loss.lambda_s, double,
            "anchor classification loss weight");
  FIELD_NUM("loss.lambda_r", loss.lambda_r, double, "regression loss weight");
  FIELD_NUM("loss.lambda_c", loss.lambda_c, double, "consistency loss weight");

  // training
  FIELD_NUM("train.steps", train.steps, int, "optimizer steps");
  FIELD_NUM("train.batch_size", train.batch_size, int, "scenes per step");
  FIELD_NUM("train.lr", train.lr, double, "Adam learning rate");
  FIELD_NUM("train.grad_clip", train.grad_clip, double,
            "global gradient-norm clip threshold");
  FIELD_TEXT("train.variant", train.variant, "model variant: m_t | m_o | m_to");

  // eval
  FIELD_NUM("eval.n_thresholds", eval.n_thresholds, int,
            "PR-curve threshold count");
  FIELD_TEXT("eval.split", eval.split, "split label written to the metrics CSV");

  // bench
  f.push_back({"bench.sweep", FieldType::int_list,
               [](RunConfig& c, const json& v) {
                 if (!v.is_array() || v.empty())
                   throw ConfigError("bench.sweep: expected a non-empty array");
                 c.bench.sweep.clear();
                 for (const json& e : v) c.bench.sweep.push_back(e.get<int>());
               },
               [](const RunConfig& c) { return json(c.bench.sweep); },
               "agent counts for the latency sweep"});
  FIELD_NUM("bench.repetitions", bench.repetitions, int,
            "timed repetitions per sweep point (>= 20)");
  FIELD_NUM("bench.warmup", bench.warmup, int, "discarded warmup runs");
  FIELD_NUM("bench.road_points", bench.road_points, long,
            "road point count for analytic flops (0: estimate from generator)");

  // paths
  FIELD_TEXT("paths.data", paths.data, "scene dataset (JSON-lines)");
  FIELD_TEXT("paths.anchors", paths.anchors, "anchor-set JSON file");
  FIELD_TEXT("paths.checkpoint", paths.checkpoint, "model checkpoint file");
  FIELD_TEXT("paths.out", paths.out, "default output path/prefix");
  FIELD_TEXT("paths.log", paths.log, "training log CSV");

  FIELD_NUM("render.scene_index", render_scene_index, int,
            "dataset scene rendered by the render subcommand");

#undef FIELD_NUM
#undef FIELD_BOOL
#undef FIELD_TEXT
  return f;
}

const std::vector<FieldSpec>& schema() {
  static const std::vector<FieldSpec> s = build_schema();
  return s;
}

void apply_json(RunConfig& cfg, const json& doc, const std::string& prefix) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      apply_json(cfg, it.value(), path);
      continue;
    }
    bool found = false;
    for (const FieldSpec& field : schema()) {
      if (field.path == path) {
        field.set(cfg, it.value());
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown config field: " + path);
  }
}

}  // namespace

void RunConfig::finalize() {
  generator.t_in = t_in;
  generator.dt_in = dt_in;
  generator.horizon = horizon;
  generator.horizon_seconds = horizon_seconds;
  generator.fov = fov;
  generator.seed = seed;
  net.t_in = t_in;
  net.dt_in = dt_in;
  net.horizon = horizon;
  net.horizon_seconds = horizon_seconds;
  net.fov = fov;

  try {
    generator.validate();
    net.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (loss.lambda_o < 0 || loss.lambda_s < 0 || loss.lambda_r < 0 ||
      loss.lambda_c < 0)
    throw ConfigError("loss.*: weights must be non-negative");
  if (train.steps < 1) throw ConfigError("train.steps: must be >= 1");
  if (train.batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(train.lr > 0)) throw ConfigError("train.lr: must be positive");
  if (!(train.grad_clip > 0)) throw ConfigError("train.grad_clip: must be positive");
  variant_from_string(train.variant);  // throws on a bad name
  if (eval.n_thresholds < 2) throw ConfigError("eval.n_thresholds: must be >= 2");
  if (bench.sweep.empty()) throw ConfigError("bench.sweep: must be non-empty");
  for (size_t i = 1; i < bench.sweep.size(); ++i)
    if (bench.sweep[i] <= bench.sweep[i - 1])
      throw ConfigError("bench.sweep: agent counts must be strictly increasing");
  if (bench.repetitions < 20) throw ConfigError("bench.repetitions: must be >= 20");
  if (bench.warmup < 0) throw ConfigError("bench.warmup: must be >= 0");
  if (n_scenes < 1) throw ConfigError("dataset.n_scenes: must be >= 1");
  if (render_scene_index < 0) throw ConfigError("render.scene_index: must be >= 0");
}

RunConfig parse_config_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  try {
    apply_json(cfg, doc, "");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
  cfg.finalize();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str());
}

std::string config_schema_help() {
  const RunConfig defaults;
  std::string out = "Config fields (JSON document, defaults shown):\n";
  for (const FieldSpec& field : schema()) {
    out += "  " + field.path + " = " + field.get(defaults).dump() + "\n      " +
           field.doc + "\n";
  }
  return out;
}

}  // namespace pillarcast
