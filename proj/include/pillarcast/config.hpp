#pragma once

#include <string>
#include <vector>

#include "pillarcast/model.hpp"
#include "pillarcast/synth.hpp"

namespace pillarcast {

/// One structured config document for every subcommand; flags only override
/// paths, seeds and outputs. Shared scene fields (timing, fov) are stated
/// once and mirrored into the generator and network configs.
struct RunConfig {
  // scene layout shared by generator and network
  int t_in{10};
  double dt_in{0.1};
  int horizon{10};
  double horizon_seconds{6.0};
  double fov{80.0};

  uint64_t seed{7};

  GeneratorConfig generator;  // scene fields overwritten by finalize()
  NetConfig net;
  LossWeights loss;

  struct Train {
    int steps{2000};
    int batch_size{8};
    double lr{4e-4};
    double grad_clip{0.1};
    std::string variant{"m_to"};
  } train;

  struct Eval {
    int n_thresholds{101};
    std::string split{"eval"};
  } eval;

  struct Bench {
    std::vector<int> sweep{16, 32, 64, 128, 256};
    int repetitions{50};
    int warmup{5};
    long road_points{0};  // 0: estimated from the generator config
  } bench;

  struct Paths {
    std::string data;
    std::string anchors;
    std::string checkpoint;
    std::string out;
    std::string log;
  } paths;

  int n_scenes{32};
  int render_scene_index{0};

  /// Copies the shared scene fields into generator/net and validates
  /// everything; throws ConfigError with a field path on contradiction.
  void finalize();
};

/// Parses a config JSON document over the defaults. Unknown keys are
/// rejected with their full path.
RunConfig parse_config_json(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// One line per schema field: path, default and description (generated from
/// the schema itself).
std::string config_schema_help();

}  // namespace pillarcast
