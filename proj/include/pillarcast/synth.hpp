#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "pillarcast/scene.hpp"

namespace pillarcast {

enum class LaneGeometry { straight = 0, arc = 1, mixed = 2 };

const char* to_string(LaneGeometry g);
LaneGeometry lane_geometry_from_string(const std::string& s);

struct GeneratorConfig {
  std::array<int, 2> n_agents_range{8, 16};  // inclusive, includes the AV
  double pedestrian_fraction{0.4};
  int n_lanes{4};
  LaneGeometry lane_geometry{LaneGeometry::mixed};
  std::array<double, 2> speed_range_vehicle{3.0, 9.0};    // m/s
  std::array<double, 2> speed_range_pedestrian{0.8, 1.8}; // m/s
  double fov{80.0};
  uint64_t seed{7};

  // Temporal layout of the generated tracks.
  int t_in{10};
  double dt_in{0.1};            // input spacing (s)
  int horizon{10};              // output timesteps
  double horizon_seconds{6.0};  // futures linearly spaced up to this time

  double lane_sample_spacing{1.0};  // polyline sampling step (m)

  void validate() const;  // throws std::invalid_argument on contradiction
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic: (cfg, index) fully determines the scene. The returned scene
/// is AV-centered and passes validate_scene.
Scene generate_scene(const GeneratorConfig& cfg, int index);

/// Writes n_scenes scenes (indices 0..n_scenes-1) as JSON-lines.
void generate_dataset(const GeneratorConfig& cfg, int n_scenes,
                      const std::string& path);

}  // namespace pillarcast
