#pragma once

#include <string>
#include <vector>

#include "pillarcast/scene.hpp"

namespace pillarcast {

constexpr int kSceneSchemaVersion = 1;

/// Scene <-> single-line JSON (the JSON-lines dataset format).
std::string scene_to_json_line(const Scene& scene);
Scene scene_from_json_line(const std::string& line);

void write_dataset(const std::string& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_dataset(const std::string& path);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pillarcast
