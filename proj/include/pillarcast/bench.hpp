#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pillarcast/model.hpp"
#include "pillarcast/synth.hpp"

namespace pillarcast {

struct MeasurementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Closed-form multiply-add counts per stage for one forward pass.
struct FlopReport {
  long long per_point_fc{0};
  long long backbone{0};
  long long trajectory_head{0};
  long long occupancy_head{0};

  long long total() const {
    return per_point_fc + backbone + trajectory_head + occupancy_head;
  }
};

/// Whole-scene model counts: the per-point stage scales with the point count
/// (grid_u*grid_v*t_in per agent plus road/light points); backbone and
/// occupancy head depend only on grid shapes; the trajectory head is linear
/// in the agent count.
FlopReport count_flops(const NetConfig& cfg, int n_agents,
                       long road_points = 0, long light_points = 0);

/// Agent-centric baseline counts: every agent re-encodes the whole point set.
FlopReport count_flops_baseline(const NetConfig& cfg, int n_agents,
                                long road_points = 0, long light_points = 0);

enum class BenchModel { whole_scene, agent_centric };

struct LatencyCurve {
  BenchModel model{BenchModel::whole_scene};
  std::vector<int> agent_counts;
  std::vector<double> median_ms;
  std::vector<double> p95_ms;
  int repetitions{0};
  std::string machine;
};

struct BenchConfig {
  std::vector<int> sweep{16, 32, 64, 128, 256};
  int repetitions{50};
  int warmup{5};
  uint64_t seed{11};
};

/// Single-threaded forward-pass wall clock per scene; W warmup runs are
/// discarded, median/p95 over R repetitions. Scenes are generated once per
/// sweep point (identical for both models) with exactly n agents. Buffers are
/// warmed so the timed region is allocation-free in steady state. Throws
/// MeasurementError when the clock cannot resolve a run.
LatencyCurve measure_latency(BenchModel model, const NetConfig& net_cfg,
                             const GeneratorConfig& gen_cfg,
                             const BenchConfig& bench_cfg);

/// Least-squares fit y = a + b x. Returns {intercept, slope, r_squared}.
struct LinearFit {
  double intercept{0}, slope{0}, r_squared{0};
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingThresholds {
  double whole_scene_ratio_max{1.3};  // 16 -> 256 agents latency
  double baseline_ratio_min{8.0};
  double baseline_r2_min{0.95};
  double flops_ratio_max{1.1};
};

struct ScalingReport {
  std::string csv;       // model,n_agents,median_ms,p95_ms,flops_*
  std::string summary;   // human-readable pass/fail lines
  std::string plot_json; // x/y series for external plotting
  bool whole_scene_ratio_ok{false};
  bool baseline_linear_ok{false};
  bool baseline_ratio_ok{false};
  bool flops_backbone_constant{false};
  bool flops_ratio_ok{false};
  double whole_scene_ratio{0};
  double baseline_ratio{0};
  double baseline_r2{0};
  double flops_ratio{0};
};

/// Deterministic report from measured curves and analytic flop counts; both
/// curves must cover the same sweep.
ScalingReport compare_scaling(const LatencyCurve& whole,
                              const LatencyCurve& agent_centric,
                              const NetConfig& cfg, long road_points,
                              long light_points,
                              const ScalingThresholds& thresholds = {});

void write_scaling_report(const ScalingReport& report,
                          const std::string& out_prefix);

/// Allocation counter hook (active in debug builds, see bench.cpp).
long long allocation_count();

std::string machine_descriptor();

}  // namespace pillarcast
