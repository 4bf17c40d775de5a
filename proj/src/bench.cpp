#include "pillarcast/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "pillarcast/baseline.hpp"
#include "pillarcast/kernels.hpp"

// Debug-mode allocation counter: global new/delete are replaced so the timed
// regions can assert an allocation-free steady state.
#ifndef NDEBUG
namespace {
std::atomic<long long> g_alloc_count{0};
}

void* operator new(std::size_t size) {
  g_alloc_count.fetch_add(1, std::memory_order_relaxed);
  if (void* p = std::malloc(size)) return p;
  throw std::bad_alloc();
}

void operator delete(void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }

void* operator new[](std::size_t size) {
  g_alloc_count.fetch_add(1, std::memory_order_relaxed);
  if (void* p = std::malloc(size)) return p;
  throw std::bad_alloc();
}

void operator delete[](void* p) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }
#endif

namespace pillarcast {

long long allocation_count() {
#ifndef NDEBUG
  return g_alloc_count.load(std::memory_order_relaxed);
#else
  return 0;
#endif
}

namespace {

long long agent_points(const NetConfig& cfg, int n_agents) {
  return static_cast<long long>(n_agents) * cfg.point_grid_u *
         cfg.point_grid_v * cfg.t_in;
}

long long traj_head_flops_per_agent(const NetConfig& cfg, bool with_patch) {
  const int patch = 2 * cfg.patch_half + 1;
  const long long in_dim = with_patch
                               ? static_cast<long long>(cfg.d_s) * patch * patch +
                                     cfg.state_embed
                               : static_cast<long long>(cfg.d_p) + cfg.state_embed;
  return static_cast<long long>(cfg.state_dim()) * cfg.state_embed +
         in_dim * cfg.traj_hidden +
         static_cast<long long>(cfg.traj_hidden) * cfg.traj_out_dim();
}

}  // namespace

FlopReport count_flops(const NetConfig& cfg, int n_agents, long road_points,
                       long light_points) {
  cfg.validate();
  FlopReport report;
  const int d_aug = cfg.layout().d_in + kPillarAugDims;
  const long long points = agent_points(cfg, n_agents) + road_points + light_points;
  report.per_point_fc = points * d_aug * cfg.d_p;

  const long long mn = static_cast<long long>(cfg.pillars_m) * cfg.pillars_n;
  const long long wh = static_cast<long long>(cfg.grid_w) * cfg.grid_h;
  long long backbone = mn * cfg.backbone_channels * cfg.d_p * 9;  // in conv
  backbone += 2LL * cfg.backbone_blocks * mn * cfg.backbone_channels *
              cfg.backbone_channels * 9;
  backbone += wh * cfg.d_s * (cfg.backbone_channels + 1);  // 1x1 fuse
  report.backbone = backbone;

  report.occupancy_head =
      static_cast<long long>(cfg.horizon) *
      (wh * cfg.occ_hidden * (cfg.d_s + 1) * 9 +
       wh * cfg.n_classes() * cfg.occ_hidden);

  report.trajectory_head =
      static_cast<long long>(n_agents) * traj_head_flops_per_agent(cfg, true);
  return report;
}

FlopReport count_flops_baseline(const NetConfig& cfg, int n_agents,
                                long road_points, long light_points) {
  cfg.validate();
  FlopReport report;
  const int d_in = cfg.layout().d_in;
  const long long points = agent_points(cfg, n_agents) + road_points + light_points;
  report.per_point_fc =
      static_cast<long long>(n_agents) * points * d_in * cfg.d_p;
  report.trajectory_head =
      static_cast<long long>(n_agents) * traj_head_flops_per_agent(cfg, false);
  return report;
}

std::string machine_descriptor() {
  std::string model = "unknown-cpu";
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      const size_t colon = line.find(':');
      if (colon != std::string::npos) {
        model = line.substr(colon + 2);
        break;
      }
    }
  }
  return model + " / " + std::to_string(std::thread::hardware_concurrency()) +
         " hw threads / single-threaded timing";
}

namespace {

using Clock = std::chrono::steady_clock;

double clock_tick_seconds() {
  const auto start = Clock::now();
  auto next = start;
  while (next == start) next = Clock::now();
  return std::chrono::duration<double>(next - start).count();
}

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double pos = q * (values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

LatencyCurve measure_latency(BenchModel model, const NetConfig& net_cfg,
                             const GeneratorConfig& gen_cfg,
                             const BenchConfig& bench_cfg) {
  if (bench_cfg.repetitions < 20)
    throw MeasurementError("latency repetitions must be >= 20");
  LatencyCurve curve;
  curve.model = model;
  curve.repetitions = bench_cfg.repetitions;
  curve.machine = machine_descriptor();

  const double tick = clock_tick_seconds();
  const FeatureLayout layout = net_cfg.layout();

  ForecastNet net(net_cfg, bench_cfg.seed);
  AgentCentricBaseline baseline(net_cfg, bench_cfg.seed);
  nn::Tape<float> tape;
  ForwardContext<float> ctx(tape, net.params());
  SceneForward fwd;

  std::vector<double> runs(bench_cfg.repetitions);

  for (int n_agents : bench_cfg.sweep) {
    GeneratorConfig g = gen_cfg;
    g.n_agents_range = {n_agents, n_agents};
    g.t_in = net_cfg.t_in;
    g.dt_in = net_cfg.dt_in;
    g.horizon = net_cfg.horizon;
    g.horizon_seconds = net_cfg.horizon_seconds;
    g.fov = net_cfg.fov;
    g.seed = bench_cfg.seed;
    const Scene scene = generate_scene(g, 0);

    // input preparation shared by both models, outside the timed region
    const FeaturePointSet points = build_input(
        scene, layout,
        {net_cfg.point_grid_u, net_cfg.point_grid_v, net_cfg.road_spacing});
    SceneInputs<float> inputs = prepare_scene<float>(scene, net_cfg, nullptr);

    kernels::SerialGuard serial;
    auto run_once = [&] {
      if (model == BenchModel::whole_scene) {
        ctx.begin();
        forward_scene_on_tape(ctx, inputs, false, true, true, fwd);
      } else {
        baseline.forward_latency_pass(scene, points);
      }
    };

    for (int i = 0; i < bench_cfg.warmup; ++i) run_once();

#ifndef NDEBUG
    const long long allocs_before = allocation_count();
#endif
    for (int i = 0; i < bench_cfg.repetitions; ++i) {
      const auto start = Clock::now();
      run_once();
      const auto stop = Clock::now();
      const double seconds = std::chrono::duration<double>(stop - start).count();
      if (seconds < 10.0 * tick)
        throw MeasurementError(
            "timer resolution insufficient: run took " +
            std::to_string(seconds) + " s vs tick " + std::to_string(tick));
      runs[i] = seconds * 1e3;
    }
#ifndef NDEBUG
    assert(allocation_count() == allocs_before &&
           "timed region must be allocation-free in steady state");
#endif

    curve.agent_counts.push_back(n_agents);
    curve.median_ms.push_back(percentile(runs, 0.5));
    curve.p95_ms.push_back(percentile(runs, 0.95));
  }
  return curve;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need >= 2 matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

ScalingReport compare_scaling(const LatencyCurve& whole,
                              const LatencyCurve& agent_centric,
                              const NetConfig& cfg, long road_points,
                              long light_points,
                              const ScalingThresholds& thresholds) {
  if (whole.agent_counts != agent_centric.agent_counts)
    throw std::invalid_argument("compare_scaling: sweep mismatch");
  if (whole.agent_counts.empty())
    throw std::invalid_argument("compare_scaling: empty sweep");

  ScalingReport report;
  const size_t last = whole.agent_counts.size() - 1;
  report.whole_scene_ratio = whole.median_ms[last] / whole.median_ms[0];
  report.baseline_ratio =
      agent_centric.median_ms[last] / agent_centric.median_ms[0];

  std::vector<double> xs(whole.agent_counts.begin(), whole.agent_counts.end());
  const LinearFit fit = fit_line(xs, agent_centric.median_ms);
  report.baseline_r2 = fit.r_squared;

  // analytic flop counts across the same sweep
  std::vector<FlopReport> whole_flops, base_flops;
  for (int n : whole.agent_counts) {
    whole_flops.push_back(count_flops(cfg, n, road_points, light_points));
    base_flops.push_back(count_flops_baseline(cfg, n, road_points, light_points));
  }
  report.flops_backbone_constant = true;
  for (const FlopReport& f : whole_flops)
    if (f.backbone != whole_flops[0].backbone ||
        f.occupancy_head != whole_flops[0].occupancy_head)
      report.flops_backbone_constant = false;
  report.flops_ratio = static_cast<double>(whole_flops[last].total()) /
                       static_cast<double>(whole_flops[0].total());

  report.whole_scene_ratio_ok =
      report.whole_scene_ratio <= thresholds.whole_scene_ratio_max;
  report.baseline_ratio_ok = report.baseline_ratio >= thresholds.baseline_ratio_min;
  report.baseline_linear_ok = report.baseline_r2 > thresholds.baseline_r2_min;
  report.flops_ratio_ok = report.flops_ratio <= thresholds.flops_ratio_max;

  // CSV
  std::string csv =
      "model,n_agents,median_ms,p95_ms,flops_total,flops_backbone,"
      "flops_per_point,flops_heads\n";
  char buf[256];
  for (size_t i = 0; i < whole.agent_counts.size(); ++i) {
    const FlopReport& f = whole_flops[i];
    std::snprintf(buf, sizeof(buf), "whole_scene,%d,%.6f,%.6f,%lld,%lld,%lld,%lld\n",
                  whole.agent_counts[i], whole.median_ms[i], whole.p95_ms[i],
                  f.total(), f.backbone, f.per_point_fc,
                  f.trajectory_head + f.occupancy_head);
    csv += buf;
  }
  for (size_t i = 0; i < agent_centric.agent_counts.size(); ++i) {
    const FlopReport& f = base_flops[i];
    std::snprintf(buf, sizeof(buf),
                  "agent_centric,%d,%.6f,%.6f,%lld,%lld,%lld,%lld\n",
                  agent_centric.agent_counts[i], agent_centric.median_ms[i],
                  agent_centric.p95_ms[i], f.total(), f.backbone,
                  f.per_point_fc, f.trajectory_head + f.occupancy_head);
    csv += buf;
  }
  report.csv = csv;

  // summary
  std::string s;
  std::snprintf(buf, sizeof(buf),
                "whole-scene median latency ratio (%d -> %d agents): %.3f "
                "(max %.2f) [%s]\n",
                whole.agent_counts[0], whole.agent_counts[last],
                report.whole_scene_ratio, thresholds.whole_scene_ratio_max,
                report.whole_scene_ratio_ok ? "pass" : "FAIL");
  s += buf;
  std::snprintf(buf, sizeof(buf),
                "agent-centric latency ratio: %.2fx (min %.1fx) [%s]\n",
                report.baseline_ratio, thresholds.baseline_ratio_min,
                report.baseline_ratio_ok ? "pass" : "FAIL");
  s += buf;
  std::snprintf(buf, sizeof(buf),
                "agent-centric linear fit: slope %.6f ms/agent, R^2 %.4f "
                "(min %.2f) [%s]\n",
                fit.slope, report.baseline_r2, thresholds.baseline_r2_min,
                report.baseline_linear_ok ? "pass" : "FAIL");
  s += buf;
  std::snprintf(buf, sizeof(buf), "backbone+occupancy flops constant: %s\n",
                report.flops_backbone_constant ? "pass" : "FAIL");
  s += buf;
  std::snprintf(buf, sizeof(buf),
                "whole-scene flops ratio %d -> %d agents: %.4f (max %.2f) [%s]\n",
                whole.agent_counts[0], whole.agent_counts[last],
                report.flops_ratio, thresholds.flops_ratio_max,
                report.flops_ratio_ok ? "pass" : "FAIL");
  s += buf;
  s += "machine: " + whole.machine + "\n";
  report.summary = s;

  // plot data
  std::string j = "{\n  \"series\": [\n";
  auto series = [&](const char* name, const std::vector<int>& x,
                    const std::vector<double>& y, bool last_series) {
    std::string out = "    {\"name\": \"";
    out += name;
    out += "\", \"x\": [";
    for (size_t i = 0; i < x.size(); ++i)
      out += std::to_string(x[i]) + (i + 1 < x.size() ? "," : "");
    out += "], \"y\": [";
    for (size_t i = 0; i < y.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6f", y[i]);
      out += std::string(buf) + (i + 1 < y.size() ? "," : "");
    }
    out += last_series ? "]}\n" : "]},\n";
    return out;
  };
  j += series("whole_scene_median_ms", whole.agent_counts, whole.median_ms, false);
  j += series("agent_centric_median_ms", agent_centric.agent_counts,
              agent_centric.median_ms, true);
  j += "  ]\n}\n";
  report.plot_json = j;
  return report;
}

void write_scaling_report(const ScalingReport& report,
                          const std::string& out_prefix) {
  const std::filesystem::path prefix(out_prefix);
  if (prefix.has_parent_path())
    std::filesystem::create_directories(prefix.parent_path());
  auto write = [](const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
  };
  write(out_prefix + "_scaling.csv", report.csv);
  write(out_prefix + "_summary.txt", report.summary);
  write(out_prefix + "_plot.json", report.plot_json);
}

}  // namespace pillarcast
