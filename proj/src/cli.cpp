#include "pillarcast/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pillarcast/baseline.hpp"
#include "pillarcast/bench.hpp"
#include "pillarcast/config.hpp"
#include "pillarcast/scene_io.hpp"
#include "pillarcast/train.hpp"

namespace pillarcast::cli {

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out;
  uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool out_required) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  auto* seed = cmd->add_option("--seed", flags.seed, "seed override");
  seed->each([&flags](const std::string&) { flags.seed_set = true; });
  auto* out = cmd->add_option("--out", flags.out, "output path override");
  if (out_required) out->required();
}

RunConfig load(const CommonFlags& flags) {
  RunConfig cfg = flags.config_path.empty() ? RunConfig{} : load_config(flags.config_path);
  if (flags.config_path.empty()) cfg.finalize();
  if (flags.seed_set) {
    cfg.seed = flags.seed;
    cfg.finalize();
  }
  if (!flags.out.empty()) cfg.paths.out = flags.out;
  return cfg;
}

long estimate_road_points(const RunConfig& cfg) {
  if (cfg.bench.road_points > 0) return cfg.bench.road_points;
  // straight lanes emit a center line plus two edges
  const GeneratorConfig& g = cfg.generator;
  const double lane_len = 2.0 * (g.fov + 10.0);
  const double polylines_per_lane = g.lane_geometry == LaneGeometry::arc ? 1.0 : 2.0;
  return static_cast<long>(g.n_lanes * polylines_per_lane * lane_len /
                           cfg.net.road_spacing);
}

int cmd_generate_data(const CommonFlags& flags) {
  RunConfig cfg = load(flags);
  const std::string out = !cfg.paths.out.empty() ? cfg.paths.out : cfg.paths.data;
  if (out.empty()) throw ConfigError("generate-data: --out or paths.data required");
  generate_dataset(cfg.generator, cfg.n_scenes, out);
  std::printf("wrote %d scenes to %s\n", cfg.n_scenes, out.c_str());
  return 0;
}

int cmd_cluster_anchors(const CommonFlags& flags, const std::string& data_flag) {
  RunConfig cfg = load(flags);
  const std::string data = !data_flag.empty() ? data_flag : cfg.paths.data;
  if (data.empty()) throw ConfigError("cluster-anchors: --data or paths.data required");
  const std::string out = !cfg.paths.out.empty() ? cfg.paths.out : cfg.paths.anchors;
  if (out.empty()) throw ConfigError("cluster-anchors: --out or paths.anchors required");
  const std::vector<Scene> scenes = read_dataset(data);
  const ClassAnchors anchors =
      cluster_class_anchors(scenes, cfg.net.n_anchors, cfg.seed);
  save_anchors(anchors, out);
  std::printf("clustered %d anchors per class from %zu scenes into %s\n",
              cfg.net.n_anchors, scenes.size(), out.c_str());
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& data_flag,
              const std::string& anchors_flag, const std::string& variant_flag,
              const std::string& log_flag, int steps_flag) {
  RunConfig cfg = load(flags);
  if (!variant_flag.empty()) cfg.train.variant = variant_flag;
  if (steps_flag > 0) cfg.train.steps = steps_flag;
  const std::string data = !data_flag.empty() ? data_flag : cfg.paths.data;
  const std::string anchors_path =
      !anchors_flag.empty() ? anchors_flag : cfg.paths.anchors;
  const std::string out =
      !cfg.paths.out.empty() ? cfg.paths.out : cfg.paths.checkpoint;
  if (data.empty()) throw ConfigError("train: --data or paths.data required");
  if (anchors_path.empty())
    throw ConfigError("train: --anchors or paths.anchors required");
  if (out.empty()) throw ConfigError("train: --out or paths.checkpoint required");

  const std::vector<Scene> scenes = read_dataset(data);
  const ClassAnchors anchors = load_anchors(anchors_path);

  ForecastNet net(cfg.net, cfg.seed);
  TrainConfig tcfg;
  tcfg.steps = cfg.train.steps;
  tcfg.batch_size = cfg.train.batch_size;
  tcfg.lr = cfg.train.lr;
  tcfg.grad_clip = cfg.train.grad_clip;
  tcfg.seed = cfg.seed;
  tcfg.variant = variant_from_string(cfg.train.variant);
  tcfg.weights = cfg.loss;
  tcfg.log_path = !log_flag.empty() ? log_flag : cfg.paths.log;
  const std::vector<StepLosses> history = train_model(net, scenes, anchors, tcfg);
  nn::save_checkpoint(net.store(), out);
  std::printf("trained %s for %d steps; total loss %.6g -> %.6g; checkpoint %s\n",
              cfg.train.variant.c_str(), tcfg.steps, history.front().total,
              history.back().total, out.c_str());
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& data_flag,
             const std::string& anchors_flag, const std::string& ckpt_flag,
             const std::string& variant_flag, const std::string& split_flag) {
  RunConfig cfg = load(flags);
  const std::string data = !data_flag.empty() ? data_flag : cfg.paths.data;
  const std::string anchors_path =
      !anchors_flag.empty() ? anchors_flag : cfg.paths.anchors;
  const std::string ckpt = !ckpt_flag.empty() ? ckpt_flag : cfg.paths.checkpoint;
  const std::string out = cfg.paths.out;
  if (data.empty() || anchors_path.empty() || ckpt.empty() || out.empty())
    throw ConfigError("eval: needs data, anchors, checkpoint and out paths");

  const std::vector<Scene> scenes = read_dataset(data);
  const ClassAnchors anchors = load_anchors(anchors_path);
  ForecastNet net(cfg.net, cfg.seed);
  nn::load_checkpoint(net.store(), ckpt);

  EvalOptions opt;
  opt.n_thresholds = cfg.eval.n_thresholds;
  opt.split = !split_flag.empty() ? split_flag : cfg.eval.split;
  opt.variant = !variant_flag.empty() ? variant_flag : cfg.train.variant;
  const EvalResult result = evaluate_model(net, scenes, anchors, opt);
  write_metrics_csv(out, result.rows);
  std::printf("eval over %zu scenes: minADE_%d %.4f m, CE %.4f; wrote %s\n",
              scenes.size(), cfg.net.n_anchors, result.traj.min_ade_k[2],
              result.ce, out.c_str());
  return 0;
}

int cmd_bench(const CommonFlags& flags) {
  RunConfig cfg = load(flags);
  const std::string out = cfg.paths.out.empty() ? "bench" : cfg.paths.out;
  BenchConfig bcfg;
  bcfg.sweep = cfg.bench.sweep;
  bcfg.repetitions = cfg.bench.repetitions;
  bcfg.warmup = cfg.bench.warmup;
  bcfg.seed = cfg.seed;
  const LatencyCurve whole =
      measure_latency(BenchModel::whole_scene, cfg.net, cfg.generator, bcfg);
  const LatencyCurve agent =
      measure_latency(BenchModel::agent_centric, cfg.net, cfg.generator, bcfg);
  const ScalingReport report =
      compare_scaling(whole, agent, cfg.net, estimate_road_points(cfg), 0);
  write_scaling_report(report, out);
  std::fputs(report.summary.c_str(), stdout);
  std::printf("wrote %s_scaling.csv, %s_summary.txt, %s_plot.json\n",
              out.c_str(), out.c_str(), out.c_str());
  return 0;
}

int cmd_render(const CommonFlags& flags, const std::string& data_flag,
               const std::string& anchors_flag, const std::string& ckpt_flag,
               int scene_flag) {
  RunConfig cfg = load(flags);
  const std::string data = !data_flag.empty() ? data_flag : cfg.paths.data;
  const std::string anchors_path =
      !anchors_flag.empty() ? anchors_flag : cfg.paths.anchors;
  const std::string ckpt = !ckpt_flag.empty() ? ckpt_flag : cfg.paths.checkpoint;
  const std::string out = cfg.paths.out.empty() ? "render_out" : cfg.paths.out;
  if (data.empty() || anchors_path.empty() || ckpt.empty())
    throw ConfigError("render: needs data, anchors and checkpoint paths");
  const int index = scene_flag >= 0 ? scene_flag : cfg.render_scene_index;

  const std::vector<Scene> scenes = read_dataset(data);
  if (index >= static_cast<int>(scenes.size()))
    throw ConfigError("render: scene index " + std::to_string(index) +
                      " out of range (dataset has " +
                      std::to_string(scenes.size()) + ")");
  const ClassAnchors anchors = load_anchors(anchors_path);
  ForecastNet net(cfg.net, cfg.seed);
  nn::load_checkpoint(net.store(), ckpt);

  SceneInputs<float> inputs = prepare_scene<float>(scenes[index], cfg.net, &anchors);
  nn::Tape<float> tape;
  ForwardContext<float> ctx(tape, net.params());
  ctx.begin();
  const SceneForward fwd = net.forward_scene(ctx, inputs, false, true, true);

  OccupancyGrids occ(cfg.net.grid_spec(), cfg.net.n_classes(), cfg.net.horizon);
  const size_t cells = occ.cells_per_grid();
  for (int t = 0; t < cfg.net.horizon; ++t) {
    const float* probs = tape.value(fwd.occ_probs[t]);
    for (int a = 0; a < cfg.net.n_classes(); ++a) {
      double* g = occ.grid(a, t);
      for (size_t i = 0; i < cells; ++i)
        g[i] = static_cast<double>(probs[static_cast<size_t>(a) * cells + i]);
    }
  }
  write_occupancy_pgms(out, occ);

  const std::vector<AgentPrediction> preds =
      net.decode_predictions(tape, inputs, fwd, anchors);
  nlohmann::json j;
  j["scene_index"] = index;
  nlohmann::json agents = nlohmann::json::array();
  for (const AgentPrediction& p : preds) {
    nlohmann::json ja;
    ja["agent_id"] = p.agent_id;
    ja["agent_class"] = to_string(p.agent_class);
    nlohmann::json probs = nlohmann::json::array();
    nlohmann::json trajs = nlohmann::json::array();
    for (const TrajectoryHypothesis& hyp : p.trajectories) {
      probs.push_back(hyp.probability);
      nlohmann::json wps = nlohmann::json::array();
      for (const WaypointGaussian& wp : hyp.waypoints)
        wps.push_back({wp.mean.x, wp.mean.y});
      trajs.push_back(std::move(wps));
    }
    ja["probabilities"] = std::move(probs);
    ja["trajectories"] = std::move(trajs);
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  std::ofstream jf(out + "/trajectories.json", std::ios::binary);
  if (!jf) throw std::runtime_error("cannot write " + out + "/trajectories.json");
  jf << j.dump(2) << '\n';
  std::printf("rendered scene %d into %s (%d PGM grids + trajectories.json)\n",
              index, out.c_str(), cfg.net.n_classes() * cfg.net.horizon);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"pillarcast: sparse whole-scene motion forecasting engine"};
  app.footer(config_schema_help());
  app.require_subcommand(1);

  CommonFlags gen_flags, anchor_flags, train_flags, eval_flags, bench_flags,
      render_flags;
  std::string anchor_data, train_data, train_anchors, train_variant, train_log;
  std::string eval_data, eval_anchors, eval_ckpt, eval_variant, eval_split;
  std::string render_data, render_anchors, render_ckpt;
  int train_steps = -1, render_scene = -1;

  CLI::App* gen = app.add_subcommand("generate-data",
                                     "write a synthetic JSON-lines dataset");
  add_common(gen, gen_flags, false);

  CLI::App* ca = app.add_subcommand("cluster-anchors",
                                    "k-means anchor trajectories per class");
  add_common(ca, anchor_flags, false);
  ca->add_option("--data", anchor_data, "training dataset");

  CLI::App* tr = app.add_subcommand("train", "train a model variant");
  add_common(tr, train_flags, false);
  tr->add_option("--data", train_data, "training dataset");
  tr->add_option("--anchors", train_anchors, "anchor file");
  tr->add_option("--variant", train_variant, "m_t | m_o | m_to");
  tr->add_option("--log", train_log, "training-log CSV path");
  tr->add_option("--steps", train_steps, "step count override");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev, eval_flags, true);
  ev->add_option("--data", eval_data, "evaluation dataset");
  ev->add_option("--anchors", eval_anchors, "anchor file");
  ev->add_option("--ckpt", eval_ckpt, "checkpoint file");
  ev->add_option("--variant", eval_variant, "variant label for the CSV");
  ev->add_option("--split", eval_split, "split label for the CSV");

  CLI::App* be = app.add_subcommand("bench", "latency + flops scaling sweep");
  add_common(be, bench_flags, false);

  CLI::App* re = app.add_subcommand("render",
                                    "dump PGM occupancy grids and trajectories");
  add_common(re, render_flags, false);
  re->add_option("--data", render_data, "dataset");
  re->add_option("--anchors", render_anchors, "anchor file");
  re->add_option("--ckpt", render_ckpt, "checkpoint file");
  re->add_option("--scene", render_scene, "scene index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate_data(gen_flags);
    if (ca->parsed()) return cmd_cluster_anchors(anchor_flags, anchor_data);
    if (tr->parsed())
      return cmd_train(train_flags, train_data, train_anchors, train_variant,
                       train_log, train_steps);
    if (ev->parsed())
      return cmd_eval(eval_flags, eval_data, eval_anchors, eval_ckpt,
                      eval_variant, eval_split);
    if (be->parsed()) return cmd_bench(bench_flags);
    if (re->parsed())
      return cmd_render(render_flags, render_data, render_anchors, render_ckpt,
                        render_scene);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}

}  // namespace pillarcast::cli
