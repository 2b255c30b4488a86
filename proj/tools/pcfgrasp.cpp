// Command-line entry point wiring the full pipeline:
//   scenegen -> view -> complete -> features -> train/propose -> filter -> eval
// plus kernel benchmarks. Every failure prints one machine-parsable JSON line
// on stderr and exits 1.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcf/bench.hpp"
#include "pcf/pcf.hpp"

#ifndef PCFGRASP_GIT_REVISION
#define PCFGRASP_GIT_REVISION "unknown"
#endif

namespace {

using namespace pcf;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Provenance make_provenance(const std::string& config_string, uint64_t seed) {
  return {hex64(fnv1a(config_string)), seed, PCFGRASP_GIT_REVISION};
}

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct SceneGenArgs {
  std::string out;
  std::string object = "cylinder";
  uint64_t seed = 7;
  size_t labels = 2000;
  double friction_deg = 21.8;
};

Scene build_scene(const SceneGenArgs& args) {
  Rng rng(args.seed);
  Scene scene;
  Primitive p;
  const double yaw = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  p.pose.R = axis_angle({0.0, 0.0, 1.0}, yaw);
  std::string kind = args.object;
  if (kind == "random") {
    const char* kinds[] = {"cylinder", "box", "sphere"};
    kind = kinds[rng() % 3];
  }
  if (kind == "cylinder") {
    p.kind = Primitive::Kind::cylinder;
    const double r = uniform(rng, 0.025, 0.035);
    const double h = uniform(rng, 0.10, 0.14);
    p.params = {r, h};
    p.pose.t = {0.0, 0.0, h / 2.0};
  } else if (kind == "box") {
    p.kind = Primitive::Kind::box;
    const double sx = uniform(rng, 0.04, 0.06);
    const double sy = uniform(rng, 0.05, 0.07);
    const double sz = uniform(rng, 0.10, 0.14);
    p.params = {sx, sy, sz};
    p.pose.t = {0.0, 0.0, sz / 2.0};
  } else if (kind == "sphere") {
    p.kind = Primitive::Kind::sphere;
    const double r = uniform(rng, 0.03, 0.038);
    p.params = {r};
    p.pose.t = {0.0, 0.0, r};
  } else {
    throw Error::argument("unknown object kind '" + kind + "'");
  }
  scene.objects.push_back(p);
  GripperModel gripper;
  scene.labels = gen_antipodal_labels(scene, args.labels, deg2rad(args.friction_deg), rng, gripper);
  return scene;
}

int run(int argc, char** argv) {
  CLI::App app{"point-completion-feature grasping pipeline"};
  app.set_config("--config", "", "key=value config file; command-line flags win");
  app.require_subcommand(1);

  // scenegen
  SceneGenArgs sg;
  auto* scenegen = app.add_subcommand("scenegen", "generate a synthetic labeled scene");
  scenegen->add_option("--out", sg.out, "scene JSON output")->required();
  scenegen->add_option("--object", sg.object, "cylinder|box|sphere|random");
  scenegen->add_option("--seed", sg.seed, "rng seed");
  scenegen->add_option("--labels", sg.labels, "antipodal label budget");
  scenegen->add_option("--friction-deg", sg.friction_deg, "friction cone half-angle");

  // view
  struct {
    std::string scene, out, view_out;
    uint64_t seed = 7;
    double distance = 0.45, azimuth_deg = 0.0, elevation_deg = 25.0;
    int res = 240;
    bool random_azimuth = false;
  } vw;
  auto* view_cmd = app.add_subcommand("view", "render a single-view 2.5D cloud");
  view_cmd->add_option("--scene", vw.scene, "scene JSON")->required();
  view_cmd->add_option("--out", vw.out, "cloud PLY output")->required();
  view_cmd->add_option("--view-out", vw.view_out, "camera spec JSON output");
  view_cmd->add_option("--seed", vw.seed, "rng seed");
  view_cmd->add_option("--distance", vw.distance, "camera distance (m)");
  view_cmd->add_option("--azimuth-deg", vw.azimuth_deg, "camera azimuth");
  view_cmd->add_flag("--random-azimuth", vw.random_azimuth, "draw azimuth from the seed");
  view_cmd->add_option("--elevation-deg", vw.elevation_deg, "camera elevation");
  view_cmd->add_option("--res", vw.res, "image resolution");

  // complete
  struct {
    std::string in, out, original_out, provider = "mirror";
    size_t n = 1024;
    size_t fps_start = 0;
  } cp;
  auto* complete_cmd = app.add_subcommand("complete", "produce completion points for a view");
  complete_cmd->add_option("--in", cp.in, "input cloud PLY")->required();
  complete_cmd->add_option("--out", cp.out, "completion PLY output")->required();
  complete_cmd->add_option("--original-out", cp.original_out, "write the sampled original points");
  complete_cmd->add_option("--completion", cp.provider, "mirror or file:<path>");
  complete_cmd->add_option("--n", cp.n, "point count");
  complete_cmd->add_option("--fps-start", cp.fps_start, "seed index for sampling");

  // features
  struct {
    std::string original, completion, out, checkpoint;
    uint64_t seed = 7;
  } ft;
  auto* features_cmd = app.add_subcommand("features", "compute the per-point shape feature");
  features_cmd->add_option("--original", ft.original, "original points PLY")->required();
  features_cmd->add_option("--completion", ft.completion, "completion PLY")->required();
  features_cmd->add_option("--out", ft.out, "feature matrix output")->required();
  features_cmd->add_option("--checkpoint", ft.checkpoint, "parameter checkpoint (random if absent)");
  features_cmd->add_option("--seed", ft.seed, "init seed when no checkpoint is given");

  // train
  struct {
    std::string scene, view, out, metrics;
    uint64_t seed = 7;
    size_t steps = 200;
    std::string profile = "mini";
    double lr = 1e-4, weight_decay = 5e-4;
    bool stop_score_grad = false;
    std::string pose_distance = "sum";
    size_t fps_start = 0;
  } tr;
  auto* train_cmd = app.add_subcommand("train", "train on one scene");
  train_cmd->add_option("--scene", tr.scene, "scene JSON")->required();
  train_cmd->add_option("--view", tr.view, "view JSON")->required();
  train_cmd->add_option("--out", tr.out, "checkpoint output")->required();
  train_cmd->add_option("--metrics", tr.metrics, "JSON-lines metrics output");
  train_cmd->add_option("--steps", tr.steps, "training steps");
  train_cmd->add_option("--seed", tr.seed, "rng seed");
  train_cmd->add_option("--profile", tr.profile, "mini or paper");
  train_cmd->add_option("--lr", tr.lr, "learning rate");
  train_cmd->add_option("--weight-decay", tr.weight_decay, "decoupled weight decay");
  train_cmd->add_flag("--stop-score-grad", tr.stop_score_grad,
                      "treat the score as a constant weight in the pose loss");
  train_cmd->add_option("--pose-distance", tr.pose_distance, "sum or stacked");
  train_cmd->add_option("--fps-start", tr.fps_start, "seed index for point sampling");

  // propose
  struct {
    std::string cloud, checkpoint, out, provider = "mirror";
    std::string profile = "mini";
    size_t max = 1024;
    size_t fps_start = 0;
    uint64_t seed = 7;
  } pr;
  auto* propose_cmd = app.add_subcommand("propose", "predict grasps for a view cloud");
  propose_cmd->add_option("--cloud", pr.cloud, "view cloud PLY")->required();
  propose_cmd->add_option("--checkpoint", pr.checkpoint, "parameter checkpoint")->required();
  propose_cmd->add_option("--out", pr.out, "grasps JSON output")->required();
  propose_cmd->add_option("--completion", pr.provider, "mirror or file:<path>");
  propose_cmd->add_option("--profile", pr.profile, "mini or paper");
  propose_cmd->add_option("--max", pr.max, "maximum candidates to keep");
  propose_cmd->add_option("--fps-start", pr.fps_start, "seed index for point sampling");
  propose_cmd->add_option("--seed", pr.seed, "provenance seed");

  // filter
  struct {
    std::string grasps, frame, out;
  } fl;
  auto* filter_cmd = app.add_subcommand("filter", "re-rank grasps by robot direction");
  filter_cmd->add_option("--grasps", fl.grasps, "grasps JSON")->required();
  filter_cmd->add_option("--frame", fl.frame, "robot frame JSON")->required();
  filter_cmd->add_option("--out", fl.out, "filtered grasps JSON output")->required();

  // eval
  struct {
    std::string grasps, scene, view, cloud, out;
    size_t k = 20;
    double translation = 0.02, rotation_deg = 15.0;
  } ev;
  auto* eval_cmd = app.add_subcommand("eval", "score proposals against labels");
  eval_cmd->add_option("--grasps", ev.grasps, "grasps JSON")->required();
  eval_cmd->add_option("--scene", ev.scene, "scene JSON")->required();
  eval_cmd->add_option("--view", ev.view, "view JSON")->required();
  eval_cmd->add_option("--cloud", ev.cloud, "view cloud PLY")->required();
  eval_cmd->add_option("--out", ev.out, "metrics JSON output")->required();
  eval_cmd->add_option("--k", ev.k, "precision cutoff");
  eval_cmd->add_option("--translation", ev.translation, "match translation threshold (m)");
  eval_cmd->add_option("--rotation-deg", ev.rotation_deg, "match rotation threshold");

  // bench
  struct {
    std::string kernel = "fps", out;
    size_t n = 20000, m = 2048, fanout = 64, repeats = 10;
    double radius = 0.08;
    uint64_t seed = 7;
  } bn;
  auto* bench_cmd = app.add_subcommand("bench", "time a kernel");
  bench_cmd->add_option("--kernel", bn.kernel, "fps|query_ball|pcf_forward");
  bench_cmd->add_option("--out", bn.out, "bench record JSON output");
  bench_cmd->add_option("--n", bn.n, "source point count");
  bench_cmd->add_option("--m", bn.m, "samples / centers");
  bench_cmd->add_option("--radius", bn.radius, "ball radius");
  bench_cmd->add_option("--fanout", bn.fanout, "ball fan-out");
  bench_cmd->add_option("--repeats", bn.repeats, "timing repetitions (>= 10)");
  bench_cmd->add_option("--seed", bn.seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  std::string flat;
  for (int i = 1; i < argc; ++i) {
    flat += argv[i];
    flat += ' ';
  }

  if (scenegen->parsed()) {
    const Scene scene = build_scene(sg);
    save_json(sg.out, to_json(scene));
    std::cout << "scene with " << scene.labels.size() << " labels -> " << sg.out << "\n";
    return 0;
  }

  if (view_cmd->parsed()) {
    const Scene scene = scene_from_json(load_json(vw.scene));
    Rng rng(vw.seed);
    double azimuth = deg2rad(vw.azimuth_deg);
    if (vw.random_azimuth) azimuth = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    Vec3 target;
    for (const auto& o : scene.objects) target += o.pose.t;
    target = target / static_cast<double>(scene.objects.size());
    const ViewSpec view =
        make_orbit_view(target, vw.distance, azimuth, deg2rad(vw.elevation_deg), vw.res);
    const Cloud cloud = render_view(scene, view, rng);
    save_ply(vw.out, cloud);
    if (!vw.view_out.empty()) save_json(vw.view_out, to_json(view));
    std::cout << cloud.size() << " visible points -> " << vw.out << "\n";
    return 0;
  }

  if (complete_cmd->parsed()) {
    Cloud input = load_ply(cp.in);
    Cloud original =
        input.size() == cp.n ? input : sample_original_points(input, cp.n, cp.fps_start);
    original.normals.clear();
    auto provider = make_completion_provider(cp.provider);
    const Cloud completion =
        provider->complete({original, camera_view_dir(original), cp.n});
    save_ply(cp.out, completion);
    if (!cp.original_out.empty()) save_ply(cp.original_out, original);
    std::cout << completion.size() << " completion points -> " << cp.out << "\n";
    return 0;
  }

  if (features_cmd->parsed()) {
    Cloud original = load_ply(ft.original);
    original.normals.clear();
    Cloud completion = load_ply(ft.completion);
    completion.normals.clear();
    PcfConfig cfg;
    ParamStore params;
    if (!ft.checkpoint.empty()) {
      params = load_checkpoint(ft.checkpoint);
    } else {
      Rng rng(ft.seed);
      params = init_pcf_params(cfg, rng);
    }
    const FeatureMatrix f =
        pcf_forward(original, concat_points(original, completion), cfg, ParamView(params));
    save_feature_matrix(ft.out, f);
    std::cout << f.rows() << "x" << f.cols() << " feature matrix -> " << ft.out << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    PipelineConfig cfg = tr.profile == "paper" ? PipelineConfig{} : mini_pipeline_config();
    cfg.seed = tr.seed;
    cfg.fps_start = tr.fps_start;
    cfg.net.lr = tr.lr;
    cfg.net.weight_decay = tr.weight_decay;
    cfg.net.stop_score_grad = tr.stop_score_grad;
    cfg.net.pose_distance =
        tr.pose_distance == "stacked" ? PoseDistance::stacked : PoseDistance::sum;

    const Scene scene = scene_from_json(load_json(tr.scene));
    const ViewSpec view = view_from_json(load_json(tr.view));
    Rng rng(cfg.seed);
    MirrorProvider provider;
    const TrainScene train_scene = prepare_train_scene(scene, view, cfg, provider, rng);
    Trainer trainer = Trainer::make(cfg.pcf, cfg.net, cfg.gripper, cfg.seed);

    std::ofstream metrics;
    if (!tr.metrics.empty()) {
      metrics.open(tr.metrics);
      if (!metrics) throw Error::io("cannot open for writing: " + tr.metrics);
    }
    const TrainScene batch[] = {train_scene};
    for (size_t step = 0; step < tr.steps; ++step) {
      const LossBreakdown bd = train_step(trainer, batch);
      if (metrics.is_open())
        metrics << Json({{"step", step},
                         {"l_bce", bd.bce},
                         {"l_adds", bd.adds},
                         {"l_width", bd.width},
                         {"l_total", bd.total}})
                       .dump()
                << "\n";
      if (step == 0 || (step + 1) % 50 == 0 || step + 1 == tr.steps)
        std::cout << "step " << step << " total " << bd.total << " (bce " << bd.bce << " adds "
                  << bd.adds << " width " << bd.width << ")\n";
    }
    save_checkpoint(tr.out, trainer.params);
    std::cout << "checkpoint -> " << tr.out << "\n";
    return 0;
  }

  if (propose_cmd->parsed()) {
    PipelineConfig cfg = pr.profile == "paper" ? PipelineConfig{} : mini_pipeline_config();
    cfg.fps_start = pr.fps_start;
    const ParamStore params = load_checkpoint(pr.checkpoint);
    const Cloud cloud = load_ply(pr.cloud);
    auto provider = make_completion_provider(pr.provider);
    DecodedGrasps decoded = propose_grasps(cloud, cfg, params, *provider);
    std::vector<GraspPose> grasps = std::move(decoded.poses);
    std::stable_sort(grasps.begin(), grasps.end(),
                     [](const GraspPose& a, const GraspPose& b) { return a.score > b.score; });
    if (grasps.size() > pr.max) grasps.resize(pr.max);
    save_json(pr.out, grasps_to_json(grasps, make_provenance(flat, pr.seed)));
    std::cout << grasps.size() << " grasps (" << decoded.degenerate_count << " degenerate) -> "
              << pr.out << "\n";
    return 0;
  }

  if (filter_cmd->parsed()) {
    const Json in = load_json(fl.grasps);
    const std::vector<GraspPose> grasps = grasps_from_json(in);
    const RobotFrame frame = robot_frame_from_json(load_json(fl.frame));
    const std::vector<FilteredGrasp> filtered = apply_filter(grasps, frame);
    Provenance prov = make_provenance(flat, 0);
    save_json(fl.out, filtered_to_json(filtered, prov));
    std::cout << filtered.size() << " grasps re-ranked -> " << fl.out << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    const std::vector<GraspPose> grasps = grasps_from_json(load_json(ev.grasps));
    const Scene scene = scene_from_json(load_json(ev.scene));
    const ViewSpec view = view_from_json(load_json(ev.view));
    const Cloud cloud = load_ply(ev.cloud);
    const Rigid world_to_cam = view.camera_to_world.inverse();
    std::vector<LabeledGrasp> cam_labels;
    cam_labels.reserve(scene.labels.size());
    for (const auto& l : scene.labels)
      cam_labels.push_back({transform_contact(world_to_cam, l.grasp), l.quality});
    const EvalThresholds thresholds{ev.translation, ev.rotation_deg, ev.k};
    GripperModel gripper;
    const EvalMetrics metrics = evaluate(grasps, cam_labels, cloud, thresholds, gripper);
    save_json(ev.out, to_json(metrics));
    std::cout << "precision@" << ev.k << " " << metrics.precision_at_k << ", coverage "
              << metrics.coverage << ", collision rate " << metrics.collision_rate << "\n";
    return 0;
  }

  if (bench_cmd->parsed()) {
    BenchRecord rec;
    if (bn.kernel == "fps")
      rec = bench_fps(bn.n, bn.m, bn.repeats, bn.seed);
    else if (bn.kernel == "query_ball")
      rec = bench_query_ball(bn.n, bn.m, bn.radius, bn.fanout, bn.repeats, bn.seed);
    else if (bn.kernel == "pcf_forward")
      rec = bench_pcf_forward(bn.m == 2048 ? 1024 : bn.m, bn.repeats, bn.seed);
    else
      throw Error::argument("unknown kernel '" + bn.kernel + "'");
    const Json j = to_json(rec);
    if (!bn.out.empty()) save_json(bn.out, j);
    std::cout << j.dump() << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pcf::Error& e) {
    std::cerr << pcf::Json({{"code", e.code()}, {"message", e.what()}}).dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << pcf::Json({{"code", "INTERNAL"}, {"message", e.what()}}).dump() << "\n";
    return 1;
  }
}
