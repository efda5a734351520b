#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "splatba/errors.hpp"
#include "splatba/gradcheck.hpp"
#include "splatba/io.hpp"
#include "splatba/metrics.hpp"
#include "splatba/rng.hpp"

namespace splatba::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::string frame_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// JSON cannot hold +inf; an exact image match is reported as the string "inf".
nlohmann::json psnr_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ArgumentError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw ArgumentError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot write " + path.string());
  f << text;
}

nlohmann::json load_json_arg(const std::string& arg) {
  if (!fs::exists(arg)) throw ArgumentError("no such file: " + arg);
  return io::read_json(arg);
}

// Ground truth for evaluation: frames, poses, depths and alphas of a directory.
GeneratedScene scene_from_dir(const fs::path& dir) { return ground_truth_from_sequence(load_sequence(dir)); }

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec;
  std::string out;
  std::uint64_t seed = 0;
  bool no_timestamp = false;
  std::vector<std::string> sets;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  nlohmann::json spec_json = load_json_arg(a.spec);
  for (const auto& s : a.sets) apply_override(spec_json, s);
  const SceneSpec spec = scene_spec_from_json(spec_json);
  ensure_writable_dir(a.out);
  const GeneratedScene scene = generate_scene(spec, a.seed);
  nlohmann::json manifest = {{"schema_version", 1},
                             {"kind", "synthetic"},
                             {"seed", a.seed},
                             {"spec", scene_spec_to_json(spec)},
                             {"frames", scene.images.size()},
                             {"scene_scale", scene.scene_scale},
                             {"near", scene.near},
                             {"far", scene.far},
                             {"background", {scene.background.x(), scene.background.y(), scene.background.z()}}};
  if (!a.no_timestamp) manifest["timestamp"] = utc_timestamp();
  save_sequence(a.out, scene, manifest);
  out << "wrote " << scene.images.size() << " frames to " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  std::string scene;
  std::optional<int> camera;
  std::string pose;
  std::string out;
  bool depth = false;
  std::optional<double> fov_deg;
  int threads = 1;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const Sequence seq = load_sequence(a.scene);
  if (!seq.gaussians) throw ArgumentError("scene has no gaussians.bin: " + a.scene);
  CameraPose pose;
  if (a.camera) {
    if (!seq.poses) throw ArgumentError("scene has no poses.json");
    if (*a.camera < 0 || static_cast<std::size_t>(*a.camera) >= seq.poses->size()) {
      throw ArgumentError("camera index " + std::to_string(*a.camera) + " out of range (scene has " +
                          std::to_string(seq.poses->size()) + ")");
    }
    pose = (*seq.poses)[*a.camera];
  } else {
    pose = io::pose_from_json(load_json_arg(a.pose));
  }
  CameraIntrinsics K = seq.intrinsics;
  if (a.fov_deg) K = CameraIntrinsics::make(*a.fov_deg / kRadToDeg, K.width_px, K.height_px);
  RenderConfig rc;
  rc.threads = a.threads;
  const RenderOutput r = render(*seq.gaussians, Camera{K, pose}, K.width_px, K.height_px, seq.background, rc);
  const fs::path png(a.out);
  if (png.has_parent_path()) ensure_writable_dir(png.parent_path());
  io::write_png16(png, r.color);
  if (a.depth) io::write_pfm(fs::path(png).replace_extension(".pfm"), r.depth);
  if (a.camera) {
    const double p = psnr(quantize_16bit(r.color), seq.images[*a.camera]);
    if (std::isinf(p)) {
      out << "psnr vs frame " << *a.camera << ": exact\n";
    } else {
      out << "psnr vs frame " << *a.camera << ": " << p << "\n";
    }
  }
  return kOk;
}

// ---------------------------------------------------------------- ba

struct BaArgs {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::string> freeze;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool no_timestamp = false;
};

// Prediction sequence: renders of every view at the optimized cameras.
GeneratedScene prediction(const SceneParameters& p, const Vec3& background, const RenderConfig& rc) {
  const DecodedScene d = decode_scene(p);
  GeneratedScene pred;
  pred.gaussians = d.gaussians;
  pred.intrinsics = d.intrinsics.front();
  pred.poses = d.poses;
  pred.background = background;
  if (!p.context.empty()) {
    pred.near = p.context.front().depth.near;
    pred.far = p.context.front().depth.far;
  }
  for (std::size_t v = 0; v < p.view_count(); ++v) {
    const RenderState st = render_scene_view(d, v, background, rc);
    pred.images.push_back(st.output.color);
    pred.alphas.push_back(st.output.alpha);
    if (v < p.context.size()) {
      const DepthMap& dm = p.context[v].depth;
      Image depth(dm.width, dm.height, 1);
      depth.data = dm.activated();
      pred.depths.push_back(std::move(depth));
    } else {
      pred.depths.push_back(st.output.depth);
    }
  }
  return pred;
}

int cmd_ba(const BaArgs& a, std::ostream& out, std::ostream& err) {
  nlohmann::json j = load_json_arg(a.config);
  for (const auto& s : a.sets) apply_override(j, s);
  for (const auto& item : a.freeze) {
    for (const auto& name : split_list(item)) {
      param_class_from_name(name);
      j["ba"]["freeze"][name] = true;
    }
  }
  if (a.threads) j["ba"]["threads"] = *a.threads;
  if (a.seed) j["seed"] = *a.seed;
  if (!a.out.empty()) j["output"] = fs::absolute(a.out).string();
  const fs::path base = fs::absolute(a.config).parent_path();
  ExperimentConfig cfg = experiment_config_from_json(j, base);
  ensure_writable_dir(cfg.output);

  Rng root(cfg.seed);
  const std::uint64_t scene_seed = root.next();
  const std::uint64_t perturb_seed = root.next();
  if (!cfg.perturb_seed_given) cfg.setup.perturb_seed = perturb_seed;
  const GeneratedScene gt = cfg.scene ? generate_scene(*cfg.scene, scene_seed) : scene_from_dir(*cfg.dataset);
  const Experiment ex = build_experiment(gt, cfg.setup);

  if (cfg.snapshot_every > 0) fs::create_directories(cfg.output / "snapshots");
  std::vector<BAHistoryRow> rows;
  const auto observer = [&](const BAHistoryRow& row, const SceneParameters& params) {
    rows.push_back(row);
    if (cfg.snapshot_every > 0 && row.step % cfg.snapshot_every == 0) {
      io::write_json(cfg.output / "snapshots" / ("step_" + frame_name(row.step) + ".json"),
                     io::scene_parameters_to_json(params));
    }
  };
  BAResult result;
  try {
    result = run_photometric_ba(ex.problem, cfg.ba, observer);
  } catch (const DivergenceError& e) {
    write_text(cfg.output / "history.csv", history_csv(rows));
    err << "ba diverged: " << e.what() << "\n";
    return kDiverged;
  }

  write_text(cfg.output / "history.csv", history_csv(result.history));
  nlohmann::json params = io::scene_parameters_to_json(result.params);
  params["seed"] = cfg.seed;
  io::write_json(cfg.output / "params.json", params);

  RenderConfig rc = ex.problem.render;
  rc.threads = cfg.ba.threads;
  const GeneratedScene pred = prediction(result.params, ex.problem.background, rc);
  std::vector<std::string> roles;
  for (std::size_t v = 0; v < ex.view_frames.size(); ++v) {
    const auto& tv = ex.problem.target_views;
    roles.push_back(std::find(tv.begin(), tv.end(), v) != tv.end() ? "target" : "context");
  }
  nlohmann::json manifest = {{"schema_version", 1},
                             {"kind", "prediction"},
                             {"seed", cfg.seed},
                             {"source_frames", ex.view_frames},
                             {"roles", roles},
                             {"near", pred.near},
                             {"far", pred.far},
                             {"background", {pred.background.x(), pred.background.y(), pred.background.z()}}};
  if (!a.no_timestamp) manifest["timestamp"] = utc_timestamp();
  save_sequence(cfg.output / "pred", pred, manifest);

  EvalInputs in;
  in.pred = &pred;
  in.gt = &gt;
  in.source_frames = ex.view_frames;
  in.roles = roles;
  in.thresholds_deg = cfg.thresholds_deg;
  in.align_depth = cfg.align_depth;
  nlohmann::json report = evaluate(in);
  report["seed"] = cfg.seed;
  report["steps"] = result.history.empty() ? 0 : result.history.back().step;
  report["updates"] = result.updates;
  report["best_step"] = result.best_step;
  report["initial_loss"] = result.initial_loss;
  report["final_loss"] = result.final_loss;
  report["converged"] = result.converged;
  report["fov_deg"] = result.params.fov_rad * kRadToDeg;
  report["initial_fov_deg"] = ex.problem.init.fov_rad * kRadToDeg;
  report["gt_fov_deg"] = gt.intrinsics.fov_rad * kRadToDeg;
  if (!ex.heldout_frames.empty()) report["heldout_psnr"] = psnr_json(heldout_psnr(ex, result.params));
  if (!a.no_timestamp) report["timestamp"] = utc_timestamp();
  io::write_json(cfg.output / "eval.json", report);

  out << "ba: " << result.updates << " updates, loss " << result.initial_loss << " -> " << result.final_loss
      << " (best step " << result.best_step << "), output in " << cfg.output.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string thresholds = "5,10,20";
  bool no_align = false;
  std::string csv;
  std::string out;
  bool no_timestamp = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Sequence pred_seq = load_sequence(a.pred);
  const GeneratedScene pred = ground_truth_from_sequence(pred_seq);
  const GeneratedScene gt = scene_from_dir(a.gt);
  EvalInputs in;
  in.pred = &pred;
  in.gt = &gt;
  in.align_depth = !a.no_align;
  in.thresholds_deg.clear();
  for (const auto& t : split_list(a.thresholds)) {
    try {
      in.thresholds_deg.push_back(std::stod(t));
    } catch (const std::exception&) {
      throw ArgumentError("bad threshold '" + t + "'");
    }
  }
  if (pred_seq.manifest) {
    in.source_frames = pred_seq.manifest->value("source_frames", std::vector<int>{});
    in.roles = pred_seq.manifest->value("roles", std::vector<std::string>{});
  }
  std::vector<PoseErrorSample> pairs;
  nlohmann::json report = evaluate(in, &pairs);
  report["seed"] = pred_seq.manifest && pred_seq.manifest->contains("seed") ? pred_seq.manifest->at("seed") : nlohmann::json(nullptr);
  if (!a.no_timestamp) report["timestamp"] = utc_timestamp();
  if (!a.csv.empty()) {
    std::string csv = "pair,rot_err_deg,trans_err_deg,overall_deg\n";
    char buf[160];
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g\n", i, pairs[i].rot_err_deg, pairs[i].trans_err_deg,
                    pairs[i].overall_deg);
      csv += buf;
    }
    write_text(a.csv, csv);
  }
  if (a.out.empty()) {
    out << report.dump(2) << "\n";
  } else {
    io::write_json(a.out, report);
  }
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  GradcheckConfig cfg;
  std::string classes;
  std::string fault;
};

int cmd_gradcheck(GradcheckArgs a, std::ostream& out, std::ostream& err) {
  if (!a.classes.empty()) {
    a.cfg.classes.clear();
    for (const auto& name : split_list(a.classes)) {
      if (name == "pose") {
        a.cfg.classes.push_back(GradClass::kContextPose);
        a.cfg.classes.push_back(GradClass::kTargetPose);
      } else {
        a.cfg.classes.push_back(grad_class_from_name(name));
      }
    }
  }
  if (!a.fault.empty()) a.cfg.inject_fault = grad_class_from_name(a.fault);
  const GradcheckReport r = run_gradcheck(a.cfg);
  out << r.table();
  char line[96];
  std::snprintf(line, sizeof line, "%d scenes, %.2f s\n", r.scenes, r.seconds);
  out << line;
  if (r.passed()) return kOk;
  std::string failed;
  for (const auto& row : r.rows) {
    if (row.failed) failed += (failed.empty() ? "" : ", ") + std::string(grad_class_name(row.cls));
  }
  err << "gradient check failed: " << failed << "\n";
  return kCheckFailed;
}

// ---------------------------------------------------------------- curriculum

struct CurriculumArgs {
  CurriculumSchedule schedule;
  std::string shape = "linear";
  long long steps = 0;
  long long every = 100;
};

int cmd_curriculum(CurriculumArgs a, std::ostream& out) {
  if (a.shape == "staircase") {
    a.schedule.shape = CurriculumShape::kStaircase;
  } else if (a.shape != "linear") {
    throw ArgumentError("shape must be linear or staircase");
  }
  if (a.every < 1) throw ArgumentError("--every must be >= 1");
  a.schedule.validate();
  const long long last = a.steps > 0 ? a.steps : a.schedule.ramp_steps;
  out << "step,interval\n";
  for (long long s = 0; s <= last; s += a.every) out << s << "," << curriculum_interval(s, a.schedule) << "\n";
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------- config

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ArgumentError("--set expects key.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  nlohmann::json* node = &j;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) {
    if (key.empty()) throw ArgumentError("--set: empty key in '" + path + "'");
    keys.push_back(key);
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw ArgumentError("--set: '" + keys[i] + "' is not an object");
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  if (!node->is_object()) throw ArgumentError("--set: cannot assign into a non-object");
  (*node)[keys.back()] = value;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  static const std::set<std::string> known{"schema_version", "scene", "dataset", "setup", "ba",
                                           "eval", "output", "seed", "snapshot_every"};
  if (!j.is_object()) throw ArgumentError("experiment config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ArgumentError("experiment config: unknown field '" + key + "'");
  }
  if (j.value("schema_version", -1) != kExperimentConfigVersion) {
    throw ArgumentError("experiment config: schema_version must be " + std::to_string(kExperimentConfigVersion));
  }
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  try {
    ExperimentConfig c;
    if (j.contains("scene") == j.contains("dataset")) {
      throw ArgumentError("experiment config: give exactly one of 'scene' and 'dataset'");
    }
    if (j.contains("scene")) {
      const auto& s = j.at("scene");
      if (s.is_string()) {
        const fs::path p = resolve(s.get<std::string>());
        if (!fs::exists(p)) throw ArgumentError("experiment config: scene spec not found: " + p.string());
        c.scene = scene_spec_from_json(io::read_json(p));
      } else {
        c.scene = scene_spec_from_json(s);
      }
    } else {
      c.dataset = resolve(j.at("dataset").get<std::string>());
      if (!fs::is_directory(*c.dataset)) throw ArgumentError("experiment config: dataset not found: " + c.dataset->string());
    }
    if (j.contains("setup")) {
      c.setup = experiment_setup_from_json(j.at("setup"));
      c.perturb_seed_given = j.at("setup").contains("perturb_seed");
    }
    if (j.contains("ba")) c.ba = ba_config_from_json(j.at("ba"));
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      for (const auto& [key, value] : e.items()) {
        if (key != "thresholds_deg" && key != "align_depth") {
          throw ArgumentError("experiment config: unknown eval field '" + key + "'");
        }
      }
      c.thresholds_deg = e.value("thresholds_deg", c.thresholds_deg);
      c.align_depth = e.value("align_depth", c.align_depth);
      for (double t : c.thresholds_deg) {
        if (!(t > 0.0)) throw ArgumentError("experiment config: thresholds must be positive");
      }
    }
    c.output = resolve(j.value("output", std::string("out")));
    if (c.output.has_parent_path() && !fs::exists(c.output.parent_path())) {
      throw ArgumentError("experiment config: output parent does not exist: " + c.output.parent_path().string());
    }
    c.seed = j.value("seed", c.seed);
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
    if (c.snapshot_every < 0) throw ArgumentError("experiment config: snapshot_every must be >= 0");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("experiment config: ") + e.what());
  }
}

// ---------------------------------------------------------------- evaluation

nlohmann::json evaluate(const EvalInputs& in, std::vector<PoseErrorSample>* pairs) {
  const GeneratedScene& pred = *in.pred;
  const GeneratedScene& gt = *in.gt;
  const std::size_t n = pred.images.size();
  std::vector<int> src = in.source_frames;
  if (src.empty()) {
    if (n != gt.images.size()) {
      throw ArgumentError("eval: prediction has " + std::to_string(n) + " frames, ground truth " +
                          std::to_string(gt.images.size()));
    }
    for (std::size_t i = 0; i < n; ++i) src.push_back(static_cast<int>(i));
  }
  if (src.size() != n) throw ArgumentError("eval: source_frames does not match the prediction frame count");
  if (!in.roles.empty() && in.roles.size() != n) throw ArgumentError("eval: roles does not match the frame count");
  for (int f : src) {
    if (f < 0 || static_cast<std::size_t>(f) >= gt.images.size()) {
      throw ArgumentError("eval: source frame " + std::to_string(f) + " not in ground truth");
    }
  }
  auto is = [&](std::size_t i, const char* role) { return in.roles.empty() || in.roles[i] == role; };

  nlohmann::json report;
  report["schema_version"] = 1;
  report["frames"] = n;

  double psnr_sum = 0.0, ssim_sum = 0.0;
  int image_frames = 0, exact = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is(i, "target")) continue;
    const Image& g = gt.images[src[i]];
    if (pred.images[i].width != g.width || pred.images[i].height != g.height) {
      throw ArgumentError("eval: frame " + std::to_string(i) + " size differs from ground truth");
    }
    const double p = psnr(pred.images[i], g);
    if (std::isinf(p)) {
      ++exact;
    } else {
      psnr_sum += p;
    }
    ssim_sum += ssim(pred.images[i], g);
    ++image_frames;
  }
  if (image_frames == 0) {
    report["psnr"] = nullptr;
    report["ssim"] = nullptr;
  } else {
    report["psnr"] = exact == image_frames ? psnr_json(kPsnrExact) : nlohmann::json(psnr_sum / (image_frames - exact));
    report["ssim"] = ssim_sum / image_frames;
  }
  report["exact_frames"] = exact;

  nlohmann::json auc = nlohmann::json::object();
  if (pred.poses.size() == n && gt.poses.size() == gt.images.size() && n >= 2) {
    std::vector<CameraPose> gt_sel;
    for (int f : src) gt_sel.push_back(gt.poses[f]);
    const std::vector<PoseErrorSample> errs = relative_pose_errors(pred.poses, gt_sel);
    const std::vector<double> values = pose_auc(errs, in.thresholds_deg);
    for (std::size_t k = 0; k < values.size(); ++k) {
      char key[32];
      std::snprintf(key, sizeof key, "%g", in.thresholds_deg[k]);
      auc[key] = values[k];
    }
    if (pairs) *pairs = errs;
  } else {
    for (double t : in.thresholds_deg) {
      char key[32];
      std::snprintf(key, sizeof key, "%g", t);
      auc[key] = nullptr;
    }
  }
  report["auc"] = auc;

  report["rel"] = nullptr;
  report["tau"] = nullptr;
  if (pred.depths.size() == n && gt.depths.size() == gt.images.size()) {
    Image p_all(0, 1, 1), g_all(0, 1, 1);
    std::vector<std::uint8_t> mask;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is(i, "context")) continue;
      const Image& pd = pred.depths[i];
      const Image& gd = gt.depths[src[i]];
      if (pd.data.size() != gd.data.size()) throw ArgumentError("eval: depth map size differs from ground truth");
      const bool have_alpha = gt.alphas.size() == gt.images.size();
      for (std::size_t k = 0; k < gd.data.size(); ++k) {
        p_all.data.push_back(pd.data[k]);
        g_all.data.push_back(gd.data[k]);
        const bool covered = have_alpha ? gt.alphas[src[i]].data[k] > 0.5 : true;
        mask.push_back(covered && gd.data[k] > 0.0 ? 1 : 0);
      }
    }
    if (std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
      p_all.width = g_all.width = static_cast<int>(p_all.data.size());
      const DepthMetrics dm = depth_metrics(p_all, g_all, mask, in.align_depth);
      report["rel"] = dm.rel;
      report["tau"] = dm.tau;
    }
  }
  report["lpips"] = nullptr;  // needs a pretrained network; never substituted
  return report;
}

// ---------------------------------------------------------------- entry

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"splatba: photometric bundle adjustment on a differentiable Gaussian splatting renderer"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic scene and save it as a sequence");
  s->add_option("--spec", synth.spec, "scene spec JSON")->required();
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--seed", synth.seed, "generator seed");
  s->add_option("--set", synth.sets, "override a spec field: key.path=value");
  s->add_flag("--no-timestamp", synth.no_timestamp, "omit the timestamp from the manifest");

  RenderArgs rnd;
  auto* r = app.add_subcommand("render", "render a saved scene from a stored camera or a pose file");
  r->add_option("--scene", rnd.scene, "sequence directory with gaussians.bin")->required();
  auto* cam = r->add_option("--camera", rnd.camera, "index into poses.json");
  auto* pose = r->add_option("--pose", rnd.pose, "pose JSON {rotation, translation}");
  cam->excludes(pose);
  r->add_option("--out", rnd.out, "output PNG (16-bit)")->required();
  r->add_flag("--depth", rnd.depth, "also write the depth map as PFM next to the PNG");
  r->add_option("--fov-deg", rnd.fov_deg, "override the stored field of view");
  r->add_option("--threads", rnd.threads, "render threads (0 = all cores)");

  BaArgs ba;
  auto* b = app.add_subcommand("ba", "run photometric bundle adjustment from an experiment config");
  b->add_option("--config", ba.config, "experiment config JSON")->required();
  b->add_option("--set", ba.sets, "override a config field: key.path=value");
  b->add_option("--freeze", ba.freeze, "freeze parameter classes (depth, gaussian, pose, fov)");
  b->add_option("--threads", ba.threads, "render threads (0 = all cores)");
  b->add_option("--seed", ba.seed, "experiment seed");
  b->add_option("--out", ba.out, "output directory");
  b->add_flag("--no-timestamp", ba.no_timestamp, "omit timestamps from reports");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score a predicted sequence against ground truth");
  e->add_option("--pred", ev.pred, "predicted sequence directory")->required();
  e->add_option("--gt", ev.gt, "ground-truth sequence directory")->required();
  e->add_option("--thresholds", ev.thresholds, "AUC thresholds in degrees, comma separated");
  e->add_flag("--no-align", ev.no_align, "score depth without median scale alignment");
  e->add_option("--csv", ev.csv, "write per-pair pose errors");
  e->add_option("--out", ev.out, "report path (default: stdout)");
  e->add_flag("--no-timestamp", ev.no_timestamp, "omit the timestamp from the report");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
  g->add_option("--seed", gc.cfg.seed, "first scene seed");
  g->add_option("--scenes", gc.cfg.scenes, "number of random scenes");
  g->add_option("--size", gc.cfg.size, "target image side");
  g->add_option("--context-size", gc.cfg.context_size, "context view side");
  g->add_option("--samples", gc.cfg.samples, "entries per class per scene");
  g->add_option("--classes", gc.classes, "comma list: sh,opacity,scale,quat,depth,context-pose,target-pose,fov,pose");
  g->add_option("--inject-fault", gc.fault, "corrupt one class's analytic gradient (test hook)");
  g->add_option("--threads", gc.cfg.threads, "render threads");

  CurriculumArgs cu;
  auto* c = app.add_subcommand("curriculum", "print the context interval schedule");
  c->add_option("--start", cu.schedule.start, "initial interval");
  c->add_option("--end", cu.schedule.end, "final interval");
  c->add_option("--ramp", cu.schedule.ramp_steps, "steps to reach the final interval");
  c->add_option("--shape", cu.shape, "linear or staircase");
  c->add_option("--stairs", cu.schedule.stairs, "staircase levels");
  c->add_option("--steps", cu.steps, "last step to print (default: ramp)");
  c->add_option("--every", cu.every, "row spacing in steps");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    std::ostringstream o, x;
    const int code = app.exit(pe, o, x);
    out << o.str();
    err << x.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*r) {
      if (!rnd.camera && rnd.pose.empty()) throw ArgumentError("render: give --camera or --pose");
      return cmd_render(rnd, out);
    }
    if (*b) return cmd_ba(ba, out, err);
    if (*e) return cmd_eval(ev, out);
    if (*g) return cmd_gradcheck(gc, out, err);
    if (*c) return cmd_curriculum(cu, out);
  } catch (const DivergenceError& x) {
    err << "diverged: " << x.what() << "\n";
    return kDiverged;
  } catch (const ArgumentError& x) {
    err << "error: " << x.what() << "\n";
    return kUsage;
  } catch (const ParseError& x) {
    err << "error: " << x.what() << "\n";
    return kUsage;
  } catch (const UsageError& x) {
    err << "error: " << x.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& x) {
    err << "error: " << x.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& x) {
    err << "error: " << x.what() << "\n";
    return kUsage;
  } catch (const std::exception& x) {
    err << "error: " << x.what() << "\n";
    return kCheckFailed;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace splatba::cli
