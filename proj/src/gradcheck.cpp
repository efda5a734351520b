#include "splatba/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "splatba/errors.hpp"
#include "splatba/rng.hpp"

namespace splatba {

namespace {

constexpr double kFaultScale = 1.05;

// One checkable scalar: a pointer into the scene and the matching analytic entry.
struct Entry {
  double* param;
  double analytic;
};

std::vector<Entry> entries_for(GradClass c, SceneParameters& s, const RenderGradients& g) {
  std::vector<Entry> out;
  const int stride = 3 * sh_coeff_count(s.sh_degree);
  for (std::size_t v = 0; v < s.context.size(); ++v) {
    ContextView& cv = s.context[v];
    const ContextViewGrad& cg = g.context[v];
    for (std::size_t i = 0; i < cv.pixel_count(); ++i) {
      switch (c) {
        case GradClass::kSh:
          for (int k = 0; k < stride; ++k) out.push_back({&cv.sh[i * stride + k], cg.d_sh[i * stride + k]});
          break;
        case GradClass::kOpacity:
          out.push_back({&cv.opacity_logits[i], cg.d_opacity_logit[i]});
          break;
        case GradClass::kScale:
          for (int k = 0; k < 3; ++k) out.push_back({&cv.log_scales[i][k], cg.d_log_scale[i][k]});
          break;
        case GradClass::kQuat:
          for (int k = 0; k < 4; ++k) out.push_back({&cv.quats[i][k], cg.d_quat[i][k]});
          break;
        case GradClass::kDepth:
          out.push_back({&cv.depth.raw[i], cg.d_depth_raw[i]});
          break;
        default:
          break;
      }
    }
  }
  auto pose_entries = [&](std::size_t view) {
    for (int k = 0; k < 6; ++k) out.push_back({&s.poses[view].rot6[k], g.d_pose[view].rot6[k]});
    for (int k = 0; k < 4; ++k) out.push_back({&s.poses[view].trans_h[k], g.d_pose[view].trans_h[k]});
  };
  if (c == GradClass::kContextPose) pose_entries(1);
  if (c == GradClass::kTargetPose) pose_entries(2);
  if (c == GradClass::kFov) out.push_back({&s.fov_rad, g.d_fov});
  return out;
}

}  // namespace

const char* grad_class_name(GradClass c) {
  switch (c) {
    case GradClass::kSh: return "sh";
    case GradClass::kOpacity: return "opacity";
    case GradClass::kScale: return "scale";
    case GradClass::kQuat: return "quat";
    case GradClass::kDepth: return "depth";
    case GradClass::kContextPose: return "context-pose";
    case GradClass::kTargetPose: return "target-pose";
    case GradClass::kFov: return "fov";
  }
  return "?";
}

GradClass grad_class_from_name(const std::string& name) {
  for (GradClass c : kAllGradClasses)
    if (name == grad_class_name(c)) return c;
  throw ArgumentError("unknown gradient class '" + name + "'");
}

SceneParameters make_gradcheck_scene(std::uint64_t seed, int size, int context_size) {
  if (size < 4 || context_size < 2) throw ArgumentError("gradcheck: scene too small");
  Rng rng(seed);
  SceneParameters s;
  s.sh_degree = static_cast<int>(seed % 3);
  s.fov_rad = rng.uniform(0.7, 1.1);
  s.view_sizes = {{context_size, context_size}, {context_size, context_size}, {size, size}};
  s.poses.resize(3);
  for (std::size_t v = 1; v < 3; ++v) {
    PoseParams6D& p = s.poses[v];
    for (double& x : p.rot6) x += rng.normal(0.0, 0.05);
    for (int i = 0; i < 3; ++i) p.trans_h[i] += rng.normal(0.0, 0.1);
    p.trans_h[3] += rng.normal(0.0, 0.05);
  }
  const int stride = 3 * sh_coeff_count(s.sh_degree);
  for (int c = 0; c < 2; ++c) {
    ContextView cv;
    cv.depth = DepthMap(context_size, context_size, 0.5, 6.0);
    for (double& r : cv.depth.raw) r = rng.normal(-0.5, 0.3);
    const int n = context_size * context_size;
    const double footprint = std::log(2.0 / context_size);
    for (int i = 0; i < n; ++i) {
      cv.quats.push_back(Vec4(rng.normal(), rng.normal(), rng.normal(), rng.normal()));
      cv.log_scales.push_back(Vec3(footprint + rng.uniform(-0.5, 0.5), footprint + rng.uniform(-0.5, 0.5),
                                   footprint + rng.uniform(-0.5, 0.5)));
      cv.opacity_logits.push_back(rng.normal(0.0, 1.0));
      for (int k = 0; k < stride; ++k) cv.sh.push_back(rng.normal(0.0, 0.3));
    }
    s.context.push_back(std::move(cv));
  }
  return s;
}

bool GradcheckReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.failed == 0 && r.checked > 0; });
}

std::string GradcheckReport::table() const {
  std::string out = "class          checked  failed  max_abs_err  max_rel_err\n";
  char line[160];
  for (const GradcheckRow& r : rows) {
    std::snprintf(line, sizeof line, "%-13s %8d %7d  %11.3e  %11.3e%s\n", grad_class_name(r.cls), r.checked,
                  r.failed, r.max_abs_err, r.max_rel_err, r.failed ? "  FAIL" : "");
    out += line;
  }
  return out;
}

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  if (cfg.scenes < 1 || cfg.samples < 1 || !(cfg.h > 0.0)) throw ArgumentError("gradcheck: bad configuration");
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.scenes = cfg.scenes;
  for (GradClass c : cfg.classes) report.rows.push_back(GradcheckRow{c});

  RenderConfig rc;
  rc.threads = cfg.threads;
  for (int k = 0; k < cfg.scenes; ++k) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
    SceneParameters s = make_gradcheck_scene(seed, cfg.size, cfg.context_size);
    Rng rng(seed ^ 0xC0FFEEull);
    const Vec3 bg(rng.uniform(), rng.uniform(), rng.uniform());
    const DecodedScene decoded = decode_scene(s);
    const RenderState base = render_scene_view(decoded, 2, bg, rc);
    Image weights(cfg.size, cfg.size, 3);
    for (double& w : weights.data) w = rng.normal();
    RenderGradients g = RenderGradients::zeros_like(s);
    scene_backward(s, decoded, base, 2, weights, g);

    auto objective = [&]() {
      const DecodedScene d = decode_scene(s);
      const Image img = render_replay(d.gaussians, Camera{d.intrinsics[2], d.poses[2]}, base);
      double acc = 0.0;
      for (std::size_t i = 0; i < img.data.size(); ++i) acc += weights.data[i] * img.data[i];
      return acc;
    };

    for (GradcheckRow& row : report.rows) {
      std::vector<Entry> entries = entries_for(row.cls, s, g);
      if (cfg.inject_fault && *cfg.inject_fault == row.cls) {
        for (Entry& e : entries) e.analytic *= kFaultScale;
      }
      // Largest analytic gradients first, then a few random entries.
      std::vector<std::size_t> order(entries.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(entries[a].analytic) > std::abs(entries[b].analytic);
      });
      std::vector<std::size_t> pick;
      const std::size_t top = std::min<std::size_t>(entries.size(), (cfg.samples + 1) / 2);
      pick.assign(order.begin(), order.begin() + top);
      while (pick.size() < std::min<std::size_t>(entries.size(), cfg.samples)) {
        const std::size_t i = rng.below(entries.size());
        if (std::find(pick.begin(), pick.end(), i) == pick.end()) pick.push_back(i);
      }
      for (std::size_t i : pick) {
        Entry& e = entries[i];
        const double orig = *e.param;
        *e.param = orig + cfg.h;
        const double plus = objective();
        *e.param = orig - cfg.h;
        const double minus = objective();
        *e.param = orig;
        const double numeric = (plus - minus) / (2.0 * cfg.h);
        const double err = std::abs(numeric - e.analytic);
        const double scale = std::max(std::abs(numeric), std::abs(e.analytic));
        const bool ok = err <= std::max(cfg.abs_tol, cfg.rel_tol * scale);
        ++row.checked;
        row.max_abs_err = std::max(row.max_abs_err, err);
        if (scale > cfg.abs_tol && err / scale > row.max_rel_err) {
          row.max_rel_err = err / scale;
          row.worst_seed = seed;
        }
        if (!ok) ++row.failed;
      }
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace splatba
