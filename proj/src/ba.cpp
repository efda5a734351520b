#include "splatba/ba.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

#include "splatba/errors.hpp"
#include "splatba/kernels.hpp"
#include "splatba/metrics.hpp"

namespace splatba {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Visits the raw parameters of one class in a fixed order. visit_grads walks
// the matching gradient entries in the same order.
template <typename F>
void visit_params(SceneParameters& s, ParamClass c, F&& f) {
  switch (c) {
    case ParamClass::kDepth:
      for (auto& cv : s.context)
        for (double& r : cv.depth.raw) f(r);
      break;
    case ParamClass::kGaussian:
      for (auto& cv : s.context) {
        for (auto& q : cv.quats)
          for (int k = 0; k < 4; ++k) f(q[k]);
        for (auto& l : cv.log_scales)
          for (int k = 0; k < 3; ++k) f(l[k]);
        for (double& o : cv.opacity_logits) f(o);
        for (double& x : cv.sh) f(x);
      }
      for (auto& c3 : s.world.centers)
        for (int k = 0; k < 3; ++k) f(c3[k]);
      for (auto& q : s.world.quats)
        for (int k = 0; k < 4; ++k) f(q[k]);
      for (auto& l : s.world.log_scales)
        for (int k = 0; k < 3; ++k) f(l[k]);
      for (double& o : s.world.opacity_logits) f(o);
      for (double& x : s.world.sh) f(x);
      break;
    case ParamClass::kPose:
      for (std::size_t v = 1; v < s.poses.size(); ++v) {
        for (double& x : s.poses[v].rot6) f(x);
        for (double& x : s.poses[v].trans_h) f(x);
      }
      break;
    case ParamClass::kFov:
      f(s.fov_rad);
      break;
  }
}

template <typename F>
void visit_grads(RenderGradients& g, ParamClass c, F&& f) {
  switch (c) {
    case ParamClass::kDepth:
      for (auto& cg : g.context)
        for (double& r : cg.d_depth_raw) f(r);
      break;
    case ParamClass::kGaussian:
      for (auto& cg : g.context) {
        for (auto& q : cg.d_quat)
          for (int k = 0; k < 4; ++k) f(q[k]);
        for (auto& l : cg.d_log_scale)
          for (int k = 0; k < 3; ++k) f(l[k]);
        for (double& o : cg.d_opacity_logit) f(o);
        for (double& x : cg.d_sh) f(x);
      }
      for (auto& c3 : g.world.d_center)
        for (int k = 0; k < 3; ++k) f(c3[k]);
      for (auto& q : g.world.d_quat)
        for (int k = 0; k < 4; ++k) f(q[k]);
      for (auto& l : g.world.d_log_scale)
        for (int k = 0; k < 3; ++k) f(l[k]);
      for (double& o : g.world.d_opacity_logit) f(o);
      for (double& x : g.world.d_sh) f(x);
      break;
    case ParamClass::kPose:
      for (std::size_t v = 1; v < g.d_pose.size(); ++v) {
        for (double& x : g.d_pose[v].rot6) f(x);
        for (double& x : g.d_pose[v].trans_h) f(x);
      }
      break;
    case ParamClass::kFov:
      f(g.d_fov);
      break;
  }
}

std::vector<double> gather(SceneParameters& s, ParamClass c) {
  std::vector<double> out;
  visit_params(s, c, [&](double& x) { out.push_back(x); });
  return out;
}

void scatter(const std::vector<double>& values, SceneParameters& s, ParamClass c) {
  std::size_t i = 0;
  visit_params(s, c, [&](double& x) { x = values[i++]; });
}

std::vector<double> gather(RenderGradients& g, ParamClass c) {
  std::vector<double> out;
  visit_grads(g, c, [&](double& x) { out.push_back(x); });
  return out;
}

// First class whose current values cannot be decoded, if any.
std::optional<std::pair<ParamClass, std::string>> diagnose(const SceneParameters& s) {
  SceneParameters& m = const_cast<SceneParameters&>(s);  // visit only reads
  if (!(std::isfinite(s.fov_rad) && s.fov_rad > 0.0 && s.fov_rad < std::numbers::pi)) {
    return std::pair{ParamClass::kFov, "fov left (0, pi): " + std::to_string(s.fov_rad) + " rad"};
  }
  bool finite = true;
  visit_params(m, ParamClass::kPose, [&](double& x) { finite = finite && std::isfinite(x); });
  if (!finite) return std::pair{ParamClass::kPose, std::string("non-finite pose parameter")};
  for (std::size_t v = 1; v < s.poses.size(); ++v) {
    try {
      (void)s.poses[v].decode();
    } catch (const std::exception& e) {
      return std::pair{ParamClass::kPose, "view " + std::to_string(v) + ": " + e.what()};
    }
  }
  visit_params(m, ParamClass::kDepth, [&](double& x) { finite = finite && std::isfinite(x); });
  if (!finite) return std::pair{ParamClass::kDepth, std::string("non-finite depth logit")};
  visit_params(m, ParamClass::kGaussian, [&](double& x) { finite = finite && std::isfinite(x); });
  if (!finite) return std::pair{ParamClass::kGaussian, std::string("non-finite Gaussian parameter")};
  auto check_set = [](const std::vector<Vec4>& quats, const std::vector<Vec3>& log_scales) {
    for (const auto& q : quats)
      if (q.norm() <= kQuatEps) return false;
    for (const auto& l : log_scales)
      if (l.maxCoeff() > 300.0) return false;  // exp(2 * log_scale) would overflow
    return true;
  };
  bool ok = check_set(s.world.quats, s.world.log_scales);
  for (const auto& cv : s.context) ok = ok && check_set(cv.quats, cv.log_scales);
  if (!ok) return std::pair{ParamClass::kGaussian, std::string("degenerate quaternion or overflowing scale")};
  return std::nullopt;
}

[[noreturn]] void diverge(ParamClass c, const std::string& what) {
  throw DivergenceError(param_class_name(c), std::string("divergence in '") + param_class_name(c) + "': " + what);
}

}  // namespace

const char* param_class_name(ParamClass c) {
  switch (c) {
    case ParamClass::kDepth: return "depth";
    case ParamClass::kGaussian: return "gaussian";
    case ParamClass::kPose: return "pose";
    case ParamClass::kFov: return "fov";
  }
  return "?";
}

ParamClass param_class_from_name(const std::string& name) {
  for (ParamClass c : kAllParamClasses)
    if (name == param_class_name(c)) return c;
  throw ArgumentError("unknown parameter class '" + name + "' (depth, gaussian, pose, fov)");
}

double& PerClass::operator[](ParamClass c) {
  switch (c) {
    case ParamClass::kDepth: return depth;
    case ParamClass::kGaussian: return gaussian;
    case ParamClass::kPose: return pose;
    case ParamClass::kFov: break;
  }
  return fov;
}

double PerClass::operator[](ParamClass c) const { return const_cast<PerClass&>(*this)[c]; }

bool Freeze::operator[](ParamClass c) const {
  switch (c) {
    case ParamClass::kDepth: return depth;
    case ParamClass::kGaussian: return gaussian;
    case ParamClass::kPose: return pose;
    case ParamClass::kFov: break;
  }
  return fov;
}

void Freeze::set(ParamClass c, bool value) {
  switch (c) {
    case ParamClass::kDepth: depth = value; break;
    case ParamClass::kGaussian: gaussian = value; break;
    case ParamClass::kPose: pose = value; break;
    case ParamClass::kFov: fov = value; break;
  }
}

void BAConfig::validate() const {
  if (!(lr > 0.0)) throw ArgumentError("ba config: lr must be > 0");
  if (!(gamma >= 0.0)) throw ArgumentError("ba config: gamma must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ArgumentError("ba config: betas must be in [0, 1)");
  if (!(eps > 0.0)) throw ArgumentError("ba config: eps must be > 0");
  if (max_steps < 0) throw ArgumentError("ba config: max_steps must be >= 0");
  if (perceptual != "none" && perceptual != "ssim") throw ArgumentError("ba config: perceptual must be none or ssim");
  for (ParamClass c : kAllParamClasses)
    if (!(lr_scale[c] >= 0.0)) throw ArgumentError("ba config: lr_scale entries must be >= 0");
  if (convergence_window < 1) throw ArgumentError("ba config: convergence_window must be >= 1");
  if (threads < 0) throw ArgumentError("ba config: threads must be >= 0");
  if (!(loss_floor >= 0.0)) throw ArgumentError("ba config: loss_floor must be >= 0");
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ArgumentError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ArgumentError(where + ": unknown field '" + key + "'");
}

}  // namespace

BAConfig ba_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"schema_version", "lr", "beta1", "beta2", "eps", "max_steps", "gamma", "perceptual",
                     "lr_scale", "freeze", "grad_clip", "convergence_window", "convergence_tol", "loss_floor", "threads"},
                 "ba config");
  if (j.value("schema_version", kBAConfigVersion) != kBAConfigVersion) {
    throw ArgumentError("ba config: unsupported schema_version");
  }
  BAConfig c;
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.gamma = j.value("gamma", c.gamma);
  c.perceptual = j.value("perceptual", c.perceptual);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.convergence_window = j.value("convergence_window", c.convergence_window);
  c.convergence_tol = j.value("convergence_tol", c.convergence_tol);
  c.loss_floor = j.value("loss_floor", c.loss_floor);
  c.threads = j.value("threads", c.threads);
  if (j.contains("lr_scale")) {
    const auto& s = j.at("lr_scale");
    reject_unknown(s, {"depth", "gaussian", "pose", "fov"}, "ba config lr_scale");
    for (ParamClass pc : kAllParamClasses) c.lr_scale[pc] = s.value(param_class_name(pc), c.lr_scale[pc]);
  }
  if (j.contains("freeze")) {
    const auto& f = j.at("freeze");
    reject_unknown(f, {"depth", "gaussian", "pose", "fov"}, "ba config freeze");
    for (ParamClass pc : kAllParamClasses) c.freeze.set(pc, f.value(param_class_name(pc), c.freeze[pc]));
  }
  c.validate();
  return c;
}

nlohmann::json ba_config_to_json(const BAConfig& c) {
  nlohmann::json scale, freeze;
  for (ParamClass pc : kAllParamClasses) {
    scale[param_class_name(pc)] = c.lr_scale[pc];
    freeze[param_class_name(pc)] = c.freeze[pc];
  }
  return {{"schema_version", kBAConfigVersion},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"max_steps", c.max_steps},
          {"gamma", c.gamma},
          {"perceptual", c.perceptual},
          {"lr_scale", scale},
          {"freeze", freeze},
          {"grad_clip", c.grad_clip},
          {"convergence_window", c.convergence_window},
          {"convergence_tol", c.convergence_tol},
          {"loss_floor", c.loss_floor},
          {"threads", c.threads}};
}

LossAndGradients evaluate_objective(const BAProblem& problem, const SceneParameters& params,
                                    const BAConfig& config) {
  if (problem.target_views.empty() || problem.target_views.size() != problem.target_images.size()) {
    throw ArgumentError("ba: need one target image per target view");
  }
  const DecodedScene decoded = decode_scene(params);
  RenderConfig rc = problem.render;
  rc.threads = config.threads;
  const PerceptualLoss perceptual = config.perceptual == "ssim" ? PerceptualLoss(ssim_loss) : PerceptualLoss();
  const double inv_views = 1.0 / static_cast<double>(problem.target_views.size());

  LossAndGradients out;
  out.grads = RenderGradients::zeros_like(params);
  for (std::size_t t = 0; t < problem.target_views.size(); ++t) {
    const std::size_t view = problem.target_views[t];
    if (view >= params.view_count()) throw ArgumentError("ba: target view out of range");
    const RenderState st = render_scene_view(decoded, view, problem.background, rc);
    LossValue lv = rendering_loss(st.output.color, problem.target_images[t], config.gamma, perceptual);
    out.loss += lv.value * inv_views;
    const double p = psnr(st.output.color, problem.target_images[t]);
    out.psnr += p * inv_views;
    for (double& g : lv.grad.data) g *= inv_views;
    scene_backward(params, decoded, st, view, lv.grad, out.grads);
    out.renders.push_back(st.output.color);
  }
  return out;
}

PoseAngularError worst_pair_error(const std::vector<CameraPose>& pred,
                                  const std::vector<CameraPose>& gt) {
  PoseAngularError worst;
  for (const PoseErrorSample& s : relative_pose_errors(pred, gt)) {
    worst.rot_deg = std::max(worst.rot_deg, s.rot_err_deg);
    worst.trans_deg = std::max(worst.trans_deg, s.trans_err_deg);
  }
  return worst;
}

BAResult run_photometric_ba(const BAProblem& problem, const BAConfig& config,
                            const BAObserver& observer) {
  config.validate();
  problem.init.validate();
  if (problem.gt_poses && problem.gt_poses->size() != problem.init.view_count()) {
    throw ArgumentError("ba: gt_poses must hold one pose per view");
  }

  SceneParameters params = problem.init;
  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<Moments> moments(std::size(kAllParamClasses));

  BAResult result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_by_step;
  int t = 0;

  for (int step = 0; step <= config.max_steps; ++step) {
    if (auto bad = diagnose(params)) diverge(bad->first, bad->second);
    LossAndGradients obj = evaluate_objective(problem, params, config);
    if (!std::isfinite(obj.loss) || !obj.grads.all_finite()) {
      for (ParamClass c : kAllParamClasses) {
        bool finite = true;
        for (double g : gather(obj.grads, c)) finite = finite && std::isfinite(g);
        if (!finite) diverge(c, "non-finite gradient at step " + std::to_string(step));
      }
      diverge(ParamClass::kGaussian, "non-finite loss at step " + std::to_string(step));
    }

    BAHistoryRow row;
    row.step = step;
    row.loss = obj.loss;
    row.psnr = obj.psnr;
    row.fov_deg = params.fov_rad * kRadToDeg;
    row.rot_err_deg = row.trans_err_deg = std::numeric_limits<double>::quiet_NaN();
    if (problem.gt_poses) {
      std::vector<CameraPose> pred;
      for (std::size_t v = 0; v < params.view_count(); ++v) pred.push_back(params.pose(v));
      const PoseAngularError e = worst_pair_error(pred, normalize_poses(*problem.gt_poses));
      row.rot_err_deg = e.rot_deg;
      row.trans_err_deg = e.trans_deg;
    }
    result.history.push_back(row);
    if (observer) observer(row, params);
    if (step == 0) result.initial_loss = obj.loss;
    if (obj.loss < best) {
      best = obj.loss;
      result.params = params;
      result.best_step = step;
    }
    best_by_step.push_back(best);

    if (step == config.max_steps) break;
    if (obj.loss <= config.loss_floor) {
      result.converged = true;
      break;
    }
    if (config.convergence_tol > 0.0 && step >= config.convergence_window) {
      const double before = best_by_step[step - config.convergence_window];
      if (before - best <= config.convergence_tol * before) {
        result.converged = true;
        break;
      }
    }

    bool any_gradient = false;
    std::vector<std::vector<double>> grads(std::size(kAllParamClasses));
    for (ParamClass c : kAllParamClasses) {
      if (config.freeze[c]) continue;
      auto& g = grads[static_cast<int>(c)];
      g = gather(obj.grads, c);
      double norm2 = 0.0;
      for (double x : g) norm2 += x * x;
      any_gradient = any_gradient || norm2 > 0.0;
      if (config.grad_clip > 0.0 && norm2 > config.grad_clip * config.grad_clip) {
        const double s = config.grad_clip / std::sqrt(norm2);
        for (double& x : g) x *= s;
      }
    }
    if (!any_gradient) {
      result.converged = true;
      break;
    }

    ++t;
    for (ParamClass c : kAllParamClasses) {
      if (config.freeze[c]) continue;
      const auto& g = grads[static_cast<int>(c)];
      if (g.empty()) continue;
      Moments& mo = moments[static_cast<int>(c)];
      if (mo.m.empty()) {
        mo.m.assign(g.size(), 0.0);
        mo.v.assign(g.size(), 0.0);
      }
      std::vector<double> values = gather(params, c);
      kernels::AdamStep s;
      s.lr = config.lr * config.lr_scale[c];
      s.beta1 = config.beta1;
      s.beta2 = config.beta2;
      s.eps = config.eps;
      s.bias1 = 1.0 - std::pow(config.beta1, t);
      s.bias2 = 1.0 - std::pow(config.beta2, t);
      kernels::adam_update(values, g, mo.m, mo.v, s);
      scatter(values, params, c);
    }
    result.updates = t;
  }
  result.final_loss = best;
  return result;
}

std::string history_csv(const std::vector<BAHistoryRow>& history) {
  std::string out = "step,loss,psnr,rot_err_deg,trans_err_deg,fov_deg\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.step, r.loss, r.psnr,
                  r.rot_err_deg, r.trans_err_deg, r.fov_deg);
    out += buf;
  }
  return out;
}

SceneParameters init_scene_parameters(const std::vector<Image>& context_images, int target_count,
                                      FovInit fov_mode, double given_fov_rad, double near,
                                      double far, int sh_degree) {
  if (context_images.empty()) throw ArgumentError("init: at least one context image is required");
  if (target_count < 0) throw ArgumentError("init: negative target count");
  const int w = context_images[0].width;
  const int h = context_images[0].height;
  for (const Image& img : context_images) {
    if (img.width != w || img.height != h || img.channels != 3) {
      throw ArgumentError("init: context images must share one size and have 3 channels");
    }
  }
  SceneParameters s;
  s.sh_degree = sh_degree;
  s.world = GaussianSet(sh_degree);
  s.fov_rad = fov_mode == FovInit::kFullImage ? 2.0 * std::atan(0.5) : given_fov_rad;
  const CameraIntrinsics K = CameraIntrinsics::make(s.fov_rad, w, h);
  const double mid = activate_depth(0.0, near, far);
  const double log_scale = std::log(mid / K.focal());
  const int stride = 3 * sh_coeff_count(sh_degree);
  for (const Image& img : context_images) {
    ContextView cv;
    cv.depth = DepthMap(w, h, near, far, 0.0);
    const std::size_t n = cv.pixel_count();
    cv.quats.assign(n, Vec4(1, 0, 0, 0));
    cv.log_scales.assign(n, Vec3::Constant(log_scale));
    cv.opacity_logits.assign(n, 0.0);
    cv.sh.assign(n * stride, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) cv.sh[i * stride + c] = color_to_sh0(img.data[i * 3 + c]);
    s.context.push_back(std::move(cv));
  }
  const std::size_t views = context_images.size() + static_cast<std::size_t>(target_count);
  s.view_sizes.assign(views, ViewSize{w, h});
  s.poses.assign(views, PoseParams6D::identity());
  return s;
}

CameraPose perturb_pose(const CameraPose& pose, double rot_deg, double trans, Rng& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  Vec3 dir(rng.normal(), rng.normal(), rng.normal());
  CameraPose out = pose;
  out.rotation = pose.rotation * axis_angle_to_matrix(axis.normalized(), rot_deg / kRadToDeg);
  out.translation = pose.translation + trans * dir.normalized();
  return out;
}

}  // namespace splatba
