#include "splatba/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "splatba/errors.hpp"
#include "splatba/io.hpp"
#include "splatba/render.hpp"

namespace splatba {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;

// Smooth color field: a few random plane waves per channel.
class Texture {
 public:
  explicit Texture(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& ch : waves_) {
      for (auto& w : ch) {
        const double angle = rng.uniform(0.0, 2.0 * kPi);
        const double freq = rng.uniform(1.5, 5.0);
        w = {freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 2.0 * kPi),
             rng.uniform(0.3, 1.0)};
      }
    }
  }

  Vec3 at(double u, double v) const {
    Vec3 c;
    for (int k = 0; k < 3; ++k) {
      double s = 0.0, norm = 0.0;
      for (const auto& w : waves_[k]) {
        s += w[3] * std::sin(w[0] * u + w[1] * v + w[2]);
        norm += w[3];
      }
      c[k] = std::clamp(0.5 + 0.45 * s / norm * 1.6, 0.05, 0.95);
    }
    return c;
  }

 private:
  std::array<std::array<std::array<double, 4>, 4>, 3> waves_{};
};

Vec4 matrix_to_quat(const Mat3& R) {
  const Eigen::Quaterniond q(R);
  return Vec4(q.w(), q.x(), q.y(), q.z());
}

Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
  return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

struct Primitive {
  Vec3 center;
  Vec4 quat;
  Vec3 log_scale;
  double opacity_logit;
  Vec3 color;
};

std::vector<Primitive> make_cloud(const SceneSpec& spec, Rng& rng, const Texture& tex) {
  std::vector<Primitive> out;
  const double e = spec.extent;
  while (static_cast<int>(out.size()) < spec.primitives) {
    const Vec3 c(rng.uniform(-e, e), rng.uniform(-e, e), rng.uniform(-e, e));
    if (c.norm() > e) continue;
    Primitive p;
    p.center = c;
    p.quat = Vec4(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
    for (int k = 0; k < 3; ++k) p.log_scale[k] = std::log(e * rng.uniform(0.08, 0.18));
    p.opacity_logit = rng.uniform(1.0, 3.0);
    p.color = tex.at(c.x() + 0.5 * c.z(), c.y() - 0.3 * c.z());
    for (int k = 0; k < 3; ++k) p.color[k] = std::clamp(p.color[k] + rng.uniform(-0.15, 0.15), 0.02, 0.98);
    out.push_back(p);
  }
  return out;
}

// Square grid of thin splats on a face spanned by axes (a, b) through `origin`.
// Neighbours sit on two layers (checkerboard along the normal) so their depth
// order does not flip under small camera rotations; with coplanar splats the
// order of overlapping neighbours is a tie and any pose change reorders them.
void add_face(std::vector<Primitive>& out, int n, const Vec3& origin, const Vec3& a, const Vec3& b,
              double half, const Mat3& orientation, const Texture& tex, const Vec2& tex_offset) {
  const double spacing = 2.0 * half / n;
  const Vec4 q = matrix_to_quat(orientation);
  const Vec3 normal = a.cross(b);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = -half + (i + 0.5) * spacing;
      const double t = -half + (j + 0.5) * spacing;
      Primitive p;
      p.center = origin + s * a + t * b + ((i + j) % 2 ? 0.04 : -0.04) * spacing * normal;
      p.quat = q;
      p.log_scale = Vec3(std::log(0.5 * spacing), std::log(0.5 * spacing), std::log(0.02 * spacing));
      p.opacity_logit = 4.0;
      p.color = tex.at(s + tex_offset.x(), t + tex_offset.y());
      out.push_back(p);
    }
  }
}

std::vector<Primitive> make_plane(const SceneSpec& spec, const Texture& tex) {
  std::vector<Primitive> out;
  const int n = std::max(2, static_cast<int>(std::lround(std::sqrt(spec.primitives))));
  add_face(out, n, Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), spec.extent, Mat3::Identity(), tex,
           Vec2::Zero());
  return out;
}

std::vector<Primitive> make_box_room(const SceneSpec& spec, const Texture& tex) {
  std::vector<Primitive> out;
  const double e = spec.extent;
  const int n = std::max(2, static_cast<int>(std::lround(std::sqrt(spec.primitives / 5.0))));
  const Mat3 face_y = axis_angle_to_matrix(Vec3::UnitX(), kPi / 2);  // local z -> +-y
  const Mat3 face_x = axis_angle_to_matrix(Vec3::UnitY(), kPi / 2);  // local z -> +-x
  add_face(out, n, Vec3(0, 0, e), Vec3::UnitX(), Vec3::UnitY(), e, Mat3::Identity(), tex, Vec2(0, 0));
  add_face(out, n, Vec3(0, e, 0), Vec3::UnitX(), Vec3::UnitZ(), e, face_y, tex, Vec2(3.1, 0.7));
  add_face(out, n, Vec3(0, -e, 0), Vec3::UnitX(), Vec3::UnitZ(), e, face_y, tex, Vec2(-2.3, 1.9));
  add_face(out, n, Vec3(-e, 0, 0), Vec3::UnitY(), Vec3::UnitZ(), e, face_x, tex, Vec2(1.3, -2.9));
  add_face(out, n, Vec3(e, 0, 0), Vec3::UnitY(), Vec3::UnitZ(), e, face_x, tex, Vec2(-0.4, 4.1));
  return out;
}

std::vector<CameraPose> make_trajectory(const SceneSpec& spec) {
  const TrajectorySpec& t = spec.trajectory;
  std::vector<CameraPose> poses;
  for (int i = 0; i < spec.frames; ++i) {
    CameraPose p;
    if (t.kind == "line") {
      const double x = -0.5 * t.length + t.length * i / (spec.frames - 1);
      p.translation = Vec3(x, t.height, -t.radius);
      p.rotation = look_at_rotation(p.translation, Vec3(x, 0, 0));
    } else {
      const double theta = t.kind == "orbit"
                               ? 2.0 * kPi * i / spec.frames
                               : (-0.5 * t.span_deg + t.span_deg * i / (spec.frames - 1)) * kDegToRad;
      p.translation = Vec3(t.radius * std::sin(theta), t.height, -t.radius * std::cos(theta));
      p.rotation = look_at_rotation(p.translation, Vec3::Zero());
    }
    poses.push_back(p);
  }
  return poses;
}

double to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ArgumentError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ArgumentError(where + ": unknown field '" + key + "'");
  }
}

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d", i);
  return buf;
}

}  // namespace

void SceneSpec::validate() const {
  if (kind != "gaussian-cloud" && kind != "textured-plane" && kind != "box-room") {
    throw ArgumentError("scene spec: unknown kind '" + kind + "'");
  }
  const std::string& tk = trajectory.kind;
  if (tk != "arc" && tk != "line" && tk != "orbit") {
    throw ArgumentError("scene spec: unknown trajectory '" + tk + "'");
  }
  if (frames < 2) throw ArgumentError("scene spec: frames must be >= 2");
  if (primitives < 1) throw ArgumentError("scene spec: primitives must be >= 1");
  if (width < 1 || height < 1) throw ArgumentError("scene spec: image size must be >= 1");
  if (!(extent > 0.0) || !(trajectory.radius > 0.0)) throw ArgumentError("scene spec: extent and radius must be > 0");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ArgumentError("scene spec: fov_deg must be in (0, 180)");
  if (!(near > 0.0 && near < far)) throw ArgumentError("scene spec: need 0 < near < far");
  if (sh_degree < 0 || sh_degree > kMaxShDegree) throw ArgumentError("scene spec: sh_degree must be 0..2");
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"schema_version", "kind", "primitives", "extent", "texture_seed", "trajectory",
                     "frames", "width", "height", "fov_deg", "near", "far", "sh_degree", "background"},
                 "scene spec");
  if (get_or<int>(j, "schema_version", kSceneSpecVersion) != kSceneSpecVersion) {
    throw ArgumentError("scene spec: unsupported schema_version");
  }
  SceneSpec s;
  s.kind = get_or<std::string>(j, "kind", s.kind);
  s.primitives = get_or<int>(j, "primitives", s.primitives);
  s.extent = get_or<double>(j, "extent", s.extent);
  s.texture_seed = get_or<std::uint64_t>(j, "texture_seed", s.texture_seed);
  s.frames = get_or<int>(j, "frames", s.frames);
  s.width = get_or<int>(j, "width", s.width);
  s.height = get_or<int>(j, "height", s.height);
  s.fov_deg = get_or<double>(j, "fov_deg", s.fov_deg);
  s.near = get_or<double>(j, "near", s.near);
  s.far = get_or<double>(j, "far", s.far);
  s.sh_degree = get_or<int>(j, "sh_degree", s.sh_degree);
  if (j.contains("background")) {
    const auto bg = j.at("background").get<std::vector<double>>();
    if (bg.size() != 3) throw ArgumentError("scene spec: background needs 3 values");
    s.background = Vec3(bg[0], bg[1], bg[2]);
  }
  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    reject_unknown(t, {"kind", "radius", "span_deg", "height", "length"}, "scene spec trajectory");
    s.trajectory.kind = get_or<std::string>(t, "kind", s.trajectory.kind);
    s.trajectory.radius = get_or<double>(t, "radius", s.trajectory.radius);
    s.trajectory.span_deg = get_or<double>(t, "span_deg", s.trajectory.span_deg);
    s.trajectory.height = get_or<double>(t, "height", s.trajectory.height);
    s.trajectory.length = get_or<double>(t, "length", s.trajectory.length);
  }
  s.validate();
  return s;
}

nlohmann::json scene_spec_to_json(const SceneSpec& s) {
  return {{"schema_version", kSceneSpecVersion},
          {"kind", s.kind},
          {"primitives", s.primitives},
          {"extent", s.extent},
          {"texture_seed", s.texture_seed},
          {"trajectory",
           {{"kind", s.trajectory.kind},
            {"radius", s.trajectory.radius},
            {"span_deg", s.trajectory.span_deg},
            {"height", s.trajectory.height},
            {"length", s.trajectory.length}}},
          {"frames", s.frames},
          {"width", s.width},
          {"height", s.height},
          {"fov_deg", s.fov_deg},
          {"near", s.near},
          {"far", s.far},
          {"sh_degree", s.sh_degree},
          {"background", {s.background.x(), s.background.y(), s.background.z()}}};
}

double frustum_coverage(const GaussianSet& g, const CameraIntrinsics& K, const CameraPose& pose) {
  if (g.size() == 0) return 0.0;
  std::size_t inside = 0;
  for (const Vec3& c : g.centers) {
    const auto p = project(c, K, pose);
    if (p && p->pixel.x() >= -0.5 && p->pixel.x() <= K.width_px - 0.5 && p->pixel.y() >= -0.5 &&
        p->pixel.y() <= K.height_px - 0.5) {
      ++inside;
    }
  }
  return static_cast<double>(inside) / static_cast<double>(g.size());
}

GeneratedScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Rng geometry_rng = rng.split();
  Rng sh_rng = rng.split();
  const Texture tex(spec.texture_seed);

  std::vector<Primitive> prims;
  if (spec.kind == "gaussian-cloud") {
    prims = make_cloud(spec, geometry_rng, tex);
  } else if (spec.kind == "textured-plane") {
    prims = make_plane(spec, tex);
  } else {
    prims = make_box_room(spec, tex);
  }

  const std::vector<CameraPose> world = make_trajectory(spec);
  const CameraPose to_canonical = world[0].inverse();
  const Vec4 q0 = matrix_to_quat(to_canonical.rotation);

  GeneratedScene out;
  out.near = spec.near;
  out.far = spec.far;
  out.scene_scale = spec.trajectory.radius;
  out.background = spec.background;
  // The stored GT is exactly what the on-disk formats can hold: float32
  // Gaussian records and a FOV that survives the degree conversion.
  double fov = spec.fov_deg * kDegToRad;
  for (int i = 0; i < 4; ++i) {
    fov = io::intrinsics_from_json(io::intrinsics_to_json(CameraIntrinsics::make(fov, spec.width, spec.height))).fov_rad;
  }
  out.intrinsics = CameraIntrinsics::make(fov, spec.width, spec.height);
  out.poses = normalize_poses(world);

  out.gaussians = GaussianSet(spec.sh_degree);
  const int stride = out.gaussians.sh_stride();
  std::vector<double> coeffs(stride);
  for (const Primitive& p : prims) {
    const Vec3 c = to_canonical.apply(p.center);
    const Vec4 q = quat_multiply(q0, p.quat).normalized();
    std::fill(coeffs.begin(), coeffs.end(), 0.0);
    for (int k = 0; k < 3; ++k) coeffs[k] = color_to_sh0(p.color[k]);
    for (int k = 3; k < stride; ++k) coeffs[k] = sh_rng.normal(0.0, 0.05);
    for (double& x : coeffs) x = to_float(x);
    out.gaussians.push_back(c.unaryExpr(&to_float), q.unaryExpr(&to_float), p.log_scale.unaryExpr(&to_float),
                            to_float(p.opacity_logit), coeffs);
  }

  for (int i = 0; i < spec.frames; ++i) {
    const double cov = frustum_coverage(out.gaussians, out.intrinsics, out.poses[i]);
    if (cov < 0.5) {
      throw GenerationError("frame " + std::to_string(i) + " sees only " +
                            std::to_string(static_cast<int>(100 * cov)) +
                            "% of the primitives (need >= 50%); move the cameras back or shrink the scene");
    }
    const RenderState st = render_with_state(out.gaussians, Camera{out.intrinsics, out.poses[i]},
                                             spec.width, spec.height, spec.background);
    out.images.push_back(st.output.color);
    out.depths.push_back(st.output.depth);
    out.alphas.push_back(st.output.alpha);
  }
  return out;
}

void CurriculumSchedule::validate() const {
  if (start < 1 || end < start) throw ArgumentError("curriculum: need 1 <= start <= end");
  if (ramp_steps < 1) throw ArgumentError("curriculum: ramp_steps must be >= 1");
  if (shape == CurriculumShape::kStaircase && stairs < 1) throw ArgumentError("curriculum: stairs must be >= 1");
}

int curriculum_interval(long long step, const CurriculumSchedule& s) {
  s.validate();
  double frac = std::clamp(static_cast<double>(std::max(step, 0LL)) / s.ramp_steps, 0.0, 1.0);
  if (s.shape == CurriculumShape::kStaircase) frac = std::floor(frac * s.stairs) / s.stairs;
  const long v = std::lround(s.start + (s.end - s.start) * frac);
  return static_cast<int>(std::clamp<long>(v, s.start, s.end));
}

MultiViewSample sample_context_target(int seq_len, int interval, int context_views,
                                      int target_views, Rng& rng, bool extrapolate,
                                      int sequence_id) {
  if (context_views < 2 || target_views < 1) throw ArgumentError("sampling: need V_C >= 2 and V_T >= 1");
  if (interval < 1) throw ArgumentError("sampling: interval must be >= 1");
  if (seq_len < context_views + 1) throw ArgumentError("sampling: sequence too short");
  const long long wanted = static_cast<long long>(interval) * (context_views - 1);
  const int span = static_cast<int>(std::min<long long>(wanted, seq_len - 1));
  if (span < context_views - 1) throw SamplingError("sampling: interval too small for V_C distinct views");

  MultiViewSample s;
  s.sequence_id = sequence_id;
  const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(seq_len - span)));
  for (int k = 0; k < context_views; ++k) {
    s.context.push_back(first + static_cast<int>(std::lround(static_cast<double>(k) * span / (context_views - 1))));
  }
  std::vector<int> pool;
  const int lo = extrapolate ? 0 : first + 1;
  const int hi = extrapolate ? seq_len - 1 : first + span - 1;
  for (int i = lo; i <= hi; ++i) {
    if (!std::binary_search(s.context.begin(), s.context.end(), i)) pool.push_back(i);
  }
  if (static_cast<int>(pool.size()) < target_views) {
    throw SamplingError("sampling: " + std::to_string(pool.size()) + " admissible target frame(s), need " +
                        std::to_string(target_views));
  }
  for (int k = 0; k < target_views; ++k) {
    const auto j = k + static_cast<int>(rng.below(pool.size() - k));
    std::swap(pool[k], pool[j]);
    s.target.push_back(pool[k]);
  }
  std::sort(s.target.begin(), s.target.end());
  return s;
}

void save_sequence(const std::filesystem::path& dir, const GeneratedScene& scene,
                   const nlohmann::json& manifest) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  if (!scene.depths.empty()) fs::create_directories(dir / "depth");
  if (!scene.alphas.empty()) fs::create_directories(dir / "alpha");
  for (std::size_t i = 0; i < scene.images.size(); ++i) {
    const std::string name = frame_name(static_cast<int>(i));
    io::write_png16(dir / "frames" / (name + ".png"), scene.images[i]);
    if (i < scene.depths.size()) io::write_pfm(dir / "depth" / (name + ".pfm"), scene.depths[i]);
    if (i < scene.alphas.size()) io::write_pfm(dir / "alpha" / (name + ".pfm"), scene.alphas[i]);
  }
  if (!scene.poses.empty()) io::write_json(dir / "poses.json", io::poses_to_json(scene.poses));
  io::write_json(dir / "intrinsics.json", io::intrinsics_to_json(scene.intrinsics));
  if (scene.gaussians.size() > 0) io::write_gaussians(dir / "gaussians.bin", scene.gaussians, scene.near, scene.far);
  // Scene-level values the other files do not carry; caller fields win.
  nlohmann::json m = manifest.is_object() ? manifest : nlohmann::json::object();
  if (!m.contains("near")) m["near"] = scene.near;
  if (!m.contains("far")) m["far"] = scene.far;
  if (!m.contains("scene_scale")) m["scene_scale"] = scene.scene_scale;
  if (!m.contains("background")) m["background"] = {scene.background[0], scene.background[1], scene.background[2]};
  io::write_json(dir / "manifest.json", m);
}

Sequence load_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir / "frames")) throw ArgumentError("no frames/ directory in " + dir.string());
  Sequence s;
  for (int i = 0;; ++i) {
    const fs::path f = dir / "frames" / (frame_name(i) + ".png");
    if (!fs::exists(f)) break;
    s.images.push_back(io::read_png(f));
  }
  if (s.images.empty()) throw ArgumentError("no frames in " + dir.string());
  s.intrinsics = io::intrinsics_from_json(io::read_json(dir / "intrinsics.json"));
  if (fs::exists(dir / "poses.json")) s.poses = io::poses_from_json(io::read_json(dir / "poses.json"));
  auto maps = [&](const char* sub) -> std::optional<std::vector<Image>> {
    if (!fs::is_directory(dir / sub)) return std::nullopt;
    std::vector<Image> out;
    for (std::size_t i = 0; i < s.images.size(); ++i) {
      const fs::path f = dir / sub / (frame_name(static_cast<int>(i)) + ".pfm");
      if (!fs::exists(f)) return std::nullopt;
      out.push_back(io::read_pfm(f));
    }
    return out;
  };
  s.depths = maps("depth");
  s.alphas = maps("alpha");
  if (fs::exists(dir / "gaussians.bin")) {
    io::LoadedGaussians g = io::read_gaussians(dir / "gaussians.bin");
    s.gaussians = std::move(g.gaussians);
    s.near = g.near;
    s.far = g.far;
  }
  if (fs::exists(dir / "manifest.json")) {
    s.manifest = io::read_json(dir / "manifest.json");
    if (!s.gaussians) {
      s.near = s.manifest->value("near", s.near);
      s.far = s.manifest->value("far", s.far);
    }
    if (s.manifest->contains("background")) {
      const auto bg = s.manifest->at("background").get<std::vector<double>>();
      if (bg.size() == 3) s.background = Vec3(bg[0], bg[1], bg[2]);
    }
  }
  return s;
}

}  // namespace splatba
