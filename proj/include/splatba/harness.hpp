#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splatba/gaussian.hpp"
#include "splatba/geometry.hpp"
#include "splatba/image.hpp"
#include "splatba/rng.hpp"

namespace splatba {

inline constexpr int kSceneSpecVersion = 1;

struct TrajectorySpec {
  std::string kind = "arc";  // arc | line | orbit
  double radius = 2.0;       // camera distance from the scene center (scene scale)
  double span_deg = 30.0;    // arc: total swept angle
  double height = -0.3;      // camera y (y points down)
  double length = 0.8;       // line: total travel along x
};

struct SceneSpec {
  std::string kind = "gaussian-cloud";  // gaussian-cloud | textured-plane | box-room
  int primitives = 150;
  double extent = 0.6;  // half-size of the scene content
  std::uint64_t texture_seed = 1;
  TrajectorySpec trajectory;
  int frames = 5;
  int width = 48;
  int height = 48;
  double fov_deg = 60.0;
  double near = 0.1;
  double far = 100.0;
  int sh_degree = 0;
  Vec3 background = Vec3::Zero();

  /// Throws ArgumentError on out-of-range fields.
  void validate() const;
};

/// Strict parse: unknown fields and a wrong schema_version are rejected.
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json scene_spec_to_json(const SceneSpec& spec);

/// Ground truth of a generated scene, expressed in the first frame's camera
/// frame (poses are normalized, gaussians moved accordingly).
struct GeneratedScene {
  GaussianSet gaussians;
  CameraIntrinsics intrinsics;
  std::vector<CameraPose> poses;
  std::vector<Image> images;
  std::vector<Image> depths;
  std::vector<Image> alphas;
  double near = 0.1;
  double far = 100.0;
  double scene_scale = 1.0;  // trajectory radius
  Vec3 background = Vec3::Zero();
};

/// Deterministic for fixed (spec, seed). Throws GenerationError when some
/// frame sees fewer than half of the primitives.
GeneratedScene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Fraction of primitives whose center projects inside the image of `pose`.
double frustum_coverage(const GaussianSet& g, const CameraIntrinsics& K, const CameraPose& pose);

enum class CurriculumShape { kLinear, kStaircase };

struct CurriculumSchedule {
  int start = 2;
  int end = 20;
  int ramp_steps = 1000;
  CurriculumShape shape = CurriculumShape::kLinear;
  int stairs = 4;  // staircase only

  void validate() const;
};

/// Context frame interval at a training step.
int curriculum_interval(long long step, const CurriculumSchedule& schedule);

struct MultiViewSample {
  std::vector<int> context;
  std::vector<int> target;
  int sequence_id = 0;
};

/// Context endpoints `interval * (V_C - 1)` frames apart (clamped to the
/// sequence), intermediate context views evenly spaced, targets drawn without
/// replacement from the non-context frames strictly between the endpoints
/// (anywhere in the sequence with `extrapolate`).
MultiViewSample sample_context_target(int seq_len, int interval, int context_views,
                                      int target_views, Rng& rng, bool extrapolate = false,
                                      int sequence_id = 0);

/// On-disk sequence (see docs/formats.md).
struct Sequence {
  std::vector<Image> images;
  std::optional<std::vector<CameraPose>> poses;
  std::optional<std::vector<Image>> depths;
  std::optional<std::vector<Image>> alphas;
  CameraIntrinsics intrinsics;
  std::optional<GaussianSet> gaussians;
  double near = 0.1;
  double far = 100.0;
  Vec3 background = Vec3::Zero();  // from the manifest when present
  std::optional<nlohmann::json> manifest;
};

/// Writes frames/%06d.png (16-bit), depth/%06d.pfm, alpha/%06d.pfm,
/// poses.json, intrinsics.json, gaussians.bin and manifest.json. Empty
/// members of `scene` are skipped.
void save_sequence(const std::filesystem::path& dir, const GeneratedScene& scene,
                   const nlohmann::json& manifest);

/// Missing optional files yield absent members; malformed files throw
/// ParseError naming the file and byte offset.
Sequence load_sequence(const std::filesystem::path& dir);

}  // namespace splatba
