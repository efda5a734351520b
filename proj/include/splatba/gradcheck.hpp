#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "splatba/scene.hpp"

namespace splatba {

/// Parameter groups covered by the finite-difference suite.
enum class GradClass { kSh, kOpacity, kScale, kQuat, kDepth, kContextPose, kTargetPose, kFov };

inline constexpr std::array<GradClass, 8> kAllGradClasses{
    GradClass::kSh,    GradClass::kOpacity,     GradClass::kScale,      GradClass::kQuat,
    GradClass::kDepth, GradClass::kContextPose, GradClass::kTargetPose, GradClass::kFov};

const char* grad_class_name(GradClass c);
/// "sh", "opacity", "scale", "quat", "depth", "context-pose", "target-pose", "fov".
GradClass grad_class_from_name(const std::string& name);

struct GradcheckConfig {
  int scenes = 20;
  std::uint64_t seed = 1;
  int size = 32;          // target image side
  int context_size = 8;   // two context views of context_size^2 Gaussians each
  double h = 1e-4;
  double rel_tol = 1e-3;
  double abs_tol = 1e-6;
  int samples = 6;        // entries per class per scene (largest gradients first)
  std::vector<GradClass> classes{kAllGradClasses.begin(), kAllGradClasses.end()};
  std::optional<GradClass> inject_fault;  // scales that class's analytic gradient by 1.05
  int threads = 1;
};

/// Random scene with two context views and one target view (view 2).
SceneParameters make_gradcheck_scene(std::uint64_t seed, int size, int context_size);

struct GradcheckRow {
  GradClass cls = GradClass::kSh;
  int checked = 0;
  int failed = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;  // |a - n| / max(|a|, |n|) over entries above the absolute floor
  std::uint64_t worst_seed = 0;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  int scenes = 0;
  double seconds = 0.0;
  bool passed() const;
  std::string table() const;
};

/// Central differences of <G, image> against the analytic backward pass. The
/// image is re-rendered with the base render's compositing structure held fixed
/// (render_replay), so culling, clipping and sort swaps inside the
/// +-h interval do not enter the quotient.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

}  // namespace splatba
