#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace splatba {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Residual-norm threshold below which Gram-Schmidt inputs count as degenerate.
inline constexpr double kGramSchmidtEps = 1e-8;
/// Minimum |w| of a homogeneous translation.
inline constexpr double kHomogeneousEps = 1e-8;
/// Minimum quaternion norm.
inline constexpr double kQuatEps = 1e-12;
/// Points with camera-frame z at or below this are behind the camera.
inline constexpr double kNearEps = 1e-6;
/// Translations shorter than this have no direction.
inline constexpr double kZeroTranslation = 1e-8;

/// Focal length in pixels for a horizontal field of view.
double fov_to_focal(double fov_rad, int width_px);
/// d focal / d fov at fixed width.
double focal_fov_derivative(double fov_rad, int width_px);
double focal_to_fov(double focal_px, int width_px);

/// Pinhole camera with one FOV shared by both axes and the principal point at
/// the exact image center. Pixel centers sit at integer coordinates, so the
/// center is ((W-1)/2, (H-1)/2).
struct CameraIntrinsics {
  double fov_rad = 0.0;
  int width_px = 0;
  int height_px = 0;

  /// Validating constructor; throws DomainError / ArgumentError.
  static CameraIntrinsics make(double fov_rad, int width_px, int height_px);

  double focal() const { return fov_to_focal(fov_rad, width_px); }
  double cx() const { return 0.5 * (width_px - 1); }
  double cy() const { return 0.5 * (height_px - 1); }
};

/// Rigid transform taking view-camera coordinates into the canonical frame:
/// X_canon = rotation * X_view + translation.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static CameraPose identity() { return {}; }

  CameraPose inverse() const;
  /// (this ∘ other)(x) = this(other(x)).
  CameraPose operator*(const CameraPose& other) const;
  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  /// Canonical-frame point expressed in this view's frame.
  Vec3 to_view(const Vec3& x) const { return rotation.transpose() * (x - translation); }

  bool is_valid(double tol = 1e-6) const;
};

/// Raw, unconstrained pose parameters: 6D rotation (two columns fed through
/// Gram-Schmidt) and a 4-coordinate homogeneous translation.
struct PoseParams6D {
  std::array<double, 6> rot6{1, 0, 0, 0, 1, 0};
  std::array<double, 4> trans_h{0, 0, 0, 1};

  static PoseParams6D identity() { return {}; }
  static PoseParams6D from_pose(const CameraPose& pose);

  /// Throws DegeneracyError on degenerate rotation or |trans_h[3]| <= eps.
  CameraPose decode() const;
};

/// Gradient of a scalar w.r.t. PoseParams6D fields.
struct PoseParamsGrad {
  std::array<double, 6> rot6{};
  std::array<double, 4> trans_h{};

  PoseParamsGrad& operator+=(const PoseParamsGrad& o);
};

Mat3 rot6d_to_matrix(std::span<const double, 6> rot6);
/// Pulls back dL/dR (3x3, entrywise) onto the 6 raw inputs.
std::array<double, 6> rot6d_backward(std::span<const double, 6> rot6, const Mat3& d_rotation);

Vec3 homogeneous_to_translation(std::span<const double, 4> trans_h);
std::array<double, 4> homogeneous_backward(std::span<const double, 4> trans_h,
                                           const Vec3& d_translation);

/// Pulls back (dL/dR, dL/dT) of the decoded pose onto the raw parameters.
PoseParamsGrad pose_params_backward(const PoseParams6D& params, const Mat3& d_rotation,
                                    const Vec3& d_translation);

/// Quaternion (w, x, y, z), normalized internally.
Mat3 quat_to_matrix(const Vec4& q);
Vec4 quat_backward(const Vec4& q, const Mat3& d_rotation);

/// out[0] = identity, out[v] = poses[0]^-1 ∘ poses[v].
std::vector<CameraPose> normalize_poses(std::span<const CameraPose> poses);

/// Lifts pixel (u, v) at camera-frame depth into the canonical frame.
Vec3 unproject(const Vec2& pixel, double depth, const CameraIntrinsics& K, const CameraPose& P);

struct Projection {
  Vec2 pixel;
  double depth = 0.0;
};

/// std::nullopt is the behind-camera signal (view-frame z <= kNearEps).
std::optional<Projection> project(const Vec3& point, const CameraIntrinsics& K,
                                  const CameraPose& P);

struct PoseAngularError {
  double rot_deg = 0.0;
  double trans_deg = 0.0;
};

/// Rotation geodesic angle and translation direction angle, in degrees.
/// Both translations shorter than kZeroTranslation give 0; exactly one gives 90.
PoseAngularError pose_angular_errors(const CameraPose& pred, const CameraPose& gt);

/// Geodesic angle (radians) between two rotations, stable near 0 and pi.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Rotation about a unit axis.
Mat3 axis_angle_to_matrix(const Vec3& axis, double angle_rad);

/// Camera-to-world rotation for a camera at `eye` looking at `target`
/// (x right, y down, z forward).
Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, -1, 0));

}  // namespace splatba
