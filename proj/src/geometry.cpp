#include "splatba/geometry.hpp"

#include <cmath>
#include <numbers>

#include "splatba/errors.hpp"

namespace splatba {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Angle between two vectors via atan2, accurate at 0 and pi.
double vector_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace

double fov_to_focal(double fov_rad, int width_px) {
  if (!(fov_rad > 0.0 && fov_rad < std::numbers::pi)) {
    throw DomainError("fov must lie in (0, pi), got " + std::to_string(fov_rad));
  }
  if (width_px < 1) throw DomainError("width must be >= 1");
  return (0.5 * width_px) / std::tan(0.5 * fov_rad);
}

double focal_fov_derivative(double fov_rad, int width_px) {
  const double s = std::sin(0.5 * fov_rad);
  return -0.25 * width_px / (s * s);
}

double focal_to_fov(double focal_px, int width_px) {
  if (!(focal_px > 0.0)) throw DomainError("focal must be positive");
  return 2.0 * std::atan(0.5 * width_px / focal_px);
}

CameraIntrinsics CameraIntrinsics::make(double fov_rad, int width_px, int height_px) {
  if (width_px < 1 || height_px < 1) throw ArgumentError("image dimensions must be >= 1");
  (void)fov_to_focal(fov_rad, width_px);
  return {fov_rad, width_px, height_px};
}

CameraPose CameraPose::inverse() const {
  CameraPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

CameraPose CameraPose::operator*(const CameraPose& other) const {
  CameraPose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool CameraPose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho < tol && std::abs(rotation.determinant() - 1.0) < tol;
}

PoseParams6D PoseParams6D::from_pose(const CameraPose& pose) {
  PoseParams6D p;
  for (int i = 0; i < 3; ++i) {
    p.rot6[i] = pose.rotation(i, 0);
    p.rot6[3 + i] = pose.rotation(i, 1);
    p.trans_h[i] = pose.translation[i];
  }
  p.trans_h[3] = 1.0;
  return p;
}

CameraPose PoseParams6D::decode() const {
  CameraPose pose;
  pose.rotation = rot6d_to_matrix(rot6);
  pose.translation = homogeneous_to_translation(trans_h);
  return pose;
}

PoseParamsGrad& PoseParamsGrad::operator+=(const PoseParamsGrad& o) {
  for (int i = 0; i < 6; ++i) rot6[i] += o.rot6[i];
  for (int i = 0; i < 4; ++i) trans_h[i] += o.trans_h[i];
  return *this;
}

Mat3 rot6d_to_matrix(std::span<const double, 6> rot6) {
  const Vec3 a(rot6[0], rot6[1], rot6[2]);
  const Vec3 b(rot6[3], rot6[4], rot6[5]);
  const double na = a.norm();
  if (!(na > kGramSchmidtEps)) throw DegeneracyError("6D rotation: first vector is near zero");
  const Vec3 b1 = a / na;
  const Vec3 r = b - b1.dot(b) * b1;
  const double nr = r.norm();
  if (!(nr > kGramSchmidtEps)) throw DegeneracyError("6D rotation: vectors are near parallel");
  const Vec3 b2 = r / nr;
  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

std::array<double, 6> rot6d_backward(std::span<const double, 6> rot6, const Mat3& d_rotation) {
  const Vec3 a(rot6[0], rot6[1], rot6[2]);
  const Vec3 b(rot6[3], rot6[4], rot6[5]);
  const double na = a.norm();
  const Vec3 b1 = a / na;
  const double proj = b1.dot(b);
  const Vec3 r = b - proj * b1;
  const double nr = r.norm();
  const Vec3 b2 = r / nr;

  const Vec3 g3 = d_rotation.col(2);
  Vec3 g1 = d_rotation.col(0) + b2.cross(g3);
  const Vec3 g2 = d_rotation.col(1) + g3.cross(b1);

  const Vec3 gr = (g2 - b2 * b2.dot(g2)) / nr;
  const Vec3 gb = gr - b1 * b1.dot(gr);
  g1 += -proj * gr - b * b1.dot(gr);
  const Vec3 ga = (g1 - b1 * b1.dot(g1)) / na;
  return {ga[0], ga[1], ga[2], gb[0], gb[1], gb[2]};
}

Vec3 homogeneous_to_translation(std::span<const double, 4> h) {
  if (!(std::abs(h[3]) > kHomogeneousEps)) {
    throw DegeneracyError("homogeneous translation: |w| <= 1e-8");
  }
  return Vec3(h[0], h[1], h[2]) / h[3];
}

std::array<double, 4> homogeneous_backward(std::span<const double, 4> h, const Vec3& d_t) {
  const double inv_w = 1.0 / h[3];
  const Vec3 t = Vec3(h[0], h[1], h[2]) * inv_w;
  return {d_t[0] * inv_w, d_t[1] * inv_w, d_t[2] * inv_w, -d_t.dot(t) * inv_w};
}

PoseParamsGrad pose_params_backward(const PoseParams6D& params, const Mat3& d_rotation,
                                    const Vec3& d_translation) {
  PoseParamsGrad g;
  g.rot6 = rot6d_backward(params.rot6, d_rotation);
  g.trans_h = homogeneous_backward(params.trans_h, d_translation);
  return g;
}

Mat3 quat_to_matrix(const Vec4& q) {
  const double n = q.norm();
  if (!(n > kQuatEps)) throw DegeneracyError("quaternion norm is near zero");
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Vec4 quat_backward(const Vec4& q, const Mat3& G) {
  const double n = q.norm();
  const Vec4 u = q / n;
  const double w = u[0], x = u[1], y = u[2], z = u[3];
  Vec4 gu;
  gu[0] = 2 * (-z * G(0, 1) + y * G(0, 2) + z * G(1, 0) - x * G(1, 2) - y * G(2, 0) + x * G(2, 1));
  gu[1] = 2 * (y * G(0, 1) + z * G(0, 2) + y * G(1, 0) - 2 * x * G(1, 1) - w * G(1, 2) +
               z * G(2, 0) + w * G(2, 1) - 2 * x * G(2, 2));
  gu[2] = 2 * (-2 * y * G(0, 0) + x * G(0, 1) + w * G(0, 2) + x * G(1, 0) + z * G(1, 2) -
               w * G(2, 0) + z * G(2, 1) - 2 * y * G(2, 2));
  gu[3] = 2 * (-2 * z * G(0, 0) - w * G(0, 1) + x * G(0, 2) + w * G(1, 0) - 2 * z * G(1, 1) +
               y * G(1, 2) + x * G(2, 0) + y * G(2, 1));
  return (gu - u * u.dot(gu)) / n;
}

std::vector<CameraPose> normalize_poses(std::span<const CameraPose> poses) {
  if (poses.empty()) throw ArgumentError("normalize_poses: empty pose list");
  const CameraPose inv0 = poses[0].inverse();
  std::vector<CameraPose> out;
  out.reserve(poses.size());
  out.push_back(CameraPose::identity());
  for (std::size_t v = 1; v < poses.size(); ++v) out.push_back(inv0 * poses[v]);
  return out;
}

Vec3 unproject(const Vec2& pixel, double depth, const CameraIntrinsics& K, const CameraPose& P) {
  if (!(depth > 0.0)) throw DomainError("unproject: depth must be positive");
  const double f = K.focal();
  const Vec3 ray((pixel[0] - K.cx()) / f, (pixel[1] - K.cy()) / f, 1.0);
  return P.rotation * (depth * ray) + P.translation;
}

std::optional<Projection> project(const Vec3& point, const CameraIntrinsics& K,
                                  const CameraPose& P) {
  const Vec3 p = P.to_view(point);
  if (!(p.z() > kNearEps)) return std::nullopt;
  const double f = K.focal();
  return Projection{Vec2(f * p.x() / p.z() + K.cx(), f * p.y() / p.z() + K.cy()), p.z()};
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 m = a.transpose() * b;
  const Vec3 axis(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (m.trace() - 1.0));
}

PoseAngularError pose_angular_errors(const CameraPose& pred, const CameraPose& gt) {
  PoseAngularError e;
  e.rot_deg = rotation_angle_between(pred.rotation, gt.rotation) * kRadToDeg;
  const bool pred_zero = pred.translation.norm() < kZeroTranslation;
  const bool gt_zero = gt.translation.norm() < kZeroTranslation;
  if (pred_zero && gt_zero) {
    e.trans_deg = 0.0;
  } else if (pred_zero || gt_zero) {
    e.trans_deg = 90.0;
  } else {
    e.trans_deg = vector_angle(pred.translation, gt.translation) * kRadToDeg;
  }
  return e;
}

Mat3 axis_angle_to_matrix(const Vec3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Vec3(0, 0, 1));
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = z;
  return R;
}

}  // namespace splatba
