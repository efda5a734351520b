#include "doctest.h"
#include "splatba/errors.hpp"
#include "splatba/gradcheck.hpp"
#include "splatba/scene.hpp"
#include "test_util.hpp"

using namespace splatba;

TEST_CASE("scene decoding") {
  const SceneParameters s = make_gradcheck_scene(3, 32, 8);
  const DecodedScene d = decode_scene(s);
  CHECK(d.poses[0].rotation == Mat3::Identity());
  CHECK(d.poses[0].translation == Vec3::Zero());
  CHECK(d.context_offset.size() == s.context_count());
  CHECK(d.gaussians.size() == d.world_offset + s.world.size());
  // Lifted centers re-project onto their own pixels in their own view.
  for (std::size_t c = 0; c < s.context_count(); ++c) {
    const auto& cv = s.context[c];
    for (int v = 0; v < cv.depth.height; ++v) {
      for (int u = 0; u < cv.depth.width; ++u) {
        const auto p = project(d.gaussians.centers[d.context_offset[c] + v * cv.depth.width + u],
                               d.intrinsics[c], d.poses[c]);
        REQUIRE(p);
        CHECK((p->pixel - Vec2(u, v)).norm() < 1e-6);
      }
    }
  }
}

TEST_CASE("view 0 is never a parameter") {
  SceneParameters s = make_gradcheck_scene(4, 32, 8);
  s.poses[0].rot6 = {0, 1, 0, 1, 0, 0};  // ignored
  CHECK(s.pose(0).rotation == Mat3::Identity());
  Image g(32, 32, 3, 1.0);
  const auto grads = render_backward(s, 2, Vec3::Zero(), g);
  for (double x : grads.d_pose[0].rot6) CHECK(x == 0.0);
  for (double x : grads.d_pose[0].trans_h) CHECK(x == 0.0);
  CHECK(grads.all_finite());
  bool nonzero = false;
  for (double x : grads.d_pose[2].rot6) nonzero |= x != 0.0;
  CHECK(nonzero);
}

TEST_CASE("scene validation") {
  SceneParameters s = make_gradcheck_scene(5, 32, 8);
  SceneParameters bad = s;
  bad.view_sizes.pop_back();
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = s;
  bad.context[0].quats.pop_back();
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = s;
  bad.context.clear();
  bad.world = GaussianSet(s.sh_degree);
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = s;
  bad.poses.clear();
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("gradient accumulation") {
  const SceneParameters s = make_gradcheck_scene(6, 32, 8);
  Image g(32, 32, 3, 0.5);
  const auto a = render_backward(s, 2, Vec3::Zero(), g);
  RenderGradients sum = RenderGradients::zeros_like(s);
  sum += a;
  sum += a;
  CHECK(sum.d_fov == 2.0 * a.d_fov);
  CHECK(sum.context[1].d_depth_raw[7] == 2.0 * a.context[1].d_depth_raw[7]);
  CHECK(sum.d_pose[1].trans_h[2] == 2.0 * a.d_pose[1].trans_h[2]);
}
