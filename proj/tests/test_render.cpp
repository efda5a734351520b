#include <cmath>

#include "doctest.h"
#include "reference_renderer.hpp"
#include "splatba/errors.hpp"
#include "splatba/render.hpp"
#include "test_util.hpp"

using namespace splatba;

namespace {

GaussianSet single(const Vec3& mu, double logit, const Vec3& color, double scale = 0.05) {
  GaussianSet g(0);
  const double c[3] = {color_to_sh0(color[0]), color_to_sh0(color[1]), color_to_sh0(color[2])};
  g.push_back(mu, Vec4(1, 0, 0, 0), Vec3::Constant(std::log(scale)), logit, c);
  return g;
}

Camera identity_camera(int w, int h, double fov = 1.0) {
  return {CameraIntrinsics::make(fov, w, h), CameraPose::identity()};
}

}  // namespace

TEST_CASE("EWA projection") {
  const auto K = CameraIntrinsics::make(1.0, 33, 33);
  const double d = 4.0, s = 0.1, f = K.focal();
  RenderConfig cfg;
  const auto p = project_gaussian(Vec3(0, 0, d), s * s * Mat3::Identity(), K, CameraPose::identity(), cfg);
  REQUIRE(p);
  CHECK(p->mean == Vec2(K.cx(), K.cy()));
  const double want = (f * s / d) * (f * s / d) + cfg.blur;
  CHECK(p->cov(0, 0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(p->cov(1, 1) == doctest::Approx(want).epsilon(1e-12));
  CHECK(std::abs(p->cov(0, 1)) < 1e-15);
  CHECK(p->depth == d);
  CHECK_FALSE(project_gaussian(Vec3(0, 0, -1), Mat3::Identity(), K, CameraPose::identity()));

  // Finite-difference Jacobian of the pixel mean at the optical axis.
  const double h = 1e-6;
  const auto px = project_gaussian(Vec3(h, 0, d), s * s * Mat3::Identity(), K, CameraPose::identity());
  CHECK((px->mean.x() - p->mean.x()) / h == doctest::Approx(f / d).epsilon(1e-6));

  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const Vec3 ls(rng.uniform(-4, 0), rng.uniform(-4, 0), rng.uniform(-4, 0));
    const Vec3 mu(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 5));
    const auto r = project_gaussian(mu, build_covariance(q, ls), K, testutil::random_pose(rng, 0.2, 0.2));
    if (!r) continue;
    CHECK(r->cov(0, 1) == r->cov(1, 0));
    CHECK(r->cov(0, 0) > 0);
    CHECK(r->cov.determinant() > 0);
  }
}

TEST_CASE("render: empty scene is the background") {
  const auto out = render(GaussianSet(0), identity_camera(8, 6), 8, 6, Vec3::Zero());
  for (double v : out.color.data) CHECK(v == 0.0);
  for (double v : out.alpha.data) CHECK(v == 0.0);
  for (double v : out.depth.data) CHECK(v == 0.0);
  const auto grey = render(GaussianSet(0), identity_camera(4, 4), 4, 4, Vec3(0.2, 0.3, 0.4));
  CHECK(grey.color.at(3, 2, 1) == 0.3);
  CHECK(render_depth_only(GaussianSet(0), identity_camera(4, 4), 4, 4).data == std::vector<double>(16, 0.0));
}

TEST_CASE("render: one opaque primitive on a pixel center") {
  const auto g = single(Vec3(0, 0, 5), 50.0, Vec3(0.25, 0.5, 0.75));
  const auto out = render(g, identity_camera(33, 33), 33, 33, Vec3(1, 1, 1));
  CHECK(out.alpha.at(16, 16) == 1.0);
  CHECK(out.depth.at(16, 16) == 5.0);
  CHECK(out.color.at(16, 16, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(out.color.at(16, 16, 2) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(render_depth_only(g, identity_camera(33, 33), 33, 33).at(16, 16) == 5.0);
}

TEST_CASE("render: two coincident primitives composite front to back") {
  GaussianSet g = single(Vec3(0, 0, 3), 0.0, Vec3(1, 0, 0));
  const auto blue = single(Vec3(0, 0, 3.5), 50.0, Vec3(0, 0, 1));
  g.push_back(blue.centers[0], blue.quats[0], blue.log_scales[0], blue.opacity_logits[0], blue.sh_of(0));
  const auto out = render(g, identity_camera(33, 33), 33, 33, Vec3::Zero());
  CHECK(out.color.at(16, 16, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.color.at(16, 16, 1) == doctest::Approx(0.0));
  CHECK(out.color.at(16, 16, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.alpha.at(16, 16) == 1.0);
  CHECK(out.depth.at(16, 16) == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("render: tiled output equals the untiled reference") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto c = reference::make_case(seed);
    const auto tiled = render(c.gaussians, c.camera, 64, 64, c.background);
    const auto ref = reference::render(c.gaussians, c.camera, 64, 64, c.background);
    CHECK(tiled.color == ref.color);
    CHECK(tiled.depth == ref.depth);
    CHECK(tiled.alpha == ref.alpha);
  }
}

TEST_CASE("render: thread count and tile size do not change a single bit") {
  const auto c = reference::make_case(7, 64, 120);
  RenderConfig cfg;
  const auto base = render(c.gaussians, c.camera, 64, 64, c.background, cfg);
  for (int threads : {2, 3, 8}) {
    cfg.threads = threads;
    const auto o = render(c.gaussians, c.camera, 64, 64, c.background, cfg);
    CHECK(o.color == base.color);
    CHECK(o.depth == base.depth);
  }
  cfg.threads = 1;
  for (int tile : {1, 7, 64}) {
    cfg.tile_size = tile;
    CHECK(render(c.gaussians, c.camera, 64, 64, c.background, cfg).color == base.color);
  }
}

TEST_CASE("render: invariants") {
  const auto c = reference::make_case(21);
  const auto out = render(c.gaussians, c.camera, 64, 64, c.background);
  for (double a : out.alpha.data) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0 + 1e-12);
  }
  for (double v : out.color.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
  CHECK(render_depth_only(c.gaussians, c.camera, 64, 64) == out.depth);
  CHECK_THROWS_AS(render(c.gaussians, c.camera, 32, 64, c.background), ArgumentError);
}

TEST_CASE("render backward") {
  const auto c = reference::make_case(5, 32, 30);
  const auto st = render_with_state(c.gaussians, c.camera, 32, 32, c.background);
  const SplatGradients zero = render_backward(c.gaussians, st, Image(32, 32, 3, 0.0));
  for (double v : zero.gaussians.d_opacity_logit) CHECK(v == 0.0);
  CHECK(zero.camera.d_focal == 0.0);

  GaussianSet other = c.gaussians;
  other.centers.pop_back();
  CHECK_THROWS_AS(render_backward(other, st, Image(32, 32, 3)), UsageError);
  CHECK_THROWS_AS(render_backward(c.gaussians, RenderState{}, Image(32, 32, 3)), UsageError);
  CHECK_THROWS_AS(render_backward(c.gaussians, st, Image(31, 32, 3)), ArgumentError);

  // d pixel / d opacity logit of a lone Gaussian.
  const auto g = single(Vec3(0.05, -0.02, 3), 0.3, Vec3(0.9, 0.4, 0.1), 0.1);
  const Camera cam = identity_camera(32, 32);
  const auto s1 = render_with_state(g, cam, 32, 32, Vec3(0.1, 0.1, 0.1));
  Image sel(32, 32, 3, 0.0);
  sel.at(17, 15, 0) = 1.0;
  const double analytic = render_backward(g, s1, sel).gaussians.d_opacity_logit[0];
  const double h = 1e-4;
  auto pixel = [&](double logit) {
    GaussianSet gg = g;
    gg.opacity_logits[0] = logit;
    return render(gg, cam, 32, 32, Vec3(0.1, 0.1, 0.1)).color.at(17, 15, 0);
  };
  const double fd = (pixel(0.3 + h) - pixel(0.3 - h)) / (2 * h);
  CHECK(analytic != 0.0);
  CHECK(std::abs(analytic - fd) <= 1e-3 * std::abs(fd));
}

TEST_CASE("render_replay reproduces the base render") {
  const auto c = reference::make_case(9, 40, 60);
  const auto st = render_with_state(c.gaussians, c.camera, 40, 40, c.background);
  const Image replay = render_replay(c.gaussians, c.camera, st);
  for (std::size_t i = 0; i < replay.data.size(); ++i)
    CHECK(std::abs(replay.data[i] - st.output.color.data[i]) < 1e-12);
}
