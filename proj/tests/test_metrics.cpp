#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "splatba/errors.hpp"
#include "splatba/metrics.hpp"
#include "test_util.hpp"

using namespace splatba;

namespace {

Image random_image(Rng& rng, int w, int h, int c) {
  Image img(w, h, c);
  for (double& x : img.data) x = rng.uniform();
  return img;
}

// Direct sliding-window SSIM with its own Gaussian window.
double naive_ssim(const Image& a, const Image& b, int win = 11, double sigma = 1.5) {
  std::vector<double> g(win);
  double s = 0;
  for (int i = 0; i < win; ++i) s += g[i] = std::exp(-0.5 * std::pow((i - 0.5 * (win - 1)) / sigma, 2));
  for (double& x : g) x /= s;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  int count = 0;
  for (int c = 0; c < a.channels; ++c) {
    for (int y = 0; y + win <= a.height; ++y) {
      for (int x = 0; x + win <= a.width; ++x) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int j = 0; j < win; ++j) {
          for (int i = 0; i < win; ++i) {
            const double w = g[i] * g[j];
            const double va = a.at(x + i, y + j, c), vb = b.at(x + i, y + j, c);
            ma += w * va;
            mb += w * vb;
            aa += w * va * va;
            bb += w * vb * vb;
            ab += w * va * vb;
          }
        }
        const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
        total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
        ++count;
      }
    }
  }
  return total / count;
}

// Midpoint-rule integral of the recall curve on [0, t], normalized by t.
double numeric_auc(std::vector<double> errors, double t, int cells = 1000000) {
  std::sort(errors.begin(), errors.end());
  const double h = t / cells;
  std::size_t below = 0;
  double area = 0;
  for (int k = 0; k < cells; ++k) {
    const double x = (k + 0.5) * h;
    while (below < errors.size() && errors[below] <= x) ++below;
    area += static_cast<double>(below) / errors.size();
  }
  return area * h / t;
}

}  // namespace

TEST_CASE("psnr") {
  Rng rng(1);
  const Image a = random_image(rng, 8, 8, 3);
  CHECK(psnr(a, a) == kPsnrExact);
  Image b(8, 8, 3, 0.5), c(8, 8, 3, 0.6), d(8, 8, 3, 0.51);
  CHECK(psnr(b, c) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(psnr(b, d) == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK_THROWS_AS(psnr(a, Image(8, 7, 3)), ArgumentError);
}

TEST_CASE("ssim") {
  Rng rng(2);
  const Image a = random_image(rng, 19, 16, 3), b = random_image(rng, 19, 16, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Image neg = a;
  for (double& x : neg.data) x = 1.0 - x;
  CHECK(ssim(a, neg) < 1.0);
  CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) < 1e-9);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(Image(5, 5, 1), Image(5, 5, 1)), ArgumentError);

  const auto w = gaussian_window(11, 1.5);
  double sum = 0;
  for (double x : w) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w[0] == w[10]);

  // Gradient against central differences.
  const Image s = random_image(rng, 13, 12, 1), t = random_image(rng, 13, 12, 1);
  const auto g = ssim_with_grad(s, t);
  for (int k = 0; k < 20; ++k) {
    const std::size_t i = rng.below(s.data.size());
    const double fd = testutil::central_diff([&](double x) { Image p = s; p.data[i] = x; return ssim(p, t); },
                                             s.data[i], 1e-5);
    CHECK(testutil::close(g.grad.data[i], fd, 1e-5, 1e-9));
  }
}

TEST_CASE("pose AUC") {
  const std::vector<double> thr{5, 10, 20};
  std::vector<PoseErrorSample> zeros(4);
  for (double v : pose_auc(zeros, thr)) CHECK(v == 1.0);
  const PoseErrorSample five = PoseErrorSample::from({5.0, 1.0});
  CHECK(five.overall_deg == 5.0);
  const double t10 = 10.0;
  CHECK(pose_auc(std::span(&five, 1), std::span(&t10, 1))[0] == 0.5);
  CHECK(std::abs(numeric_auc({5.0}, 10.0) - 0.5) < 1e-6);
  const PoseErrorSample big = PoseErrorSample::from({1.0, 30.0});
  CHECK(pose_auc(std::span(&big, 1), std::span(&t10, 1))[0] == 0.0);
  CHECK_THROWS_AS(pose_auc({}, thr), ArgumentError);
  const double bad = 0.0;
  CHECK_THROWS_AS(pose_auc(zeros, std::span(&bad, 1)), ArgumentError);

  Rng rng(4);
  for (int set = 0; set < 10; ++set) {
    std::vector<PoseErrorSample> s;
    std::vector<double> e;
    const int n = 1 + static_cast<int>(rng.below(40));
    for (int i = 0; i < n; ++i) {
      s.push_back(PoseErrorSample::from({rng.uniform(0, 25), rng.uniform(0, 25)}));
      e.push_back(s.back().overall_deg);
    }
    const auto auc = pose_auc(s, thr);
    for (std::size_t k = 0; k < thr.size(); ++k) CHECK(std::abs(auc[k] - numeric_auc(e, thr[k])) < 1e-6);
    CHECK(auc[0] <= auc[1]);
    CHECK(auc[1] <= auc[2]);
  }
}

TEST_CASE("relative pose errors") {
  Rng rng(6);
  std::vector<CameraPose> gt;
  for (int i = 0; i < 5; ++i) gt.push_back(testutil::random_pose(rng));
  const auto self = relative_pose_errors(gt, gt);
  CHECK(self.size() == 10);
  for (const auto& s : self) CHECK(s.overall_deg < 1e-5);
  // A global rigid change of the predicted frame leaves relative errors alone.
  const CameraPose G = testutil::random_pose(rng);
  std::vector<CameraPose> moved;
  for (const auto& p : gt) moved.push_back(G * p);
  for (const auto& s : relative_pose_errors(moved, gt)) CHECK(s.overall_deg < 1e-5);
  CHECK_THROWS_AS(relative_pose_errors(std::span(gt).first(2), gt), ArgumentError);
}

TEST_CASE("depth metrics") {
  Rng rng(7);
  Image gt(6, 5, 1);
  for (double& x : gt.data) x = rng.uniform(0.5, 4.0);
  const auto same = depth_metrics(gt, gt, {}, true);
  CHECK(same.rel == 0.0);
  CHECK(same.tau == 1.0);
  Image p12 = gt, p2 = gt;
  for (double& x : p12.data) x *= 1.2;
  for (double& x : p2.data) x *= 2.0;
  const auto m12 = depth_metrics(p12, gt, {}, false);
  CHECK(std::abs(m12.rel - 0.2) < 1e-12);
  CHECK(m12.tau == 1.0);
  const auto m2 = depth_metrics(p2, gt, {}, true);
  CHECK(m2.rel == 0.0);
  CHECK(m2.tau == 1.0);
  CHECK(m2.scale == 0.5);

  // Mask: invalid pixels are ignored entirely.
  Image off = gt;
  off.data[0] = 100.0;
  std::vector<std::uint8_t> mask(gt.data.size(), 1);
  mask[0] = 0;
  CHECK(depth_metrics(off, gt, mask, false).rel == 0.0);
  CHECK(depth_metrics(off, gt, {}, false).rel > 0.0);
  CHECK_THROWS_AS(depth_metrics(gt, gt, std::vector<std::uint8_t>(gt.data.size(), 0)), ArgumentError);
  CHECK_THROWS_AS(depth_metrics(gt, gt, std::vector<std::uint8_t>(3, 1)), ArgumentError);
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(median({}), ArgumentError);
}
