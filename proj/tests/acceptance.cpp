// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails. Optional arguments select criteria by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "recovery_setups.hpp"
#include "reference_renderer.hpp"
#include "splatba/attention.hpp"
#include "splatba/errors.hpp"
#include "splatba/gradcheck.hpp"
#include "splatba/io.hpp"
#include "splatba/losses.hpp"
#include "splatba/metrics.hpp"
#include "splatba/parallel.hpp"

using namespace splatba;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<recovery::ShippedScene> scenes() { return recovery::shipped_scenes(SPLATBA_SCENES_DIR); }

Outcome gradient_suite() {
  GradcheckConfig cfg;  // 20 scenes, 32x32, h 1e-4, rel 1e-3, abs 1e-6
  const auto t0 = std::chrono::steady_clock::now();
  const GradcheckReport r = run_gradcheck(cfg);
  const double secs = seconds_since(t0);
  int checked = 0, failed = 0;
  double worst = 0;
  for (const auto& row : r.rows) {
    checked += row.checked;
    failed += row.failed;
    worst = std::max(worst, row.max_rel_err);
  }
  const std::size_t prims = decode_scene(make_gradcheck_scene(cfg.seed, cfg.size, cfg.context_size)).gaussians.size();
  Outcome o;
  o.pass = r.passed() && r.rows.size() == 8 && r.scenes >= 20 && secs < 300.0 && prims <= 200;
  o.detail = fmt("%d classes, %d scenes, %zu primitives, %d entries, %d failed, max rel err %.2e, %.1fs",
                 static_cast<int>(r.rows.size()), r.scenes, prims, checked, failed, worst, secs);
  return o;
}

Outcome renderer_equivalence() {
  int identical = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto c = reference::make_case(seed, 64, 50);
    const auto a = render(c.gaussians, c.camera, 64, 64, c.background);
    const auto b = reference::render(c.gaussians, c.camera, 64, 64, c.background);
    if (a.color == b.color && a.depth == b.depth && a.alpha == b.alpha) ++identical;
  }
  return {identical == 50, fmt("%d/50 scenes bit-identical at 64x64", identical)};
}

struct SceneResult {
  std::string name;
  bool ok = false;
  std::string line;
};

template <class F>
std::vector<SceneResult> per_scene(const std::vector<recovery::ShippedScene>& list, F&& f) {
  std::vector<SceneResult> out(list.size());
  parallel_for(list.size(), resolve_thread_count(0), [&](std::size_t i) { out[i] = f(list[i]); });
  return out;
}

Outcome summarize(const std::vector<SceneResult>& rs, const std::string& what) {
  Outcome o;
  int ok = 0;
  std::string failures;
  for (const auto& r : rs) {
    std::printf("    %-16s %s %s\n", r.name.c_str(), r.ok ? "ok  " : "FAIL", r.line.c_str());
    if (r.ok) ++ok;
  }
  o.pass = ok == static_cast<int>(rs.size()) && !rs.empty();
  o.detail = fmt("%d/%zu scenes %s", ok, rs.size(), what.c_str());
  return o;
}

Outcome pose_recovery() {
  const auto rs = per_scene(scenes(), [](const recovery::ShippedScene& sc) {
    const GeneratedScene gt = generate_scene(sc.spec, sc.seed);
    const auto run = recovery::pose_run(sc.spec, sc.seed);
    const Experiment ex = build_experiment(gt, run.setup);
    const BAResult r = run_photometric_ba(ex.problem, run.config);
    std::vector<CameraPose> pred;
    for (std::size_t v = 0; v < r.params.view_count(); ++v) pred.push_back(r.params.pose(v));
    const PoseAngularError e = worst_pair_error(pred, *ex.problem.gt_poses);
    const int steps = r.history.back().step;
    return SceneResult{sc.name, e.rot_deg < 0.5 && e.trans_deg < 2.0 && steps <= 2000,
                       fmt("rot %.4f deg, trans %.4f deg after %d steps (start %.2f / %.2f)", e.rot_deg, e.trans_deg,
                           steps, r.history.front().rot_err_deg, r.history.front().trans_err_deg)};
  });
  return summarize(rs, "under 0.5 deg rotation / 2 deg translation within 2000 steps");
}

Outcome fov_recovery() {
  const auto rs = per_scene(scenes(), [](const recovery::ShippedScene& sc) {
    const GeneratedScene gt = generate_scene(sc.spec, sc.seed);
    const auto run = recovery::fov_run(sc.spec, sc.seed);
    const Experiment ex = build_experiment(gt, run.setup);
    const BAResult r = run_photometric_ba(ex.problem, run.config);
    const double err = std::abs(r.params.fov_rad - gt.intrinsics.fov_rad) * 180.0 / std::numbers::pi;
    const double start = (ex.problem.init.fov_rad - gt.intrinsics.fov_rad) * 180.0 / std::numbers::pi;
    return SceneResult{sc.name, err < 1.0 && r.history.back().step <= 2000,
                       fmt("fov error %.4f deg (start %+.2f) after %d steps", err, start, r.history.back().step)};
  });
  return summarize(rs, "within 1 deg of the true FOV");
}

Outcome joint_recovery() {
  std::vector<recovery::ShippedScene> clouds;
  for (const auto& s : scenes())
    if (s.spec.kind == "gaussian-cloud") clouds.push_back(s);
  const auto rs = per_scene(clouds, [](const recovery::ShippedScene& sc) {
    const GeneratedScene gt = generate_scene(sc.spec, sc.seed);
    const auto run = recovery::joint_run(sc.spec, sc.seed);
    const Experiment ex = build_experiment(gt, run.setup);
    const BAResult r = run_photometric_ba(ex.problem, run.config);
    const double p0 = r.history.front().psnr;
    const double p1 = evaluate_objective(ex.problem, r.params, run.config).psnr;
    const double rel0 = context_depth_metrics(ex, ex.problem.init).rel;
    const double rel = context_depth_metrics(ex, r.params).rel;
    return SceneResult{sc.name, p1 - p0 >= 10.0 && rel < 0.1,
                       fmt("target psnr %.2f -> %.2f dB (+%.2f), depth rel %.4f -> %.4f", p0, p1, p1 - p0, rel0, rel)};
  });
  return summarize(rs, "gain >= 10 dB on target views with depth rel < 0.1");
}

Outcome attention_leakage() {
  Rng rng(2024);
  int ctx_identical = 0, tgt_changed = 0;
  double min_delta = INFINITY;
  for (int t = 0; t < 100; ++t) {
    const int views = 2 + static_cast<int>(rng.below(4));
    std::vector<ViewRole> roles{ViewRole::kContext};
    bool has_target = false;
    for (int v = 1; v < views; ++v) {
      const bool target = v == views - 1 ? !has_target || rng.below(2) : rng.below(2) != 0;
      roles.push_back(target ? ViewRole::kTarget : ViewRole::kContext);
      has_target = has_target || target;
    }
    const int tpv = 1 + static_cast<int>(rng.below(4));
    const int heads = 1 + static_cast<int>(rng.below(3));
    const int dim = heads * (2 + static_cast<int>(rng.below(4)));
    TokenSet tok(roles, tpv, dim);
    for (double& x : tok.values) x = rng.normal();
    const auto w = AttentionWeights::random(dim, heads, 1 + static_cast<int>(rng.below(3)), rng);
    const auto mask = build_attention_mask(roles, tpv);
    const TokenSet base = masked_multiview_attention(tok, mask, w);

    TokenSet tgt = tok, ctx = tok;
    for (std::size_t r = 0; r < tok.token_count(); ++r) {
      TokenSet& which = tok.role_of_token(r) == ViewRole::kTarget ? tgt : ctx;
      for (int c = 0; c < dim; ++c) which.row(r)[c] += rng.normal();
    }
    const TokenSet a = masked_multiview_attention(tgt, mask, w);
    const TokenSet b = masked_multiview_attention(ctx, mask, w);
    bool same = true;
    double delta = 0;
    for (std::size_t r = 0; r < tok.token_count(); ++r) {
      for (int c = 0; c < dim; ++c) {
        if (tok.role_of_token(r) == ViewRole::kContext) {
          same = same && a.row(r)[c] == base.row(r)[c];
        } else {
          delta = std::max(delta, std::abs(b.row(r)[c] - base.row(r)[c]));
        }
      }
    }
    ctx_identical += same;
    tgt_changed += delta > 1e-9;
    min_delta = std::min(min_delta, delta);
  }
  return {ctx_identical == 100 && tgt_changed == 100,
          fmt("context outputs identical in %d/100 sets, target outputs moved in %d/100 (min max-delta %.3e)",
              ctx_identical, tgt_changed, min_delta)};
}

// Midpoint rule on the recall step function; error below 1 / (2 cells).
double numeric_auc(std::vector<double> e, double t, int cells = 1000000) {
  std::sort(e.begin(), e.end());
  const double h = t / cells;
  std::size_t below = 0;
  double area = 0;
  for (int k = 0; k < cells; ++k) {
    const double x = (k + 0.5) * h;
    while (below < e.size() && e[below] <= x) ++below;
    area += static_cast<double>(below) / e.size();
  }
  return area * h / t;
}

Outcome metrics_oracles() {
  Rng rng(77);
  const std::vector<double> thr{5, 10, 20};
  double worst = 0;
  for (int set = 0; set < 100; ++set) {
    std::vector<PoseErrorSample> s;
    std::vector<double> e;
    const int n = 1 + static_cast<int>(rng.below(50));
    for (int i = 0; i < n; ++i) {
      s.push_back(PoseErrorSample::from({rng.uniform(0, 30), rng.uniform(0, 30)}));
      e.push_back(s.back().overall_deg);
    }
    const auto auc = pose_auc(s, thr);
    for (std::size_t k = 0; k < thr.size(); ++k) worst = std::max(worst, std::abs(auc[k] - numeric_auc(e, thr[k])));
  }
  Image gt(16, 12, 1);
  for (double& x : gt.data) x = rng.uniform(0.5, 5.0);
  Image pred = gt;
  for (double& x : pred.data) x *= 1.2;
  const DepthMetrics dm = depth_metrics(pred, gt, {}, false);
  const PoseErrorSample five = PoseErrorSample::from({5.0, 0.0});
  const double ten = 10.0;
  const double single = pose_auc(std::span(&five, 1), std::span(&ten, 1))[0];
  const bool ok = worst < 1e-6 && std::abs(dm.rel - 0.2) < 1e-12 && dm.tau == 1.0 && single == 0.5;
  return {ok, fmt("AUC max deviation %.2e over 100 sets; depth (rel %.15f, tau %.1f); single 5 deg @10 = %.6f",
                  worst, dm.rel, dm.tau, single)};
}

Outcome loss_sanity() {
  Rng rng(8);
  Image target(16, 16, 3);
  for (double& x : target.data) x = rng.uniform(0.0, 0.9);
  Image rendered = target;
  for (double& x : rendered.data) x += 0.1;
  const double mse = rendering_loss(rendered, target, 0.0).value;
  CameraPose flip;
  flip.rotation = axis_angle_to_matrix(Vec3(0, 0, 1), std::numbers::pi);
  const double pose = pose_supervision_loss(PoseParams6D::identity(), flip).value;
  const bool ok = std::abs(mse - 0.01) < 1e-12 && std::abs(pose - 0.1 * std::numbers::pi) < 1e-12;
  return {ok, fmt("rendering loss %.15f, 180 deg pose loss %.15f (0.1 pi = %.15f)", mse, pose, 0.1 * std::numbers::pi)};
}

Outcome curriculum_sampling() {
  Rng rng(9);
  int curriculum_bad = 0, sampling_bad = 0, draws = 0;
  for (int t = 0; t < 100000; ++t) {
    CurriculumSchedule s;
    s.start = 1 + static_cast<int>(rng.below(40));
    s.end = s.start + static_cast<int>(rng.below(80));
    s.ramp_steps = 1 + static_cast<int>(rng.below(20000));
    s.shape = rng.below(2) ? CurriculumShape::kLinear : CurriculumShape::kStaircase;
    s.stairs = 1 + static_cast<int>(rng.below(12));
    const long long a = static_cast<long long>(rng.below(30000)) - 1000;
    const long long b = a + static_cast<long long>(rng.below(10000));
    const int ia = curriculum_interval(a, s), ib = curriculum_interval(b, s);
    if (ia > ib || ia < s.start || ib > s.end) ++curriculum_bad;
  }
  for (int t = 0; t < 100000; ++t) {
    const int vc = 2 + static_cast<int>(rng.below(4));
    const int len = vc + 1 + static_cast<int>(rng.below(80));
    const int interval = 1 + static_cast<int>(rng.below(30));
    const int vt = 1 + static_cast<int>(rng.below(4));
    MultiViewSample m;
    try {
      m = sample_context_target(len, interval, vc, vt, rng);
    } catch (const SamplingError&) {
      continue;
    }
    ++draws;
    const std::set<int> ctx(m.context.begin(), m.context.end());
    bool ok = static_cast<int>(ctx.size()) == vc && static_cast<int>(m.target.size()) == vt;
    ok = ok && m.context.back() - m.context.front() == std::min(interval * (vc - 1), len - 1);
    for (int c : m.context) ok = ok && c >= 0 && c < len;
    for (int x : m.target) ok = ok && !ctx.count(x) && x > m.context.front() && x < m.context.back();
    sampling_bad += !ok;
  }
  return {curriculum_bad == 0 && sampling_bad == 0 && draws > 50000,
          fmt("curriculum: %d/100000 violations; sampling: %d/%d violations", curriculum_bad, sampling_bad, draws)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "splatba_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::vector<std::string> csv;
  std::string status;
  for (int threads : {1, 2, 8}) {
    const fs::path out = root / ("t" + std::to_string(threads));
    std::ostringstream o, e;
    const int code = cli::run({"ba", "--config", SPLATBA_CONFIGS_DIR "/pose-recovery.json", "--threads",
                               std::to_string(threads), "--seed", "11", "--out", out.string(), "--no-timestamp"},
                              o, e);
    if (code != 0) return {false, "ba exited with " + std::to_string(code) + ": " + e.str()};
    std::ifstream in(out / "history.csv", std::ios::binary);
    csv.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(root);
  const bool ok = !csv[0].empty() && csv[0] == csv[1] && csv[0] == csv[2];
  const long rows = std::count(csv[0].begin(), csv[0].end(), '\n') - 1;
  return {ok, fmt("history.csv (%ld rows, %zu bytes) %s under 1, 2 and 8 threads", rows, csv[0].size(),
                  ok ? "byte-identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Criterion all[] = {
      {1, "gradient suite", gradient_suite},
      {2, "renderer vs brute force", renderer_equivalence},
      {3, "pose recovery", pose_recovery},
      {4, "fov recovery", fov_recovery},
      {5, "joint recovery", joint_recovery},
      {6, "attention leakage", attention_leakage},
      {7, "metrics oracles", metrics_oracles},
      {8, "loss sanity", loss_sanity},
      {9, "curriculum and sampling", curriculum_sampling},
      {10, "determinism", determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
