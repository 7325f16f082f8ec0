// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "metric_oracle.hpp"
#include "naive_loss.hpp"
#include "stcseg/gradcheck.hpp"
#include "stcseg/metrics.hpp"
#include "stcseg/puzzle_loss.hpp"
#include "stcseg/scene_sim.hpp"
#include "stcseg/signal_gen.hpp"
#include "stcseg/suite.hpp"
#include "stcseg/tracker.hpp"
#include "test_frames.hpp"
#include "tracking_fixtures.hpp"

using namespace stcseg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Lines are collected and printed in criterion order at the end.
std::map<int, std::string> g_lines;
std::vector<std::string> g_notes;
int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
  char head[32];
  std::snprintf(head, sizeof(head), "criterion %2d: %s  ", id, pass ? "PASS" : "FAIL");
  g_lines[id] = head + detail;
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Criterion body that may throw; an exception counts as a failure.
void guarded(std::initializer_list<int> ids, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    for (int id : ids) report(id, false, std::string("exception: ") + e.what());
  }
}

naive::Instance random_naive(std::uint64_t seed, int h, int w) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  std::bernoulli_distribution b(0.3);
  naive::Instance in;
  in.h = h;
  in.w = w;
  in.logits.resize(h * w);
  in.label.resize(h * w);
  for (double& z : in.logits) z = n(rng);
  for (int& m : in.label) m = b(rng);
  in.x1 = std::uniform_int_distribution<int>(0, w - 1)(rng);
  in.y1 = std::uniform_int_distribution<int>(0, h - 1)(rng);
  in.x2 = std::uniform_int_distribution<int>(in.x1 + 1, w)(rng);
  in.y2 = std::uniform_int_distribution<int>(in.y1 + 1, h)(rng);
  return in;
}

void criterion_1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    worst = std::max(worst, gradcheck(random_gradcheck_instance(seed, 16, 16), 1e-4).max_rel_error);
  }
  const double dt = seconds_since(t0);
  report(1, worst < 1e-5 && dt < 10.0,
         "gradcheck 20 seeds 16x16: max rel error " + fmt("%.3e", worst) + ", " + fmt("%.2f", dt) + " s");
}

void criterion_2() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const naive::Instance in = random_naive(seed, 8, 8);
    BinaryMask label(8, 8);
    for (int k = 0; k < 64; ++k) label.set(k / 8, k % 8, in.label[k] != 0);
    const LossBreakdown l = puzzle_loss(LogitGrid(8, 8, in.logits), label, {in.x1, in.y1, in.x2, in.y2});
    const naive::Terms t = naive::puzzle_loss(in);
    worst = std::max({worst, std::abs(l.l_bd - t.bd), std::abs(l.l_bx_x - t.bx_x),
                      std::abs(l.l_bx_y - t.bx_y), std::abs(l.total - (t.bd + t.bx_x + t.bx_y))});
  }
  BinaryMask one(2, 2);
  one.set(0, 1, true);
  const double e1 = std::abs(boundary_loss(ProbGrid(2, 2, 0.5), one) - 0.25 * std::log(2.0));
  const double e2 = std::abs(dice_prime({0.5, 0.5}, {1, 0}) - (1.0 - 1.0 / 1.5 + 0.25));
  ProbGrid inner(6, 6, 0.0);
  for (int i = 2; i < 4; ++i) {
    for (int j = 2; j < 4; ++j) inner(i, j) = 1.0;
  }
  const BBox b{1, 1, 5, 5};
  const BinaryMask ind = box_indicator(b, 6, 6);
  const auto [ix, iy] = box_term(inner, b);
  // Projections [0,0,1,1,0,0] against [0,1,1,1,1,0]: dice 1 - 4/6, no excess.
  const double e3 = std::max({std::abs(ix - (1.0 - 4.0 / 6.0)), std::abs(iy - (1.0 - 4.0 / 6.0)),
                              position_penalty(project_x(inner), project_x(ind)),
                              position_penalty(project_y(inner), project_y(ind))});
  const double ex = std::max({e1, e2, e3});
  report(2, worst <= 1e-12 && ex <= 1e-9,
         "naive oracle 100 instances: max diff " + fmt("%.2e", worst) + "; hand examples max diff " +
             fmt("%.2e", ex));
}

void criterion_3() {
  std::size_t cases = 0;
  bool ok = true;
  for (int n = 1; n <= 8; ++n) {
    for (int gb = 1; gb < (1 << n); ++gb) {
      ProjectionVector g(n);
      for (int k = 0; k < n; ++k) g[k] = (gb >> k) & 1;
      for (int pb = 0; pb < (1 << n); ++pb) {
        ProjectionVector p(n);
        for (int k = 0; k < n; ++k) p[k] = (pb >> k) & 1;
        const double pen = position_penalty(p, g);
        ok = ok && (((pb & ~gb) == 0) ? pen == 0.0 : pen > 0.0);
        ++cases;
      }
    }
  }
  report(3, ok, "position penalty exhaustive over " + std::to_string(cases) + " projection pairs, n <= 8");
}

void criterion_4() {
  const auto t0 = Clock::now();
  const testing_frames::SquareFrame f = testing_frames::square_frame();
  const BinaryMask m = generate_pseudo_label(f.depth, f.flow);
  const double dist = testing_frames::max_distance_to_boundary(m, f.square);
  const SignalConfig cfg;
  const bool uniform_empty = !generate_pseudo_label(ScalarGrid(32, 32, 5.0), VectorGrid(32, 32, 2)).any();
  const double dt = seconds_since(t0);
  const bool ok = m.any() && dist <= 2.0 * static_cast<double>(cfg.pool_stride) && uniform_empty && dt < 1.0;
  report(4, ok,
         "32x32 square: " + std::to_string(m.count()) + " positives, max distance to boundary " +
             fmt("%.2f", dist) + " px, uniform frame " + (uniform_empty ? "empty" : "NOT empty") +
             ", " + fmt("%.3f", dt) + " s");
}

const TrendCheck* find_trend(const SuiteReport& r, const std::string& name) {
  for (const TrendCheck& t : r.trends) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void suite_criteria() {
  const auto t0 = Clock::now();
  const SuiteReport r = run_ablation_suite(SuiteConfig{});
  const double dt = seconds_since(t0);
  const std::string time = ", suite " + fmt("%.1f", dt) + " s";
  const auto iou_of = [&r](const std::string& name) { return r.fit_row(name).mean_iou; };

  const double a = iou_of("bd_bx_dicep"), b = iou_of("bd_bx_dice"), c = iou_of("bce_bx_dice"),
               d = iou_of("bx_dice");
  report(5, a - b >= 0.01 && b - c >= 0.01 && c - d >= 0.01 && dt < 60.0,
         "mean IoU bd_bx_dicep " + fmt("%.4f", a) + " > bd_bx_dice " + fmt("%.4f", b) + " > bce_bx_dice " +
             fmt("%.4f", c) + " > bx_dice " + fmt("%.4f", d) + time);

  const double fused = iou_of("bd_bx_dicep"), depth = iou_of("depth_only"), flow = iou_of("flow_only");
  report(6, fused >= std::max(depth, flow) - 0.01,
         "fused " + fmt("%.4f", fused) + " vs depth-only " + fmt("%.4f", depth) + ", flow-only " +
             fmt("%.4f", flow));

  const double clean = iou_of("bd_bx_dicep"), noisy = iou_of("noisy");
  report(7, clean >= noisy, "clean " + fmt("%.4f", clean) + " vs noisy " + fmt("%.4f", noisy));

  const EvalReport& cp = r.track_row("cp").total;
  const EvalReport& dp = r.track_row("dp").total;
  const EvalReport& sd = r.track_row("dp_sd").total;
  const bool trend = sd.id_switches <= dp.id_switches && dp.id_switches <= cp.id_switches &&
                     sd.motsa >= cp.motsa;

  // Perfect detections, no crossings.
  SceneConfig sc;
  sc.height = 96;
  sc.width = 96;
  sc.n_frames = 30;
  sc.score_noise = 0.0;
  sc.objects = {{Shape::kRect, 4, 6, 14, 12, 1.5, 0.5, 3.0, 0},
                {Shape::kRect, 70, 60, 12, 16, -1.0, -0.5, 6.0, 0},
                {Shape::kRect, 10, 70, 10, 10, 1.0, 0.0, 8.0, 1}};
  const std::vector<SceneFrame> frames = generate_scene(sc);
  std::vector<TrackingFrame> in;
  for (const SceneFrame& f : frames) in.push_back({f.frame_id, &f.depth, &f.flow, f.detections});
  const EvalReport clean_run = evaluate(run_tracker(in, TrackerConfig{}), gt_frames(frames));
  const bool exact = clean_run.id_switches == 0 && clean_run.motsa == 1.0;
  report(9, trend && exact && dt < 60.0,
         "IDS dp_sd " + std::to_string(sd.id_switches) + " <= dp " + std::to_string(dp.id_switches) +
             " <= cp " + std::to_string(cp.id_switches) + ", MOTSA dp_sd " + fmt("%.4f", sd.motsa) +
             " >= cp " + fmt("%.4f", cp.motsa) + "; no-crossing run IDS " +
             std::to_string(clean_run.id_switches) + " MOTSA " + fmt("%.6f", clean_run.motsa) + time);

  const TrendCheck* info = find_trend(r, "penalty_outside_box");
  if (info) {
    g_notes.push_back("note: " + info->name + (info->pass ? " pass" : " fail") +
                      " (informational): " + info->detail);
  }
}

void criterion_8() {
  const bool hand = bi_greedy_match({{1.0, 5.0}, {2.0, 9.0}}, 2) == std::vector<int>{0, kNewTrack};
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool injective = true;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t nt = rng() % 7, nd = rng() % 7;
    CostTable cost(nt, std::vector<std::optional<double>>(nd));
    for (auto& row : cost) {
      for (auto& c : row) {
        if (u(rng) < 0.75) c = u(rng);
      }
    }
    const std::vector<int> m = bi_greedy_match(cost, nd);
    std::set<int> used;
    injective = injective && m.size() == nd;
    for (std::size_t d = 0; d < m.size(); ++d) {
      if (m[d] == kNewTrack) continue;
      injective = injective && m[d] >= 0 && m[d] < static_cast<int>(nt) && cost[m[d]][d].has_value() &&
                  used.insert(m[d]).second;
    }
  }
  bool single = true;
  const TrackerConfig cfg;
  for (int rep = 0; rep < 200; ++rep) {
    single = single && bi_greedy_match({{u(rng) * cfg.gate_distance}}, 1) == std::vector<int>{0};
  }
  report(8, hand && injective && single,
         std::string("2x2 collision ") + (hand ? "ok" : "wrong") + ", 1000 random tables " +
             (injective ? "one-to-one" : "NOT one-to-one") + ", single gated pair " +
             (single ? "always matched" : "missed"));
}

void criterion_10() {
  const tracking_fixtures::OwnedSequence s = tracking_fixtures::occlusion_sequence();
  TrackerConfig two;
  two.max_age = 2;
  TrackerConfig one = two;
  one.tau_low = one.tau_high;
  const std::vector<FrameTracks> a = run_tracker(s.frames, two);
  const std::vector<FrameTracks> b = run_tracker(s.frames, one);
  std::set<int> ids_a, ids_b;
  bool all_frames = true;
  for (const FrameTracks& f : a) {
    all_frames = all_frames && f.tracks.size() == 1;
    for (const TrackOutput& o : f.tracks) ids_a.insert(o.track_id);
  }
  for (const FrameTracks& f : b) {
    for (const TrackOutput& o : f.tracks) ids_b.insert(o.track_id);
  }
  const bool survives = all_frames && ids_a.size() == 1;
  const bool lost = ids_b.size() > 1 && b[4].tracks.empty();
  report(10, survives && lost,
         "score 0.3 on frames 3-5, max_age 2: two thresholds -> " + std::to_string(ids_a.size()) +
             " id, single threshold -> " + std::to_string(ids_b.size()) + " ids");
}

void criterion_11() {
  const BinaryMask m = box_indicator({2, 3, 9, 11}, 16, 16);
  const std::vector<GtFrame> gt = {{0, 16, 16, {{1, m}}}, {1, 16, 16, {{1, m}}}};
  const EvalReport r = evaluate({{0, {{7, tight_box(m), m}}}, {1, {{9, tight_box(m), m}}}}, gt);
  const bool hand = r.motsa == 0.5 && r.smotsa == 0.5 && r.motsp == 1.0 && r.id_switches == 1;
  std::mt19937_64 rng(123);
  std::size_t agree = 0, total = 0;
  for (int rep = 0; rep < 3000; ++rep) {
    const metric_oracle::RandomFrame f = metric_oracle::random_frame(rng, 16);
    const std::vector<MaskMatch> g = match_masks(f.preds, f.gts);
    const metric_oracle::Optimum best = metric_oracle::exhaustive_optimum(f.preds, f.gts);
    double sum = 0.0;
    for (const MaskMatch& x : g) sum += x.iou;
    agree += g.size() == best.count && std::abs(sum - best.iou_sum) <= 1e-12;
    ++total;
  }
  report(11, hand && agree == total,
         "2-frame example MOTSA " + fmt("%.6f", r.motsa) + " sMOTSA " + fmt("%.6f", r.smotsa) +
             " MOTSP " + fmt("%.6f", r.motsp) + "; greedy = exhaustive on " + std::to_string(agree) +
             "/" + std::to_string(total) + " frames up to 4x4");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents for every regular file below root.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

void criterion_12() {
  const fs::path base = fs::temp_directory_path() / ("stcseg_acceptance_" + std::to_string(getpid()));
  fs::remove_all(base);
  fs::create_directories(base);
  bool ran = true;
  for (const char* name : {"a", "b"}) {
    const std::string cmd = std::string(STCSEG_BIN) + " suite --seed 42 --out '" + (base / name).string() +
                            "' > '" + (base / (std::string(name) + ".stdout")).string() + "'";
    const int status = std::system(cmd.c_str());
    ran = ran && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  }
  const auto a = snapshot(base / "a");
  const auto b = snapshot(base / "b");
  const bool same_stdout = read_file(base / "a.stdout") == read_file(base / "b.stdout");
  const bool same_files = !a.empty() && a == b;
  report(12, ran && same_stdout && same_files,
         std::string("two suite runs: exit ") + (ran ? "0/0" : "nonzero") + ", stdout " +
             (same_stdout ? "identical" : "differs") + ", " + std::to_string(a.size()) + " artifact files " +
             (same_files ? "identical" : "differ"));
  fs::remove_all(base);
}

}  // namespace

int main() {
  guarded({1}, criterion_1);
  guarded({2}, criterion_2);
  guarded({3}, criterion_3);
  guarded({4}, criterion_4);
  guarded({5, 6, 7, 9}, suite_criteria);
  guarded({8}, criterion_8);
  guarded({10}, criterion_10);
  guarded({11}, criterion_11);
  guarded({12}, criterion_12);
  for (const auto& [id, line] : g_lines) std::printf("%s\n", line.c_str());
  for (const std::string& n : g_notes) std::printf("%s\n", n.c_str());
  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL", g_failures);
  return g_failures == 0 ? 0 : 1;
}
