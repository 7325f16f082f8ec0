#include "stcseg/suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stcseg/grid_io.hpp"
#include "stcseg/manifest.hpp"
#include "stcseg/parallel.hpp"

namespace stcseg {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kFitSize = 96;
constexpr std::size_t kTrackSize = 128;
constexpr std::size_t kTrackFrames = 30;

// Independent seed per scene so adding scenes never shifts earlier ones.
std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t salt, std::size_t k) {
  SplitMix64 mix(seed ^ (salt * 0x100000001B3ULL) ^ (k * 0xD1B54A32D192ED03ULL));
  return mix.next();
}

double uniform_in(SplitMix64& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

double outside_fraction(const BinaryMask& m, const BBox& b) {
  const std::size_t total = m.count();
  if (total == 0) return 0.0;
  std::size_t out = 0;
  for (std::size_t i = 0; i < m.height(); ++i) {
    for (std::size_t j = 0; j < m.width(); ++j) {
      if (!m(i, j)) continue;
      const int ii = static_cast<int>(i), jj = static_cast<int>(j);
      if (ii < b.y1 || ii >= b.y2 || jj < b.x1 || jj >= b.x2) ++out;
    }
  }
  return static_cast<double>(out) / static_cast<double>(total);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct FitJob {
  std::string group;
  std::string name;
  LossVariant variant;
  SignalSource source;
  bool noisy;
};

std::vector<FitJob> fit_jobs() {
  std::vector<FitJob> jobs;
  for (LossVariant v : kAllLossVariants) {
    jobs.push_back({"loss", std::string(to_string(v)), v, SignalSource::kFused, false});
  }
  jobs.push_back({"signal", "depth_only", LossVariant::kBdBxDiceP, SignalSource::kDepthOnly, false});
  jobs.push_back({"signal", "flow_only", LossVariant::kBdBxDiceP, SignalSource::kFlowOnly, false});
  jobs.push_back({"noise", "noisy", LossVariant::kBdBxDiceP, SignalSource::kFused, true});
  return jobs;
}

void accumulate(EvalReport& acc, double& iou_sum, const EvalReport& r) {
  acc.tp += r.tp;
  acc.fp += r.fp;
  acc.fn += r.fn;
  acc.n_gt += r.n_gt;
  acc.id_switches += r.id_switches;
  iou_sum += r.motsp * static_cast<double>(r.tp);
}

void finalize(EvalReport& acc, double iou_sum) {
  if (acc.n_gt > 0) {
    const double n = static_cast<double>(acc.n_gt);
    acc.motsa = 1.0 - static_cast<double>(acc.fn + acc.fp + acc.id_switches) / n;
    acc.smotsa = (iou_sum - static_cast<double>(acc.fp + acc.id_switches)) / n;
    acc.mean_iou = iou_sum / n;
  }
  acc.motsp = acc.tp > 0 ? iou_sum / static_cast<double>(acc.tp) : 0.0;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::vector<FitScene> make_fitting_suite(std::uint64_t seed, std::size_t n, double noise_sigma) {
  std::vector<FitScene> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    SplitMix64 rng(scene_seed(seed, 1, k));
    ObjectSpec o;
    o.shape = (k % 2 == 0) ? Shape::kRect : Shape::kEllipse;
    o.w = std::round(uniform_in(rng, 36.0, 60.0));
    o.h = std::round(uniform_in(rng, 36.0, 60.0));
    o.x = std::round(uniform_in(rng, 2.0, kFitSize - 2.0 - o.w));
    o.y = std::round(uniform_in(rng, 2.0, kFitSize - 2.0 - o.h));
    o.depth = uniform_in(rng, 3.0, 7.0);
    const double angle = uniform_in(rng, 0.0, 2.0 * 3.14159265358979323846);
    const double speed = uniform_in(rng, 1.5, 3.0);
    o.vx = speed * std::cos(angle);
    o.vy = speed * std::sin(angle);

    SceneConfig sc;
    sc.height = sc.width = kFitSize;
    sc.n_frames = 1;
    sc.seed = rng.next();
    sc.objects = {o};
    const SceneFrame clean = generate_scene(sc).front();
    SceneConfig noisy_cfg = sc;
    noisy_cfg.noise_sigma = noise_sigma;
    const SceneFrame noisy = generate_scene(noisy_cfg).front();

    FitScene s;
    s.config = sc;
    s.depth = clean.depth;
    s.flow = clean.flow;
    s.noisy_depth = noisy.depth;
    s.noisy_flow = noisy.flow;
    s.box = clean.gt_instances.front().bbox;
    s.gt = clean.gt_instances.front().mask;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SceneConfig> make_tracking_suite(std::uint64_t seed, std::size_t n) {
  std::vector<SceneConfig> out;
  out.reserve(n);
  const double size = static_cast<double>(kTrackSize);
  for (std::size_t k = 0; k < n; ++k) {
    SplitMix64 rng(scene_seed(seed, 2, k));
    SceneConfig sc;
    sc.height = sc.width = kTrackSize;
    sc.n_frames = kTrackFrames;
    // Exact boxes: corner samples stay on the object, so identity cues come
    // from depth and flow while misses and occlusion supply the difficulty.
    sc.jitter = 0;
    sc.miss_prob = 0.15;

    // Two rectangles with opposite horizontal velocities meet mid-sequence at
    // distinct depths. Every other pair has equal sizes.
    ObjectSpec a, b;
    a.w = std::round(uniform_in(rng, 14.0, 24.0));
    a.h = std::round(uniform_in(rng, 14.0, 24.0));
    if (k % 2 == 0) {
      b.w = a.w;
      b.h = a.h;
    } else {
      const double scale = uniform_in(rng, 0.55, 0.75);
      b.w = std::round(a.w * scale);
      b.h = std::round(a.h * scale);
    }
    const double cy = uniform_in(rng, 30.0, size - 30.0);
    a.y = std::round(cy - 0.5 * a.h + uniform_in(rng, -3.0, 3.0));
    b.y = std::round(cy - 0.5 * b.h + uniform_in(rng, -3.0, 3.0));
    const double v = uniform_in(rng, 0.5, 1.0);
    const double meet = uniform_in(rng, 0.35, 0.65) * static_cast<double>(kTrackFrames);
    const double xm = uniform_in(rng, 40.0, size - 40.0);
    a.x = std::clamp(std::round(xm - 0.5 * a.w - v * meet), 0.0, size - a.w);
    b.x = std::clamp(std::round(xm - 0.5 * b.w + v * meet), 0.0, size - b.w);
    a.vx = v;
    b.vx = -v;
    a.vy = uniform_in(rng, -0.3, 0.3);
    b.vy = uniform_in(rng, -0.3, 0.3);
    const bool a_front = rng.uniform() < 0.5;
    a.depth = a_front ? uniform_in(rng, 2.5, 4.0) : uniform_in(rng, 6.0, 8.0);
    b.depth = a_front ? uniform_in(rng, 6.0, 8.0) : uniform_in(rng, 2.5, 4.0);
    sc.objects = {a, b};
    sc.seed = rng.next();
    out.push_back(std::move(sc));
  }
  return out;
}

std::vector<TrackingVariant> tracking_variants() {
  TrackingVariant cp{"cp", {}};
  cp.config.alpha = {1.0, 0.0, 0.0};
  cp.config.location = LocationMode::kCenter;
  TrackingVariant dp{"dp", {}};
  dp.config.alpha = {1.0, 0.0, 0.0};
  TrackingVariant dpsd{"dp_sd", {}};
  return {cp, dp, dpsd};
}

bool SuiteReport::all_pass() const {
  for (const TrendCheck& t : trends) {
    if (t.gating && !t.pass) return false;
  }
  return true;
}

const FitRow& SuiteReport::fit_row(const std::string& name) const {
  for (const FitRow& r : fit_rows) {
    if (r.name == name) return r;
  }
  throw Error("suite report has no fitting row '" + name + "'");
}

const TrackRow& SuiteReport::track_row(const std::string& name) const {
  for (const TrackRow& r : track_rows) {
    if (r.name == name) return r;
  }
  throw Error("suite report has no tracking row '" + name + "'");
}

SuiteReport run_ablation_suite(const SuiteConfig& cfg,
                               const std::optional<fs::path>& artifacts) {
  cfg.fit.validate();
  if (cfg.fit_scenes < 1 || cfg.track_sequences < 1) {
    throw Error("suite: scene and sequence counts must be >= 1");
  }
  SuiteReport report;
  report.config = cfg;

  // Fitting suite.
  const std::vector<FitScene> scenes = make_fitting_suite(cfg.seed, cfg.fit_scenes, cfg.noise_sigma);
  const std::vector<FitJob> jobs = fit_jobs();
  const std::size_t n_fit = scenes.size() * jobs.size();
  std::vector<FitResult> fits(n_fit);
  parallel_for(n_fit, [&](std::size_t idx) {
    const FitJob& job = jobs[idx % jobs.size()];
    const FitScene& s = scenes[idx / jobs.size()];
    FitConfig fc = cfg.fit;
    fc.loss_variant = job.variant;
    fc.signal_source = job.source;
    try {
      fits[idx] = job.noisy ? fit_mask(s.noisy_depth, s.noisy_flow, s.box, fc, &s.gt)
                            : fit_mask(s.depth, s.flow, s.box, fc, &s.gt);
    } catch (const Error& e) {
      throw Error("suite: fitting variant " + job.name + " failed on scene " +
                  std::to_string(idx / jobs.size()) + ": " + e.what());
    }
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    FitRow row{jobs[j].group, jobs[j].name, 0.0, 0.0, {}, {}};
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const FitResult& f = fits[s * jobs.size() + j];
      row.per_scene_iou.push_back(*f.iou_vs_gt);
      row.per_scene_outside.push_back(outside_fraction(f.final_mask, scenes[s].box));
    }
    row.mean_iou = mean(row.per_scene_iou);
    row.mean_outside = mean(row.per_scene_outside);
    report.fit_rows.push_back(std::move(row));
  }

  // Tracking suite.
  const std::vector<SceneConfig> seqs = make_tracking_suite(cfg.seed, cfg.track_sequences);
  const std::vector<TrackingVariant> variants = tracking_variants();
  std::vector<std::vector<FrameTracks>> tracks(seqs.size() * variants.size());
  std::vector<EvalReport> evals(tracks.size());
  parallel_for(seqs.size(), [&](std::size_t s) {
    const std::vector<SceneFrame> frames = generate_scene(seqs[s]);
    std::vector<TrackingFrame> input;
    for (const SceneFrame& f : frames) {
      input.push_back(TrackingFrame{f.frame_id, &f.depth, &f.flow, f.detections});
    }
    const std::vector<GtFrame> gt = gt_frames(frames);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      try {
        tracks[s * variants.size() + v] = run_tracker(input, variants[v].config);
        evals[s * variants.size() + v] = evaluate(tracks[s * variants.size() + v], gt);
      } catch (const Error& e) {
        throw Error("suite: tracking variant " + variants[v].name + " failed on sequence " +
                    std::to_string(s) + ": " + e.what());
      }
    }
  });
  for (std::size_t v = 0; v < variants.size(); ++v) {
    TrackRow row{variants[v].name, {}};
    double iou_sum = 0.0;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      accumulate(row.total, iou_sum, evals[s * variants.size() + v]);
    }
    finalize(row.total, iou_sum);
    report.track_rows.push_back(std::move(row));
  }

  // Trend checks.
  const double dicep = report.fit_row("bd_bx_dicep").mean_iou;
  const double dice = report.fit_row("bd_bx_dice").mean_iou;
  const double bce = report.fit_row("bce_bx_dice").mean_iou;
  const double bx = report.fit_row("bx_dice").mean_iou;
  report.trends.push_back(
      {"loss_ordering", dicep - dice >= 0.01 && dice - bce >= 0.01 && bce - bx >= 0.01,
       "bd_bx_dicep " + fmt(dicep) + " > bd_bx_dice " + fmt(dice) + " > bce_bx_dice " +
           fmt(bce) + " > bx_dice " + fmt(bx) + ", margins >= 0.01"});

  const double depth_only = report.fit_row("depth_only").mean_iou;
  const double flow_only = report.fit_row("flow_only").mean_iou;
  report.trends.push_back({"fused_signal", dicep >= std::max(depth_only, flow_only) - 0.01,
                           "fused " + fmt(dicep) + " >= max(depth_only " + fmt(depth_only) +
                               ", flow_only " + fmt(flow_only) + ") - 0.01"});

  const double noisy = report.fit_row("noisy").mean_iou;
  report.trends.push_back({"clean_vs_noisy", dicep >= noisy,
                           "clean " + fmt(dicep) + " >= noisy " + fmt(noisy)});

  // Informational: at a uniform start every pixel ties for the projection
  // maxima, so the lowest-index subgradient can leave saturated first-row or
  // first-column pixels that no later step revisits.
  std::string violations;
  const std::pair<const char*, const char*> pairs[] = {
      {"bx_dicep", "bx_dice"}, {"bce_bx_dicep", "bce_bx_dice"}, {"bd_bx_dicep", "bd_bx_dice"}};
  for (const auto& [with, without] : pairs) {
    const FitRow& a = report.fit_row(with);
    const FitRow& b = report.fit_row(without);
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      if (a.per_scene_outside[s] > b.per_scene_outside[s]) {
        violations += std::string(violations.empty() ? "" : ",") + with + "@" + std::to_string(s);
      }
    }
  }
  report.trends.push_back({"penalty_outside_box", violations.empty(),
                           "outside-box fraction with the position penalty <= without, "
                           "per scene and per pixel term" +
                               (violations.empty() ? std::string() : "; violated at " + violations),
                           false});

  const EvalReport& cp = report.track_row("cp").total;
  const EvalReport& dp = report.track_row("dp").total;
  const EvalReport& sd = report.track_row("dp_sd").total;
  report.trends.push_back(
      {"tracking_ids", sd.id_switches <= dp.id_switches && dp.id_switches <= cp.id_switches,
       "IDS dp_sd " + std::to_string(sd.id_switches) + " <= dp " + std::to_string(dp.id_switches) +
           " <= cp " + std::to_string(cp.id_switches)});
  report.trends.push_back({"tracking_motsa", sd.motsa >= cp.motsa,
                           "MOTSA dp_sd " + fmt(sd.motsa) + " >= cp " + fmt(cp.motsa)});

  if (artifacts) {
    fs::create_directories(*artifacts / "fitting");
    fs::create_directories(*artifacts / "tracking");
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        char name[96];
        std::snprintf(name, sizeof(name), "scene%02zu_%s.grid", s, jobs[j].name.c_str());
        write_grid(*artifacts / "fitting" / name, fits[s * jobs.size() + j].final_mask);
      }
    }
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      for (std::size_t v = 0; v < variants.size(); ++v) {
        char name[96];
        std::snprintf(name, sizeof(name), "seq%02zu_%s.tracks.jsonl", s, variants[v].name.c_str());
        write_tracks(*artifacts / "tracking" / name, tracks[s * variants.size() + v]);
      }
    }
    write_text(*artifacts / "report.txt", format_suite_report(report));
    write_text(*artifacts / "report.kv", format_suite_report_machine(report));
  }
  return report;
}

std::string format_suite_report(const SuiteReport& r) {
  std::ostringstream out;
  char buf[256];
  out << "ablation suite  seed=" << r.config.seed << "  fit_scenes=" << r.config.fit_scenes
      << "  track_sequences=" << r.config.track_sequences << "\n\n";
  out << "fitting (mean over scenes)\n";
  std::snprintf(buf, sizeof(buf), "  %-8s %-14s %10s %14s\n", "group", "variant", "mean_iou",
                "outside_box");
  out << buf;
  for (const FitRow& row : r.fit_rows) {
    std::snprintf(buf, sizeof(buf), "  %-8s %-14s %10.6f %14.6f\n", row.group.c_str(),
                  row.name.c_str(), row.mean_iou, row.mean_outside);
    out << buf;
  }
  out << "\ntracking (totals over sequences)\n";
  std::snprintf(buf, sizeof(buf), "  %-8s %10s %10s %10s %6s %6s %6s %6s\n", "variant", "motsa",
                "smotsa", "motsp", "ids", "tp", "fp", "fn");
  out << buf;
  for (const TrackRow& row : r.track_rows) {
    const EvalReport& e = row.total;
    std::snprintf(buf, sizeof(buf), "  %-8s %10.6f %10.6f %10.6f %6zu %6zu %6zu %6zu\n",
                  row.name.c_str(), e.motsa, e.smotsa, e.motsp, e.id_switches, e.tp, e.fp, e.fn);
    out << buf;
  }
  out << "\ntrends\n";
  for (const TrendCheck& t : r.trends) {
    out << "  " << (t.pass ? "PASS" : "FAIL") << "  " << t.name << (t.gating ? "" : " (informational)")
        << ": " << t.detail << "\n";
  }
  out << "\noverall " << (r.all_pass() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

std::string format_suite_report_machine(const SuiteReport& r) {
  std::ostringstream out;
  out << "seed=" << r.config.seed << "\n";
  for (const FitRow& row : r.fit_rows) {
    out << "fit." << row.name << ".mean_iou=" << fmt(row.mean_iou) << "\n";
    out << "fit." << row.name << ".outside_box=" << fmt(row.mean_outside) << "\n";
  }
  for (const TrackRow& row : r.track_rows) {
    const EvalReport& e = row.total;
    out << "track." << row.name << ".motsa=" << fmt(e.motsa) << "\n";
    out << "track." << row.name << ".smotsa=" << fmt(e.smotsa) << "\n";
    out << "track." << row.name << ".motsp=" << fmt(e.motsp) << "\n";
    out << "track." << row.name << ".id_switches=" << e.id_switches << "\n";
  }
  for (const TrendCheck& t : r.trends) {
    out << (t.gating ? "trend." : "info.") << t.name << "=" << (t.pass ? "pass" : "fail") << "\n";
  }
  out << "overall=" << (r.all_pass() ? "pass" : "fail") << "\n";
  return out.str();
}

}  // namespace stcseg
