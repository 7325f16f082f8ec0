#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "stcseg/gradcheck.hpp"
#include "stcseg/grid_io.hpp"
#include "stcseg/manifest.hpp"
#include "stcseg/mask_fitter.hpp"
#include "stcseg/metrics.hpp"
#include "stcseg/parallel.hpp"
#include "stcseg/scene_sim.hpp"
#include "stcseg/signal_gen.hpp"
#include "stcseg/suite.hpp"
#include "stcseg/tracker.hpp"

namespace fs = std::filesystem;
using namespace stcseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssert = 1;
constexpr int kExitInput = 2;

bool g_verbose = false;

void log(const std::string& msg) {
  if (g_verbose) std::cerr << "stcseg: " << msg << "\n";
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::array<double, 3> parse_alpha(const std::string& s) {
  std::array<double, 3> a{};
  std::stringstream in(s);
  std::string part;
  std::size_t n = 0;
  while (std::getline(in, part, ',')) {
    if (n == 3) throw Error("--alpha expects three comma-separated numbers");
    std::size_t used = 0;
    try {
      a[n] = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) throw Error("--alpha: bad number '" + part + "'");
    ++n;
  }
  if (n != 3) throw Error("--alpha expects three comma-separated numbers");
  return a;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  std::size_t h = 0;
  std::size_t w = 0;
  try {
    if (x == std::string::npos) throw Error("");
    std::size_t used_h = 0;
    std::size_t used_w = 0;
    h = std::stoul(s.substr(0, x), &used_h);
    w = std::stoul(s.substr(x + 1), &used_w);
    if (used_h != x || used_w != s.size() - x - 1) throw Error("");
  } catch (const std::exception&) {
    throw Error("--size expects <h>x<w>, got '" + s + "'");
  }
  if (h < 1 || w < 1) throw Error("--size dimensions must be >= 1");
  return {h, w};
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// gen-scene ----------------------------------------------------------------

struct GenSceneArgs {
  std::string config;
  std::string out;
};

int run_gen_scene(const GenSceneArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw Error("cannot open config '" + a.config + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config '" + a.config + "': " + e.what());
  }
  const SceneConfig cfg = scene_config_from_json(j);
  log("generating " + std::to_string(cfg.n_frames) + " frames");
  const std::vector<SceneFrame> frames = generate_scene(cfg);
  write_scene(frames, cfg, a.out);
  std::cout << "wrote " << (fs::path(a.out) / "scene.json").string() << " (" << frames.size()
            << " frames)\n";
  return kExitOk;
}

// pseudo-label -------------------------------------------------------------

struct PseudoLabelArgs {
  std::string depth;
  std::string flow;
  std::string out;
  SignalConfig signal;
  std::string source = "fused";
};

int run_pseudo_label(PseudoLabelArgs a) {
  a.signal.pool_stride = a.signal.pool_kernel;
  a.signal.validate();
  SignalSource source = SignalSource::kFused;
  if (a.source == "depth") {
    source = SignalSource::kDepthOnly;
  } else if (a.source == "flow") {
    source = SignalSource::kFlowOnly;
  } else if (a.source != "fused") {
    throw Error("--source must be fused, depth or flow");
  }
  const ScalarGrid depth = read_scalar_grid(a.depth);
  const VectorGrid flow = read_grid(a.flow);
  const BinaryMask m = generate_pseudo_label(depth, flow, a.signal, source);
  ensure_parent(a.out);
  write_grid(fs::path(a.out), m);
  std::cout << "positives=" << m.count() << "\n";
  return kExitOk;
}

// fit-mask -----------------------------------------------------------------

struct FitMaskArgs {
  std::string manifest;
  int frame = 0;
  int instance = 1;
  std::string variant = "bd_bx_dicep";
  FitConfig fit;
  std::string out;
  std::string curve;
};

int run_fit_mask(FitMaskArgs a) {
  a.fit.loss_variant = parse_loss_variant(a.variant);
  a.fit.validate();
  const Manifest m = read_manifest(a.manifest);
  std::optional<std::size_t> k;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    if (m.frames[i].frame_id == a.frame) k = i;
  }
  if (!k) throw Error("manifest has no frame " + std::to_string(a.frame));
  const SceneFrame f = load_frame(m, *k);
  const GtInstance* gt = nullptr;
  for (const GtInstance& g : f.gt_instances) {
    if (g.instance_id == a.instance) gt = &g;
  }
  if (!gt) {
    throw Error("frame " + std::to_string(a.frame) + " has no instance " +
                std::to_string(a.instance));
  }
  log("fitting " + a.variant + " for " + std::to_string(a.fit.steps) + " steps");
  const FitResult r = fit_mask(f.depth, f.flow, gt->bbox, a.fit, &gt->mask);
  ensure_parent(a.out);
  write_grid(fs::path(a.out), r.final_mask);
  if (!a.curve.empty()) {
    std::ostringstream c;
    for (double v : r.loss_curve) c << fmt6(v) << "\n";
    ensure_parent(a.curve);
    std::ofstream(a.curve) << c.str();
  }
  const BBox& b = gt->bbox;
  std::cout << "frame=" << a.frame << "\n"
            << "instance=" << a.instance << "\n"
            << "variant=" << a.variant << "\n"
            << "steps=" << a.fit.steps << "\n"
            << "bbox=" << b.x1 << "," << b.y1 << "," << b.x2 << "," << b.y2 << "\n"
            << "pseudo_label_pixels=" << r.pseudo_label.count() << "\n"
            << "mask_pixels=" << r.final_mask.count() << "\n"
            << "initial_loss=" << fmt6(r.loss_curve.front()) << "\n"
            << "final_loss=" << fmt6(r.loss_curve.back()) << "\n"
            << "iou_vs_gt=" << fmt6(*r.iou_vs_gt) << "\n"
            << "mask=" << a.out << "\n";
  return kExitOk;
}

// track --------------------------------------------------------------------

struct TrackArgs {
  std::string manifest;
  std::string out;
  std::string alpha = "0.7,0.2,0.1";
  std::string matching = "bigreedy";
  std::string motion = "kalman";
  std::string location = "diagonal";
  TrackerConfig tracker;
  bool fit_masks = false;
  std::size_t fit_steps = 500;
};

int run_track(TrackArgs a) {
  a.tracker.alpha = parse_alpha(a.alpha);
  a.tracker.matching = parse_matching_mode(a.matching);
  a.tracker.motion = parse_motion_model(a.motion);
  a.tracker.location = parse_location_mode(a.location);
  a.tracker.validate();
  const Manifest m = read_manifest(a.manifest);
  std::vector<SceneFrame> frames;
  for (std::size_t k = 0; k < m.frames.size(); ++k) frames.push_back(load_frame(m, k));

  if (a.fit_masks) {
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t k = 0; k < frames.size(); ++k) {
      for (std::size_t d = 0; d < frames[k].detections.size(); ++d) jobs.emplace_back(k, d);
    }
    log("fitting " + std::to_string(jobs.size()) + " detection masks");
    FitConfig fc;
    fc.steps = a.fit_steps;
    parallel_for(jobs.size(), [&](std::size_t i) {
      SceneFrame& f = frames[jobs[i].first];
      Detection& det = f.detections[jobs[i].second];
      const BBox box = clamp_box(det.bbox, f.depth.height(), f.depth.width());
      if (!box.valid()) return;
      det.mask = fit_mask(f.depth, f.flow, box, fc).final_mask;
    });
  }

  std::vector<TrackingFrame> input;
  for (const SceneFrame& f : frames) {
    input.push_back(TrackingFrame{f.frame_id, &f.depth, &f.flow, f.detections});
  }
  const std::vector<FrameTracks> tracks = run_tracker(input, a.tracker);
  ensure_parent(a.out);
  write_tracks(a.out, tracks);
  std::size_t n = 0;
  for (const FrameTracks& f : tracks) n += f.tracks.size();
  std::cout << "wrote " << a.out << " (" << tracks.size() << " frames, " << n
            << " track outputs)\n";
  return kExitOk;
}

// eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string tracks;
  std::string gt;
  std::string format = "text";
};

int run_eval(const EvalArgs& a) {
  if (a.format != "text" && a.format != "machine") {
    throw Error("--format must be text or machine");
  }
  const std::vector<FrameTracks> tracks = read_tracks(a.tracks);
  const Manifest m = read_manifest(a.gt);
  const EvalReport r = evaluate(tracks, gt_frames(m));
  std::cout << format_report(r, a.format == "machine");
  return kExitOk;
}

// gradcheck ----------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string size = "16x16";
  double step = 1e-4;
  double tolerance = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
  const auto [h, w] = parse_size(a.size);
  if (!(a.step > 0.0)) throw Error("--step must be > 0");
  const GradcheckResult r = gradcheck(random_gradcheck_instance(a.seed, h, w), a.step);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max_rel_error=%.3e\n", r.max_rel_error);
  std::cout << buf << "entries=" << r.entries << "\n";
  if (r.max_rel_error > a.tolerance) {
    std::cerr << "stcseg: gradient check failed (tolerance " << a.tolerance << ")\n";
    return kExitAssert;
  }
  return kExitOk;
}

// suite --------------------------------------------------------------------

struct SuiteArgs {
  SuiteConfig suite;
  std::string out;
  std::string format = "text";
};

int run_suite(const SuiteArgs& a) {
  if (a.format != "text" && a.format != "machine") {
    throw Error("--format must be text or machine");
  }
  std::optional<fs::path> artifacts;
  if (!a.out.empty()) artifacts = fs::path(a.out);
  log("running ablation suite with " + std::to_string(thread_count()) + " threads");
  const SuiteReport r = run_ablation_suite(a.suite, artifacts);
  std::cout << (a.format == "machine" ? format_suite_report_machine(r) : format_suite_report(r));
  return r.all_pass() ? kExitOk : kExitAssert;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "stcseg: spatio-temporal pseudo-labels, puzzle-loss mask fitting and diagonal-point "
      "tracking on synthetic scenes.\nSTCSEG_THREADS caps worker threads.\nExit codes: 0 "
      "success, 1 check failed, 2 input error."};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", g_verbose, "Log progress to stderr");

  GenSceneArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-scene", "Generate a synthetic scene and its manifest");
  gen_cmd->add_option("--config", gen.config, "Scene config JSON")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  PseudoLabelArgs pl;
  auto* pl_cmd = app.add_subcommand("pseudo-label", "Pseudo-label from depth and flow grids");
  pl_cmd->add_option("--depth", pl.depth, "Depth grid (1 channel)")->required();
  pl_cmd->add_option("--flow", pl.flow, "Flow grid (2 channels)")->required();
  pl_cmd->add_option("--out", pl.out, "Output mask grid")->required();
  pl_cmd->add_option("--r", pl.signal.r, "Similarity factor");
  pl_cmd->add_option("--p", pl.signal.p_norm, "Norm order for flow differences");
  pl_cmd->add_option("--dilation", pl.signal.dilation, "Neighbourhood dilation");
  pl_cmd->add_option("--pool", pl.signal.pool_kernel, "Pooling kernel and stride");
  pl_cmd->add_option("--phi-s", pl.signal.phi_s, "Spatial (depth) threshold");
  pl_cmd->add_option("--phi-t", pl.signal.phi_t, "Temporal (flow) threshold");
  pl_cmd->add_option("--source", pl.source, "fused, depth or flow");

  FitMaskArgs fm;
  auto* fm_cmd = app.add_subcommand("fit-mask", "Fit one instance mask under a loss variant");
  fm_cmd->add_option("--manifest", fm.manifest, "Scene manifest")->required();
  fm_cmd->add_option("--frame", fm.frame, "Frame id");
  fm_cmd->add_option("--instance", fm.instance, "Ground-truth instance id (box source)");
  fm_cmd->add_option("--variant", fm.variant,
                     "bx_dice, bx_dicep, bce_bx_dice, bce_bx_dicep, bd_bx_dice or bd_bx_dicep");
  fm_cmd->add_option("--steps", fm.fit.steps, "Gradient steps");
  fm_cmd->add_option("--lr", fm.fit.learning_rate, "Learning rate");
  fm_cmd->add_option("--momentum", fm.fit.momentum, "Momentum");
  fm_cmd->add_option("--init-logit", fm.fit.init_logit, "Initial logit");
  fm_cmd->add_option("--coarse-sigma", fm.fit.coarse_sigma,
                     "Blur of the coarse logit field, 0 disables it");
  fm_cmd->add_option("--out", fm.out, "Output mask grid")->required();
  fm_cmd->add_option("--curve", fm.curve, "Optional loss-curve file, one value per line");

  TrackArgs tr;
  auto* tr_cmd = app.add_subcommand("track", "Track detections through a scene");
  tr_cmd->add_option("--manifest", tr.manifest, "Scene manifest")->required();
  tr_cmd->add_option("--out", tr.out, "Output tracks file (JSON lines)")->required();
  tr_cmd->add_option("--alpha", tr.alpha, "Location, depth and flow weights");
  tr_cmd->add_option("--matching", tr.matching, "bigreedy or greedy");
  tr_cmd->add_option("--motion", tr.motion, "kalman or delta");
  tr_cmd->add_option("--location", tr.location, "diagonal or center");
  tr_cmd->add_option("--tau-high", tr.tracker.tau_high, "First-round score threshold");
  tr_cmd->add_option("--tau-low", tr.tracker.tau_low, "Second-round score threshold");
  tr_cmd->add_option("--max-age", tr.tracker.max_age, "Frames a track survives unmatched");
  tr_cmd->add_option("--min-hits", tr.tracker.min_hits, "Matches needed for confirmation");
  tr_cmd->add_option("--gate", tr.tracker.gate_distance, "Largest admissible match cost");
  tr_cmd->add_flag("--fit-masks", tr.fit_masks,
                     "Fit a bd_bx_dicep mask per detection (otherwise tracks carry boxes only)");
  tr_cmd->add_option("--fit-steps", tr.fit_steps, "Gradient steps per fitted mask");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score a tracks file against scene ground truth");
  ev_cmd->add_option("--tracks", ev.tracks, "Tracks file")->required();
  ev_cmd->add_option("--gt", ev.gt, "Scene manifest")->required();
  ev_cmd->add_option("--format", ev.format, "text or machine");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare the analytic gradient with central differences");
  gc_cmd->add_option("--seed", gc.seed, "Instance seed");
  gc_cmd->add_option("--size", gc.size, "Grid size <h>x<w>");
  gc_cmd->add_option("--step", gc.step, "Finite-difference step");
  gc_cmd->add_option("--tolerance", gc.tolerance, "Largest accepted relative error");

  SuiteArgs su;
  auto* su_cmd = app.add_subcommand("suite", "Run the ablation suite and its trend checks");
  su_cmd->add_option("--seed", su.suite.seed, "Suite seed");
  su_cmd->add_option("--out", su.out, "Artifact directory (report, masks, tracks); none if empty");
  su_cmd->add_option("--fit-scenes", su.suite.fit_scenes, "Scenes in the fitting suite");
  su_cmd->add_option("--track-sequences", su.suite.track_sequences,
                     "Sequences in the tracking suite");
  su_cmd->add_option("--noise-sigma", su.suite.noise_sigma, "Signal noise of the noisy variant");
  su_cmd->add_option("--format", su.format, "text or machine");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*gen_cmd) return run_gen_scene(gen);
    if (*pl_cmd) return run_pseudo_label(pl);
    if (*fm_cmd) return run_fit_mask(fm);
    if (*tr_cmd) return run_track(tr);
    if (*ev_cmd) return run_eval(ev);
    if (*gc_cmd) return run_gradcheck(gc);
    if (*su_cmd) return run_suite(su);
  } catch (const std::exception& e) {
    std::cerr << "stcseg: error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
