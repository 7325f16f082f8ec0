#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stcseg/mask_fitter.hpp"
#include "stcseg/metrics.hpp"
#include "stcseg/scene_sim.hpp"
#include "stcseg/tracker.hpp"

namespace stcseg {

struct SuiteConfig {
  std::uint64_t seed = 42;
  std::size_t fit_scenes = 10;
  std::size_t track_sequences = 50;
  double noise_sigma = 0.5;  // noisy-signal variant of the fitting suite
  FitConfig fit;
};

// One fitting scene: a single object on a 96x96 frame, clean and noisy signals.
struct FitScene {
  SceneConfig config;
  ScalarGrid depth;
  VectorGrid flow;
  ScalarGrid noisy_depth;
  VectorGrid noisy_flow;
  BBox box;
  BinaryMask gt;
};

std::vector<FitScene> make_fitting_suite(std::uint64_t seed, std::size_t n, double noise_sigma);

// Crossing and occlusion sequences on 128x128 frames.
std::vector<SceneConfig> make_tracking_suite(std::uint64_t seed, std::size_t n);

struct TrackingVariant {
  std::string name;
  TrackerConfig config;
};

// Centre-point baseline, diagonal points, diagonal points with the
// spatio-temporal terms.
std::vector<TrackingVariant> tracking_variants();

struct FitRow {
  std::string group;  // "loss", "signal" or "noise"
  std::string name;
  double mean_iou = 0.0;
  double mean_outside = 0.0;  // fraction of predicted pixels outside the box
  std::vector<double> per_scene_iou;
  std::vector<double> per_scene_outside;
};

struct TrackRow {
  std::string name;
  EvalReport total;
};

struct TrendCheck {
  std::string name;
  bool pass = false;
  std::string detail;
  bool gating = true;  // informational checks do not affect all_pass()
};

struct SuiteReport {
  SuiteConfig config;
  std::vector<FitRow> fit_rows;
  std::vector<TrackRow> track_rows;
  std::vector<TrendCheck> trends;

  bool all_pass() const;
  const FitRow& fit_row(const std::string& name) const;
  const TrackRow& track_row(const std::string& name) const;
};

// Runs every fitting and tracking variant and evaluates the trend checks.
// Output is independent of the worker count. When `artifacts` is set, final
// masks and tracks files are written below it.
SuiteReport run_ablation_suite(const SuiteConfig& cfg,
                               const std::optional<std::filesystem::path>& artifacts = {});

std::string format_suite_report(const SuiteReport& r);          // text tables
std::string format_suite_report_machine(const SuiteReport& r);  // key=value lines

}  // namespace stcseg
