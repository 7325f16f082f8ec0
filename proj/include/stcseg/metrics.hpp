#pragma once

#include <string>
#include <vector>

#include "stcseg/grid.hpp"
#include "stcseg/manifest.hpp"
#include "stcseg/tracker.hpp"

namespace stcseg {

struct GtObject {
  int id = 0;
  BinaryMask mask;
};

struct GtFrame {
  int frame_id = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<GtObject> objects;
};

struct EvalReport {
  double motsa = 0.0;
  double smotsa = 0.0;
  double motsp = 0.0;  // mean IoU over true positives, 0 without any
  std::size_t id_switches = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t n_gt = 0;
  double mean_iou = 0.0;  // mean over all GT instances, 0 for misses
};

struct MaskMatch {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

// One-to-one matching by descending IoU among pairs with IoU > 0.5. Ties
// are broken by (pred, gt) index.
std::vector<MaskMatch> match_masks(const std::vector<BinaryMask>& preds,
                                   const std::vector<BinaryMask>& gts);

// Tracks and ground truth must cover the same frame ids. A track without a
// mask is scored with its rasterised box.
EvalReport evaluate(const std::vector<FrameTracks>& tracks, const std::vector<GtFrame>& gt);

std::vector<GtFrame> gt_frames(const std::vector<SceneFrame>& frames);
std::vector<GtFrame> gt_frames(const Manifest& m);

// Human-readable table, or key=value lines with 6 decimals.
std::string format_report(const EvalReport& r, bool machine);

}  // namespace stcseg
