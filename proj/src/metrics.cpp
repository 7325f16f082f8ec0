#include "stcseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "stcseg/grid_io.hpp"
#include "stcseg/mask_fitter.hpp"

namespace stcseg {

std::vector<MaskMatch> match_masks(const std::vector<BinaryMask>& preds,
                                   const std::vector<BinaryMask>& gts) {
  std::vector<MaskMatch> cand;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(preds[p], gts[g]);
      if (v > 0.5) cand.push_back({p, g, v});
    }
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const MaskMatch& a, const MaskMatch& b) { return a.iou > b.iou; });
  std::vector<bool> p_used(preds.size(), false), g_used(gts.size(), false);
  std::vector<MaskMatch> out;
  for (const MaskMatch& m : cand) {
    if (p_used[m.pred] || g_used[m.gt]) continue;
    p_used[m.pred] = g_used[m.gt] = true;
    out.push_back(m);
  }
  return out;
}

EvalReport evaluate(const std::vector<FrameTracks>& tracks, const std::vector<GtFrame>& gt) {
  if (tracks.size() != gt.size()) {
    throw Error("evaluate: tracks cover " + std::to_string(tracks.size()) +
                " frames but ground truth covers " + std::to_string(gt.size()));
  }
  EvalReport r;
  double iou_sum = 0.0;
  std::map<int, int> last_track;  // GT id -> track id of its previous match
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const GtFrame& g = gt[k];
    const FrameTracks& t = tracks[k];
    if (t.frame_id != g.frame_id) {
      throw Error("evaluate: frame mismatch (tracks frame " + std::to_string(t.frame_id) +
                  ", ground-truth frame " + std::to_string(g.frame_id) + ")");
    }
    std::vector<BinaryMask> preds;
    for (const TrackOutput& o : t.tracks) {
      if (o.mask) {
        if (o.mask->height() != g.height || o.mask->width() != g.width) {
          throw Error("evaluate: frame " + std::to_string(g.frame_id) +
                      ": track mask dimensions differ from the frame");
        }
        preds.push_back(*o.mask);
      } else {
        const BBox c = clamp_box(o.bbox, g.height, g.width);
        preds.push_back(c.valid() ? box_indicator(c, g.height, g.width)
                                  : BinaryMask(g.height, g.width));
      }
    }
    std::vector<BinaryMask> gts;
    for (const GtObject& o : g.objects) gts.push_back(o.mask);

    const auto matches = match_masks(preds, gts);
    r.n_gt += gts.size();
    r.tp += matches.size();
    r.fp += preds.size() - matches.size();
    r.fn += gts.size() - matches.size();
    for (const MaskMatch& m : matches) {
      iou_sum += m.iou;
      const int gid = g.objects[m.gt].id;
      const int tid = t.tracks[m.pred].track_id;
      const auto it = last_track.find(gid);
      if (it != last_track.end() && it->second != tid) ++r.id_switches;
      last_track[gid] = tid;
    }
  }
  if (r.n_gt > 0) {
    const double n = static_cast<double>(r.n_gt);
    r.motsa = 1.0 - static_cast<double>(r.fn + r.fp + r.id_switches) / n;
    r.smotsa = (iou_sum - static_cast<double>(r.fp + r.id_switches)) / n;
    r.mean_iou = iou_sum / n;
  }
  if (r.tp > 0) r.motsp = iou_sum / static_cast<double>(r.tp);
  return r;
}

std::vector<GtFrame> gt_frames(const std::vector<SceneFrame>& frames) {
  std::vector<GtFrame> out;
  out.reserve(frames.size());
  for (const SceneFrame& f : frames) {
    GtFrame g{f.frame_id, f.depth.height(), f.depth.width(), {}};
    for (const GtInstance& i : f.gt_instances) g.objects.push_back({i.instance_id, i.mask});
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GtFrame> gt_frames(const Manifest& m) {
  std::vector<GtFrame> out;
  out.reserve(m.frames.size());
  for (const ManifestFrame& f : m.frames) {
    const VectorGrid depth = read_grid(m.base_dir / f.depth_path);
    GtFrame g{f.frame_id, depth.height(), depth.width(), {}};
    for (const ManifestGt& i : f.gt) {
      BinaryMask mask = read_mask(m.base_dir / i.mask_path);
      if (mask.height() != g.height || mask.width() != g.width) {
        throw Error("frame " + std::to_string(f.frame_id) + ": GT mask " +
                    std::to_string(i.id) + " has the wrong dimensions");
      }
      g.objects.push_back({i.id, std::move(mask)});
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::string format_report(const EvalReport& r, bool machine) {
  char buf[512];
  if (machine) {
    std::snprintf(buf, sizeof(buf),
                  "motsa=%.6f\nsmotsa=%.6f\nmotsp=%.6f\nid_switches=%zu\ntp=%zu\nfp=%zu\n"
                  "fn=%zu\nn_gt=%zu\nmean_iou=%.6f\n",
                  r.motsa, r.smotsa, r.motsp, r.id_switches, r.tp, r.fp, r.fn, r.n_gt,
                  r.mean_iou);
  } else {
    std::snprintf(buf, sizeof(buf),
                  "metric       value\n"
                  "MOTSA        %.6f\n"
                  "sMOTSA       %.6f\n"
                  "MOTSP        %.6f\n"
                  "ID switches  %zu\n"
                  "TP / FP / FN %zu / %zu / %zu\n"
                  "GT instances %zu\n"
                  "mean IoU     %.6f\n",
                  r.motsa, r.smotsa, r.motsp, r.id_switches, r.tp, r.fp, r.fn, r.n_gt,
                  r.mean_iou);
  }
  return buf;
}

}  // namespace stcseg
