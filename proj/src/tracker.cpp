#include "stcseg/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace stcseg {

namespace {

std::size_t clamp_index(int v, std::size_t n) {
  return static_cast<std::size_t>(std::clamp(v, 0, static_cast<int>(n) - 1));
}

Eigen::Vector2d center_of(const Corners& c) {
  return Eigen::Vector2d(0.5 * (c[0] + c[2]), 0.5 * (c[1] + c[3]));
}

template <std::size_t N>
double l2(const std::array<double, N>& a, const std::array<double, N>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < N; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace

std::string_view to_string(MatchingMode m) {
  return m == MatchingMode::kBiGreedy ? "bigreedy" : "greedy";
}
std::string_view to_string(MotionModel m) { return m == MotionModel::kKalman ? "kalman" : "delta"; }
std::string_view to_string(LocationMode m) {
  return m == LocationMode::kDiagonal ? "diagonal" : "center";
}

MatchingMode parse_matching_mode(std::string_view s) {
  if (s == "bigreedy") return MatchingMode::kBiGreedy;
  if (s == "greedy") return MatchingMode::kGreedy;
  throw Error("unknown matching mode '" + std::string(s) + "'");
}

MotionModel parse_motion_model(std::string_view s) {
  if (s == "kalman") return MotionModel::kKalman;
  if (s == "delta") return MotionModel::kDelta;
  throw Error("unknown motion model '" + std::string(s) + "'");
}

LocationMode parse_location_mode(std::string_view s) {
  if (s == "diagonal") return LocationMode::kDiagonal;
  if (s == "center") return LocationMode::kCenter;
  throw Error("unknown location mode '" + std::string(s) + "'");
}

void TrackerConfig::validate() const {
  for (double a : alpha) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw Error("tracker config: alphas must be >= 0");
  }
  if (!(tau_low >= 0.0 && tau_low <= tau_high && tau_high <= 1.0)) {
    throw Error("tracker config: need 0 <= tau_low <= tau_high <= 1");
  }
  if (min_hits < 1) throw Error("tracker config: min_hits must be >= 1");
  if (!(gate_distance > 0.0)) throw Error("tracker config: gate_distance must be > 0");
  if (!(noise.process >= 0.0) || !(noise.measurement > 0.0)) {
    throw Error("tracker config: noise scales must be positive");
  }
}

Signature sample_signature(const BBox& b, const ScalarGrid& depth, const VectorGrid& flow) {
  if (depth.height() != flow.height() || depth.width() != flow.width() || flow.channels() != 2) {
    throw Error("signature: depth and flow frames are inconsistent");
  }
  const std::size_t h = depth.height();
  const std::size_t w = depth.width();
  const std::size_t i1 = clamp_index(b.y1, h), j1 = clamp_index(b.x1, w);
  const std::size_t i2 = clamp_index(b.y2 - 1, h), j2 = clamp_index(b.x2 - 1, w);
  Signature s;
  s.depth = {depth(i1, j1), depth(i2, j2)};
  s.flow = {flow(i1, j1, 0), flow(i1, j1, 1), flow(i2, j2, 0), flow(i2, j2, 1)};
  return s;
}

FrameScales frame_scales(const ScalarGrid& depth, const VectorGrid& flow) {
  FrameScales s;
  s.diagonal = std::hypot(static_cast<double>(depth.width()), static_cast<double>(depth.height()));
  const auto dv = depth.values();
  const auto [lo, hi] = std::minmax_element(dv.begin(), dv.end());
  s.depth_range = (lo == dv.end() || *hi - *lo <= 0.0) ? 1.0 : *hi - *lo;
  double max_mag = 0.0;
  for (std::size_t i = 0; i < flow.height(); ++i) {
    for (std::size_t j = 0; j < flow.width(); ++j) {
      max_mag = std::max(max_mag, std::hypot(flow(i, j, 0), flow(i, j, 1)));
    }
  }
  s.flow_scale = max_mag + 1.0;
  return s;
}

CostTerms match_cost(const Corners& predicted, const Signature& track_sig, const BBox& det,
                     const Signature& det_sig, const FrameScales& scales,
                     const TrackerConfig& cfg) {
  const Corners z = to_corners(det);
  CostTerms c;
  if (cfg.location == LocationMode::kDiagonal) {
    c.loc = (predicted - z).norm() / scales.diagonal;
  } else {
    c.loc = (center_of(predicted) - center_of(z)).norm() / scales.diagonal;
  }
  c.depth = l2(track_sig.depth, det_sig.depth) / scales.depth_range;
  c.flow = l2(track_sig.flow, det_sig.flow) / scales.flow_scale;
  c.total = cfg.alpha[0] * c.loc + cfg.alpha[1] * c.depth + cfg.alpha[2] * c.flow;
  return c;
}

std::vector<int> bi_greedy_match(const CostTable& cost, std::size_t n_dets) {
  const std::size_t n_tracks = cost.size();
  // Pass 1: every track marks its nearest allowed detection.
  std::vector<int> marked(n_tracks, -1);
  for (std::size_t t = 0; t < n_tracks; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < n_dets; ++d) {
      if (cost[t][d] && *cost[t][d] < best) {
        best = *cost[t][d];
        marked[t] = static_cast<int>(d);
      }
    }
  }
  // Pass 2: every marked detection picks its cheapest marking track.
  std::vector<int> out(n_dets, kNewTrack);
  std::vector<double> best(n_dets, std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < n_tracks; ++t) {
    if (marked[t] < 0) continue;
    const auto d = static_cast<std::size_t>(marked[t]);
    if (*cost[t][d] < best[d]) {
      best[d] = *cost[t][d];
      out[d] = static_cast<int>(t);
    }
  }
  return out;
}

std::vector<int> greedy_match(const CostTable& cost, std::size_t n_dets) {
  std::vector<int> out(n_dets, kNewTrack);
  for (std::size_t t = 0; t < cost.size(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    int pick = -1;
    for (std::size_t d = 0; d < n_dets; ++d) {
      if (out[d] == kNewTrack && cost[t][d] && *cost[t][d] < best) {
        best = *cost[t][d];
        pick = static_cast<int>(d);
      }
    }
    if (pick >= 0) out[pick] = static_cast<int>(t);
  }
  return out;
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Corners Tracker::predict_one(TrackState& t, int gap) {
  for (int k = 0; k < gap; ++k) t.kalman.predict();
  t.age += gap;
  t.time_since_update += gap;
  if (cfg_.motion == MotionModel::kKalman) {
    t.prediction = t.kalman.position();
  } else {
    t.prediction = to_corners(t.location) + t.velocity * static_cast<double>(t.time_since_update);
  }
  return t.prediction;
}

void Tracker::update_one(TrackState& t, const Detection& d, const Signature& sig, int frame_id) {
  const Corners z = to_corners(d.bbox);
  const int gap = frame_id - t.last_frame;
  t.velocity = (z - to_corners(t.location)) / static_cast<double>(gap);
  t.kalman.update(z);
  t.location = d.bbox;
  t.mask = d.mask;
  t.signature = sig;
  t.last_frame = frame_id;
  t.hits += 1;
  t.time_since_update = 0;
}

std::vector<int> Tracker::match_round(const std::vector<std::size_t>& track_order,
                                      const std::vector<std::size_t>& det_ids,
                                      const std::vector<Detection>& dets,
                                      const std::vector<Signature>& sigs,
                                      const FrameScales& scales) {
  CostTable table(track_order.size(), std::vector<std::optional<double>>(det_ids.size()));
  for (std::size_t a = 0; a < track_order.size(); ++a) {
    const TrackState& t = tracks_[track_order[a]];
    for (std::size_t b = 0; b < det_ids.size(); ++b) {
      const Detection& d = dets[det_ids[b]];
      if (d.class_id != t.class_id) continue;
      const double c =
          match_cost(t.prediction, t.signature, d.bbox, sigs[det_ids[b]], scales, cfg_).total;
      if (c <= cfg_.gate_distance) table[a][b] = c;
    }
  }
  const std::vector<int> local = cfg_.matching == MatchingMode::kBiGreedy
                                     ? bi_greedy_match(table, det_ids.size())
                                     : greedy_match(table, det_ids.size());
  std::vector<int> out(local.size(), kNewTrack);
  for (std::size_t b = 0; b < local.size(); ++b) {
    if (local[b] != kNewTrack) out[b] = static_cast<int>(track_order[local[b]]);
  }
  return out;
}

StepResult Tracker::step(int frame_id, const std::vector<Detection>& dets,
                         const ScalarGrid& depth, const VectorGrid& flow) {
  if (last_frame_ && frame_id <= *last_frame_) {
    throw Error("tracker: frame " + std::to_string(frame_id) + " arrived after frame " +
                std::to_string(*last_frame_));
  }
  const int gap = last_frame_ ? frame_id - *last_frame_ : 0;
  last_frame_ = frame_id;
  for (const Detection& d : dets) {
    if (!d.bbox.valid()) throw Error("tracker: invalid detection box");
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw Error("tracker: detection score outside [0, 1]");
  }

  for (TrackState& t : tracks_) predict_one(t, gap);

  std::vector<Signature> sigs;
  sigs.reserve(dets.size());
  for (const Detection& d : dets) sigs.push_back(sample_signature(d.bbox, depth, flow));
  const FrameScales scales = frame_scales(depth, flow);

  std::vector<std::size_t> high, low;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    if (dets[k].score >= cfg_.tau_high) {
      high.push_back(k);
    } else if (dets[k].score >= cfg_.tau_low) {
      low.push_back(k);
    }
  }

  // Matching cascade: frequently matched tracks first, then the most recently updated.
  std::vector<std::size_t> order(tracks_.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (tracks_[a].hits != tracks_[b].hits) return tracks_[a].hits > tracks_[b].hits;
    return tracks_[a].last_frame > tracks_[b].last_frame;
  });

  std::vector<int> assignment(dets.size(), kNewTrack);
  std::vector<bool> track_taken(tracks_.size(), false);
  const std::vector<int> r1 = match_round(order, high, dets, sigs, scales);
  for (std::size_t b = 0; b < high.size(); ++b) {
    assignment[high[b]] = r1[b];
    if (r1[b] != kNewTrack) track_taken[r1[b]] = true;
  }
  if (!low.empty()) {
    std::vector<std::size_t> rest;
    for (std::size_t k : order) {
      if (!track_taken[k]) rest.push_back(k);
    }
    const std::vector<int> r2 = match_round(rest, low, dets, sigs, scales);
    for (std::size_t b = 0; b < low.size(); ++b) assignment[low[b]] = r2[b];
  }

  StepResult result;
  std::vector<std::size_t> newly_confirmed;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    if (assignment[k] == kNewTrack) continue;
    TrackState& t = tracks_[assignment[k]];
    update_one(t, dets[k], sigs[k], frame_id);
    if (!t.confirmed) {
      t.tentative.emplace_back(frame_id, dets[k]);
      if (t.hits >= cfg_.min_hits) {
        t.confirmed = true;
        newly_confirmed.push_back(assignment[k]);
      }
    }
  }
  for (std::size_t k : high) {
    if (assignment[k] != kNewTrack) continue;
    TrackState t;
    t.track_id = next_id_++;
    t.class_id = dets[k].class_id;
    t.location = dets[k].bbox;
    t.mask = dets[k].mask;
    t.kalman = CornerKalman(to_corners(dets[k].bbox), cfg_.noise);
    t.prediction = to_corners(dets[k].bbox);
    t.hits = 1;
    t.age = 1;
    t.last_frame = frame_id;
    t.signature = sigs[k];
    t.tentative.emplace_back(frame_id, dets[k]);
    if (t.hits >= cfg_.min_hits) {
      t.confirmed = true;
      newly_confirmed.push_back(tracks_.size());
    }
    tracks_.push_back(std::move(t));
  }

  for (std::size_t idx : newly_confirmed) {
    TrackState& t = tracks_[idx];
    for (const auto& [f, d] : t.tentative) {
      if (f != frame_id) result.backfill.emplace_back(f, TrackOutput{t.track_id, d.bbox, d.mask});
    }
    t.tentative.clear();
    t.tentative.shrink_to_fit();
  }
  std::erase_if(tracks_, [&](const TrackState& t) { return t.time_since_update > cfg_.max_age; });

  for (const TrackState& t : tracks_) {
    if (!t.confirmed || t.time_since_update != 0) continue;
    result.current.push_back(TrackOutput{t.track_id, t.location, t.mask});
  }
  std::sort(result.current.begin(), result.current.end(),
            [](const TrackOutput& a, const TrackOutput& b) { return a.track_id < b.track_id; });
  return result;
}

std::vector<FrameTracks> run_tracker(const std::vector<TrackingFrame>& frames,
                                     const TrackerConfig& cfg) {
  Tracker tracker(cfg);
  std::map<int, std::map<int, TrackOutput>> by_frame;
  for (const TrackingFrame& f : frames) {
    if (!f.depth || !f.flow) throw Error("tracker: frame without depth or flow");
    StepResult r = tracker.step(f.frame_id, f.detections, *f.depth, *f.flow);
    auto& cur = by_frame[f.frame_id];
    for (TrackOutput& o : r.current) cur.emplace(o.track_id, std::move(o));
    for (auto& [fid, o] : r.backfill) by_frame[fid].emplace(o.track_id, std::move(o));
  }
  std::vector<FrameTracks> out;
  out.reserve(by_frame.size());
  for (auto& [fid, tracks] : by_frame) {
    FrameTracks ft{fid, {}};
    for (auto& [id, o] : tracks) ft.tracks.push_back(std::move(o));
    out.push_back(std::move(ft));
  }
  return out;
}

}  // namespace stcseg
