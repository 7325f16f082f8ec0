#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "stcseg/grid.hpp"
#include "stcseg/kalman.hpp"

namespace stcseg {

struct Detection {
  BBox bbox;
  double score = 1.0;
  int class_id = 0;
  int frame_id = 0;
  std::optional<BinaryMask> mask;
};

// Depth and flow sampled at the two diagonal corners. The lower-right corner
// of a half-open box is the pixel (y2 - 1, x2 - 1); both are clamped to the frame.
struct Signature {
  std::array<double, 2> depth{};
  std::array<double, 4> flow{};  // (dx, dy) at upper-left, then at lower-right
};

Signature sample_signature(const BBox& b, const ScalarGrid& depth, const VectorGrid& flow);

struct CostTerms {
  double loc = 0.0;
  double depth = 0.0;
  double flow = 0.0;
  double total = 0.0;
};

enum class MatchingMode { kBiGreedy, kGreedy };
enum class MotionModel { kKalman, kDelta };
enum class LocationMode { kDiagonal, kCenter };

std::string_view to_string(MatchingMode m);
std::string_view to_string(MotionModel m);
std::string_view to_string(LocationMode m);
MatchingMode parse_matching_mode(std::string_view s);
MotionModel parse_motion_model(std::string_view s);
LocationMode parse_location_mode(std::string_view s);

struct TrackerConfig {
  std::array<double, 3> alpha{0.7, 0.2, 0.1};  // location, depth, flow weights
  double tau_high = 0.5;
  double tau_low = 0.1;
  std::size_t max_age = 30;
  std::size_t min_hits = 2;
  double gate_distance = 0.4;
  KalmanNoise noise;
  MatchingMode matching = MatchingMode::kBiGreedy;
  MotionModel motion = MotionModel::kKalman;
  LocationMode location = LocationMode::kDiagonal;

  // tau_low == tau_high is accepted and disables the second matching round.
  void validate() const;
};

// Per-frame normalisers for the three cost terms.
struct FrameScales {
  double diagonal = 1.0;
  double depth_range = 1.0;  // max - min depth, 1 for a flat frame
  double flow_scale = 1.0;   // max flow magnitude + 1
};

FrameScales frame_scales(const ScalarGrid& depth, const VectorGrid& flow);

CostTerms match_cost(const Corners& predicted, const Signature& track_sig, const BBox& det,
                     const Signature& det_sig, const FrameScales& scales,
                     const TrackerConfig& cfg);

// Cost table indexed [track][detection]; nullopt marks a forbidden pair.
using CostTable = std::vector<std::vector<std::optional<double>>>;

inline constexpr int kNewTrack = -1;

// Two-pass matching. Tracks are visited in index order; ties go to the lower
// index. Returns, per detection, the matched track index or kNewTrack.
std::vector<int> bi_greedy_match(const CostTable& cost, std::size_t n_dets);

// One-directional baseline: tracks in index order take their nearest
// still-unassigned detection.
std::vector<int> greedy_match(const CostTable& cost, std::size_t n_dets);

struct TrackState {
  int track_id = 0;
  int class_id = 0;
  BBox location;                    // last matched detection box
  std::optional<BinaryMask> mask;   // mask of the last matched detection
  Eigen::Vector4d velocity = Eigen::Vector4d::Zero();  // corner displacement per frame
  CornerKalman kalman;
  Corners prediction;               // prediction for the current frame
  std::size_t hits = 0;
  std::size_t age = 0;
  std::size_t time_since_update = 0;
  int last_frame = 0;
  Signature signature;
  bool confirmed = false;
  // Matched detections kept until confirmation so early frames can be reported.
  std::vector<std::pair<int, Detection>> tentative;
};

struct TrackOutput {
  int track_id = 0;
  BBox bbox;
  std::optional<BinaryMask> mask;

  bool operator==(const TrackOutput&) const = default;
};

struct FrameTracks {
  int frame_id = 0;
  std::vector<TrackOutput> tracks;  // sorted by track_id

  bool operator==(const FrameTracks&) const = default;
};

struct StepResult {
  std::vector<TrackOutput> current;
  // Earlier frames of tracks confirmed in this step, as (frame_id, output).
  std::vector<std::pair<int, TrackOutput>> backfill;
};

class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg);

  // Frames must arrive with strictly increasing frame_id.
  StepResult step(int frame_id, const std::vector<Detection>& dets, const ScalarGrid& depth,
                  const VectorGrid& flow);

  const std::vector<TrackState>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  Corners predict_one(TrackState& t, int gap);
  void update_one(TrackState& t, const Detection& d, const Signature& sig, int frame_id);
  std::vector<int> match_round(const std::vector<std::size_t>& track_order,
                               const std::vector<std::size_t>& det_ids,
                               const std::vector<Detection>& dets,
                               const std::vector<Signature>& sigs, const FrameScales& scales);

  TrackerConfig cfg_;
  std::vector<TrackState> tracks_;
  int next_id_ = 1;
  std::optional<int> last_frame_;
};

struct TrackingFrame {
  int frame_id = 0;
  const ScalarGrid* depth = nullptr;
  const VectorGrid* flow = nullptr;
  std::vector<Detection> detections;
};

// Runs the tracker over a whole sequence and merges back-filled outputs, so
// every frame appears once with tracks sorted by id.
std::vector<FrameTracks> run_tracker(const std::vector<TrackingFrame>& frames,
                                     const TrackerConfig& cfg);

}  // namespace stcseg
