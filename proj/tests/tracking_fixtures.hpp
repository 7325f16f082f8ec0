#pragma once

#include <vector>

#include "stcseg/grid.hpp"
#include "stcseg/tracker.hpp"

namespace tracking_fixtures {

// Frames point into the owned grids; moving keeps vector buffers in place,
// copying would not, so copies are disabled.
struct OwnedSequence {
  std::vector<stcseg::ScalarGrid> depth;
  std::vector<stcseg::VectorGrid> flow;
  std::vector<stcseg::TrackingFrame> frames;

  OwnedSequence() = default;
  OwnedSequence(OwnedSequence&&) = default;
  OwnedSequence& operator=(OwnedSequence&&) = default;
  OwnedSequence(const OwnedSequence&) = delete;
  OwnedSequence& operator=(const OwnedSequence&) = delete;
};

// One 12x12 box on a 64x64 frame moving 2 px right per frame at depth 4 over
// a depth-10 background; one detection per frame with the given score.
inline OwnedSequence single_box_sequence(int n, const std::vector<double>& scores) {
  OwnedSequence s;
  s.depth.reserve(n);
  s.flow.reserve(n);
  for (int t = 0; t < n; ++t) {
    const stcseg::BBox b{8 + 2 * t, 20, 20 + 2 * t, 32};
    stcseg::ScalarGrid d(64, 64, 10.0);
    stcseg::VectorGrid f(64, 64, 2);
    for (int i = b.y1; i < b.y2; ++i) {
      for (int j = b.x1; j < b.x2; ++j) {
        d(i, j) = 4.0;
        f(i, j, 0) = 2.0;
      }
    }
    s.depth.push_back(std::move(d));
    s.flow.push_back(std::move(f));
    stcseg::Detection det;
    det.bbox = b;
    det.score = scores[t];
    det.frame_id = t;
    s.frames.push_back({t, &s.depth.back(), &s.flow.back(), {det}});
  }
  return s;
}

// Nine frames: confident detections on 0-2 and 6-8, score 0.3 on 3-5.
inline OwnedSequence occlusion_sequence() {
  return single_box_sequence(9, {0.9, 0.9, 0.9, 0.3, 0.3, 0.3, 0.9, 0.9, 0.9});
}

}  // namespace tracking_fixtures
