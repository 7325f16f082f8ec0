#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "stcseg/grid.hpp"
#include "stcseg/tracker.hpp"

namespace stcseg {

// SplitMix64: state += 0x9E3779B97F4A7C15, then
//   z = state; z = (z ^ z >> 30) * 0xBF58476D1CE4E5B9;
//   z = (z ^ z >> 27) * 0x94D049BB133111EB; return z ^ z >> 31.
// uniform() = (next() >> 11) * 2^-53 in [0, 1). gaussian() uses one
// Box-Muller cosine draw per call: sqrt(-2 ln(1 - u1)) * cos(2 pi u2).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  double uniform();
  double gaussian();
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);

 private:
  std::uint64_t state_;
};

enum class Shape { kRect, kEllipse };

struct ObjectSpec {
  Shape shape = Shape::kRect;
  double x = 0.0;  // upper-left corner of the bounding extent at frame 0
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;
  double vx = 0.0;  // pixels per frame
  double vy = 0.0;
  double depth = 5.0;
  int class_id = 0;
};

struct SceneConfig {
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t n_frames = 1;
  std::uint64_t seed = 0;
  std::vector<ObjectSpec> objects;
  double background_depth = 10.0;
  std::array<double, 2> global_flow{0.0, 0.0};
  int jitter = 0;            // detection corners move by a uniform integer in [-jitter, jitter]
  double miss_prob = 0.0;
  double base_score = 0.9;
  double score_noise = 0.05;  // score += score_noise * u, u uniform in [-1, 1]
  double noise_sigma = 0.0;   // additive Gaussian noise on depth and flow

  // Throws Error listing every violated field.
  void validate() const;
};

// Strict JSON schema: unknown keys are rejected, and n_frames, seed and
// objects are required.
SceneConfig scene_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json scene_config_to_json(const SceneConfig& cfg);

struct GtInstance {
  int instance_id = 0;  // 1-based object index
  BBox bbox;            // tight box of the visible mask
  BinaryMask mask;
  double depth = 0.0;
  double occluded_fraction = 0.0;
};

struct SceneFrame {
  int frame_id = 0;
  ScalarGrid depth;
  VectorGrid flow;
  std::vector<GtInstance> gt_instances;
  std::vector<Detection> detections;
};

// Full (unoccluded) shape of an object at frame t, clipped to the frame.
BinaryMask render_object(const ObjectSpec& o, int t, const std::array<double, 2>& global_flow,
                         std::size_t h, std::size_t w);

std::vector<SceneFrame> generate_scene(const SceneConfig& cfg);

}  // namespace stcseg
