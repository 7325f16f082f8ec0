#include "stcseg/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace stcseg {

namespace {

constexpr std::uint64_t kNoiseStreamSalt = 0x9E3779B97F4A7C15ULL;

using json = nlohmann::ordered_json;

std::string shape_name(Shape s) { return s == Shape::kRect ? "rect" : "ellipse"; }

Shape parse_shape(const std::string& s) {
  if (s == "rect") return Shape::kRect;
  if (s == "ellipse") return Shape::kEllipse;
  throw Error("scene config: unknown shape '" + s + "'");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw Error(where + ": unknown key '" + it.key() + "'");
  }
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(where + ": missing required key '" + key + "'");
  return j.at(key);
}

template <typename T>
T get_as(const json& v, const char* key, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(where + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get_as<T>(j.at(key), key, where);
}

bool inside(const ObjectSpec& o, double ox, double oy, double cx, double cy) {
  if (o.shape == Shape::kRect) {
    return cx >= ox && cx < ox + o.w && cy >= oy && cy < oy + o.h;
  }
  const double rx = 0.5 * o.w, ry = 0.5 * o.h;
  const double dx = (cx - (ox + rx)) / rx, dy = (cy - (oy + ry)) / ry;
  return dx * dx + dy * dy <= 1.0;
}

// Area of the full shape inside the frame, counted on pixel centres.
std::size_t in_frame_area(const BinaryMask& full) { return full.count(); }

}  // namespace

std::uint64_t SplitMix64::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::gaussian() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int SplitMix64::uniform_int(int lo, int hi) {
  const double span = static_cast<double>(hi - lo + 1);
  const int k = static_cast<int>(std::floor(uniform() * span));
  return lo + std::min(k, hi - lo);
}

void SceneConfig::validate() const {
  std::vector<std::string> bad;
  if (height < 1) bad.push_back("height must be >= 1");
  if (width < 1) bad.push_back("width must be >= 1");
  if (n_frames < 1) bad.push_back("n_frames must be >= 1");
  if (jitter < 0) bad.push_back("jitter must be >= 0");
  if (!(miss_prob >= 0.0 && miss_prob < 1.0)) bad.push_back("miss_prob must be in [0, 1)");
  if (!(base_score >= 0.0 && base_score <= 1.0)) bad.push_back("base_score must be in [0, 1]");
  if (!(score_noise >= 0.0)) bad.push_back("score_noise must be >= 0");
  if (!(noise_sigma >= 0.0)) bad.push_back("noise_sigma must be >= 0");
  if (!std::isfinite(background_depth)) bad.push_back("background_depth must be finite");
  if (!std::isfinite(global_flow[0]) || !std::isfinite(global_flow[1])) {
    bad.push_back("global_flow must be finite");
  }
  for (std::size_t k = 0; k < objects.size(); ++k) {
    const ObjectSpec& o = objects[k];
    const std::string p = "objects[" + std::to_string(k) + "].";
    if (!(o.w > 0.0) || !(o.h > 0.0)) bad.push_back(p + "w/h must be > 0");
    if (!(o.depth < background_depth)) bad.push_back(p + "depth must be < background_depth");
    if (!(o.x >= 0.0 && o.y >= 0.0 && o.x + o.w <= static_cast<double>(width) &&
          o.y + o.h <= static_cast<double>(height))) {
      bad.push_back(p + "x/y/w/h must place the object inside the frame");
    }
    if (!std::isfinite(o.vx) || !std::isfinite(o.vy)) bad.push_back(p + "velocity must be finite");
    if (o.class_id < 0) bad.push_back(p + "class_id must be >= 0");
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "invalid scene config:";
    for (const auto& b : bad) msg << "\n  " << b;
    throw Error(msg.str());
  }
}

SceneConfig scene_config_from_json(const json& j) {
  const std::string where = "scene config";
  if (!j.is_object()) throw Error(where + ": expected a JSON object");
  reject_unknown(j,
                 {"height", "width", "n_frames", "seed", "objects", "background_depth",
                  "global_flow", "jitter", "miss_prob", "base_score", "score_noise",
                  "noise_sigma"},
                 where);
  SceneConfig c;
  c.n_frames = get_as<std::size_t>(require(j, "n_frames", where), "n_frames", where);
  c.seed = get_as<std::uint64_t>(require(j, "seed", where), "seed", where);
  read_optional(j, "height", c.height, where);
  read_optional(j, "width", c.width, where);
  read_optional(j, "background_depth", c.background_depth, where);
  read_optional(j, "global_flow", c.global_flow, where);
  read_optional(j, "jitter", c.jitter, where);
  read_optional(j, "miss_prob", c.miss_prob, where);
  read_optional(j, "base_score", c.base_score, where);
  read_optional(j, "score_noise", c.score_noise, where);
  read_optional(j, "noise_sigma", c.noise_sigma, where);
  const json& objs = require(j, "objects", where);
  if (!objs.is_array()) throw Error(where + ": 'objects' must be an array");
  for (std::size_t k = 0; k < objs.size(); ++k) {
    const json& oj = objs[k];
    const std::string ow = where + ": objects[" + std::to_string(k) + "]";
    if (!oj.is_object()) throw Error(ow + ": expected a JSON object");
    reject_unknown(oj, {"shape", "x", "y", "w", "h", "vx", "vy", "depth", "class_id"}, ow);
    ObjectSpec o;
    o.shape = parse_shape(get_as<std::string>(require(oj, "shape", ow), "shape", ow));
    o.x = get_as<double>(require(oj, "x", ow), "x", ow);
    o.y = get_as<double>(require(oj, "y", ow), "y", ow);
    o.w = get_as<double>(require(oj, "w", ow), "w", ow);
    o.h = get_as<double>(require(oj, "h", ow), "h", ow);
    o.depth = get_as<double>(require(oj, "depth", ow), "depth", ow);
    read_optional(oj, "vx", o.vx, ow);
    read_optional(oj, "vy", o.vy, ow);
    read_optional(oj, "class_id", o.class_id, ow);
    c.objects.push_back(o);
  }
  c.validate();
  return c;
}

json scene_config_to_json(const SceneConfig& c) {
  json j;
  j["height"] = c.height;
  j["width"] = c.width;
  j["n_frames"] = c.n_frames;
  j["seed"] = c.seed;
  j["background_depth"] = c.background_depth;
  j["global_flow"] = c.global_flow;
  j["jitter"] = c.jitter;
  j["miss_prob"] = c.miss_prob;
  j["base_score"] = c.base_score;
  j["score_noise"] = c.score_noise;
  j["noise_sigma"] = c.noise_sigma;
  json objs = json::array();
  for (const ObjectSpec& o : c.objects) {
    objs.push_back(json{{"shape", shape_name(o.shape)},
                        {"x", o.x},
                        {"y", o.y},
                        {"w", o.w},
                        {"h", o.h},
                        {"vx", o.vx},
                        {"vy", o.vy},
                        {"depth", o.depth},
                        {"class_id", o.class_id}});
  }
  j["objects"] = std::move(objs);
  return j;
}

BinaryMask render_object(const ObjectSpec& o, int t, const std::array<double, 2>& global_flow,
                         std::size_t h, std::size_t w) {
  const double ox = o.x + t * (o.vx + global_flow[0]);
  const double oy = o.y + t * (o.vy + global_flow[1]);
  BinaryMask m(h, w);
  const long i0 = std::max(0L, static_cast<long>(std::floor(oy)) - 1);
  const long i1 = std::min(static_cast<long>(h), static_cast<long>(std::ceil(oy + o.h)) + 1);
  const long j0 = std::max(0L, static_cast<long>(std::floor(ox)) - 1);
  const long j1 = std::min(static_cast<long>(w), static_cast<long>(std::ceil(ox + o.w)) + 1);
  for (long i = i0; i < i1; ++i) {
    for (long j = j0; j < j1; ++j) {
      if (inside(o, ox, oy, j + 0.5, i + 0.5)) m.set(i, j, true);
    }
  }
  return m;
}

std::vector<SceneFrame> generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  const std::size_t h = cfg.height, w = cfg.width;
  SplitMix64 det_rng(cfg.seed);
  SplitMix64 noise_rng(cfg.seed ^ kNoiseStreamSalt);

  std::vector<SceneFrame> frames;
  frames.reserve(cfg.n_frames);
  for (std::size_t t = 0; t < cfg.n_frames; ++t) {
    SceneFrame f;
    f.frame_id = static_cast<int>(t);
    f.depth = ScalarGrid(h, w, cfg.background_depth);
    f.flow = VectorGrid(h, w, 2);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        f.flow(i, j, 0) = cfg.global_flow[0];
        f.flow(i, j, 1) = cfg.global_flow[1];
      }
    }

    // Nearest depth wins; equal depths go to the lower object index.
    std::vector<BinaryMask> full;
    full.reserve(cfg.objects.size());
    std::vector<int> owner(h * w, -1);
    for (std::size_t k = 0; k < cfg.objects.size(); ++k) {
      full.push_back(render_object(cfg.objects[k], static_cast<int>(t), cfg.global_flow, h, w));
      const auto mv = full.back().values();
      for (std::size_t p = 0; p < mv.size(); ++p) {
        if (!mv[p]) continue;
        if (owner[p] < 0 || cfg.objects[k].depth < cfg.objects[owner[p]].depth) {
          owner[p] = static_cast<int>(k);
        }
      }
    }
    std::vector<BinaryMask> visible(cfg.objects.size(), BinaryMask(h, w));
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const int k = owner[i * w + j];
        if (k < 0) continue;
        const ObjectSpec& o = cfg.objects[k];
        visible[k].set(i, j, true);
        f.depth(i, j) = o.depth;
        f.flow(i, j, 0) = o.vx + cfg.global_flow[0];
        f.flow(i, j, 1) = o.vy + cfg.global_flow[1];
      }
    }

    for (std::size_t k = 0; k < cfg.objects.size(); ++k) {
      const std::size_t vis = visible[k].count();
      if (vis == 0) continue;
      const std::size_t area = in_frame_area(full[k]);
      GtInstance g;
      g.instance_id = static_cast<int>(k) + 1;
      g.bbox = tight_box(visible[k]);
      g.mask = std::move(visible[k]);
      g.depth = cfg.objects[k].depth;
      g.occluded_fraction = static_cast<double>(area - vis) / static_cast<double>(area);
      f.gt_instances.push_back(std::move(g));
    }

    // Fixed draw order per visible instance: miss, four corner jitters, score.
    for (const GtInstance& g : f.gt_instances) {
      const bool missed = det_rng.uniform() < cfg.miss_prob;
      int dj[4];
      for (int& d : dj) d = det_rng.uniform_int(-cfg.jitter, cfg.jitter);
      const double u = 2.0 * det_rng.uniform() - 1.0;
      if (missed) continue;
      BBox b{g.bbox.x1 + dj[0], g.bbox.y1 + dj[1], g.bbox.x2 + dj[2], g.bbox.y2 + dj[3]};
      b = clamp_box(b, h, w);
      if (!b.valid()) b = g.bbox;
      Detection d;
      d.bbox = b;
      d.score = std::clamp(cfg.base_score - g.occluded_fraction + cfg.score_noise * u, 0.0, 1.0);
      d.class_id = cfg.objects[g.instance_id - 1].class_id;
      d.frame_id = f.frame_id;
      f.detections.push_back(std::move(d));
    }

    if (cfg.noise_sigma > 0.0) {
      for (double& v : f.depth.values()) v += cfg.noise_sigma * noise_rng.gaussian();
      for (double& v : f.flow.values()) v += cfg.noise_sigma * noise_rng.gaussian();
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace stcseg
