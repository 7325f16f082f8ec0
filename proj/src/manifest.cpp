#include "stcseg/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "stcseg/grid_io.hpp"

namespace stcseg {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(where + ": missing key '" + key + "'");
  }
  return j.at(key);
}

template <typename T>
T as(const json& j, const char* key, const std::string& where) {
  try {
    return field(j, key, where).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(where + ": key '" + key + "' has the wrong type");
  }
}

BBox bbox_from(const json& j, const char* key, const std::string& where) {
  const json& b = field(j, key, where);
  if (!b.is_array() || b.size() != 4) throw Error(where + ": '" + key + "' must hold 4 integers");
  BBox out;
  try {
    out = BBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
  } catch (const nlohmann::json::exception&) {
    throw Error(where + ": '" + key + "' must hold 4 integers");
  }
  if (!out.valid()) throw Error(where + ": '" + key + "' is not a valid box");
  return out;
}

json bbox_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

std::string frame_file(int frame_id, const std::string& suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frames/%06d_%s.grid", frame_id, suffix.c_str());
  return buf;
}

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

Manifest parse_manifest(const json& j, const fs::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  if (!j.is_object()) throw Error("manifest: expected a JSON object");
  if (j.contains("config")) m.config = j.at("config");
  const json& frames = field(j, "frames", "manifest");
  if (!frames.is_array()) throw Error("manifest: 'frames' must be an array");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const json& fj = frames[k];
    std::string where = "manifest frame index " + std::to_string(k);
    ManifestFrame f;
    f.frame_id = as<int>(fj, "frame_id", where);
    where = "manifest frame " + std::to_string(f.frame_id);
    f.depth_path = as<std::string>(fj, "depth_path", where);
    f.flow_path = as<std::string>(fj, "flow_path", where);
    const json& gt = field(fj, "gt", where);
    const json& dets = field(fj, "detections", where);
    if (!gt.is_array() || !dets.is_array()) {
      throw Error(where + ": 'gt' and 'detections' must be arrays");
    }
    for (const json& g : gt) {
      f.gt.push_back(ManifestGt{as<int>(g, "id", where), bbox_from(g, "bbox", where),
                                as<std::string>(g, "mask_path", where),
                                as<double>(g, "depth", where)});
    }
    for (const json& d : dets) {
      ManifestDetection md{bbox_from(d, "bbox", where), as<double>(d, "score", where),
                           as<int>(d, "class", where)};
      if (!(md.score >= 0.0 && md.score <= 1.0)) {
        throw Error(where + ": detection score outside [0, 1]");
      }
      f.detections.push_back(md);
    }
    if (!m.frames.empty() && f.frame_id <= m.frames.back().frame_id) {
      throw Error(where + ": frame ids must be strictly increasing");
    }
    m.frames.push_back(std::move(f));
  }
  return m;
}

json manifest_to_json(const Manifest& m) {
  json j;
  j["config"] = m.config;
  json frames = json::array();
  for (const ManifestFrame& f : m.frames) {
    json fj;
    fj["frame_id"] = f.frame_id;
    fj["depth_path"] = f.depth_path;
    fj["flow_path"] = f.flow_path;
    json gt = json::array();
    for (const ManifestGt& g : f.gt) {
      gt.push_back(json{{"id", g.id},
                        {"bbox", bbox_json(g.bbox)},
                        {"mask_path", g.mask_path},
                        {"depth", g.depth}});
    }
    fj["gt"] = std::move(gt);
    json dets = json::array();
    for (const ManifestDetection& d : f.detections) {
      dets.push_back(json{{"bbox", bbox_json(d.bbox)}, {"score", d.score}, {"class", d.class_id}});
    }
    fj["detections"] = std::move(dets);
    frames.push_back(std::move(fj));
  }
  j["frames"] = std::move(frames);
  return j;
}

Manifest read_manifest(const fs::path& path) {
  return parse_manifest(parse_json_file(path), path.parent_path());
}

void write_manifest(const fs::path& path, const Manifest& m) {
  write_text(path, manifest_to_json(m).dump(2) + "\n");
}

Manifest write_scene(const std::vector<SceneFrame>& frames, const SceneConfig& cfg,
                     const fs::path& dir) {
  fs::create_directories(dir / "frames");
  Manifest m;
  m.base_dir = dir;
  m.config = scene_config_to_json(cfg);
  for (const SceneFrame& f : frames) {
    ManifestFrame mf;
    mf.frame_id = f.frame_id;
    mf.depth_path = frame_file(f.frame_id, "depth");
    mf.flow_path = frame_file(f.frame_id, "flow");
    write_grid(dir / mf.depth_path, f.depth);
    write_grid(dir / mf.flow_path, f.flow);
    for (const GtInstance& g : f.gt_instances) {
      ManifestGt mg{g.instance_id, g.bbox, frame_file(f.frame_id, "gt" + std::to_string(g.instance_id)),
                    g.depth};
      write_grid(dir / mg.mask_path, g.mask);
      mf.gt.push_back(std::move(mg));
    }
    for (const Detection& d : f.detections) {
      mf.detections.push_back(ManifestDetection{d.bbox, d.score, d.class_id});
    }
    m.frames.push_back(std::move(mf));
  }
  write_manifest(dir / "scene.json", m);
  return m;
}

SceneFrame load_frame(const Manifest& m, std::size_t k) {
  if (k >= m.frames.size()) {
    throw Error("manifest has no frame index " + std::to_string(k));
  }
  const ManifestFrame& mf = m.frames[k];
  SceneFrame f;
  f.frame_id = mf.frame_id;
  f.depth = read_scalar_grid(m.base_dir / mf.depth_path);
  f.flow = read_grid(m.base_dir / mf.flow_path);
  if (f.flow.channels() != 2) {
    throw Error("frame " + std::to_string(mf.frame_id) + ": flow grid must have 2 channels");
  }
  if (f.flow.height() != f.depth.height() || f.flow.width() != f.depth.width()) {
    throw Error("frame " + std::to_string(mf.frame_id) + ": depth and flow dimensions differ");
  }
  for (const ManifestGt& g : mf.gt) {
    GtInstance gi;
    gi.instance_id = g.id;
    gi.bbox = g.bbox;
    gi.mask = read_mask(m.base_dir / g.mask_path);
    gi.depth = g.depth;
    f.gt_instances.push_back(std::move(gi));
  }
  for (const ManifestDetection& d : mf.detections) {
    Detection det;
    det.bbox = d.bbox;
    det.score = d.score;
    det.class_id = d.class_id;
    det.frame_id = mf.frame_id;
    f.detections.push_back(std::move(det));
  }
  return f;
}

void write_tracks(const fs::path& path, const std::vector<FrameTracks>& frames) {
  const std::string mask_dir = path.filename().string() + ".masks";
  bool made_dir = false;
  std::ostringstream out;
  for (const FrameTracks& f : frames) {
    json fj;
    fj["frame_id"] = f.frame_id;
    json tracks = json::array();
    for (const TrackOutput& t : f.tracks) {
      json tj{{"track_id", t.track_id}, {"bbox", bbox_json(t.bbox)}};
      if (t.mask) {
        if (!made_dir) {
          fs::create_directories(path.parent_path() / mask_dir);
          made_dir = true;
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "/f%06d_t%06d.grid", f.frame_id, t.track_id);
        const std::string rel = mask_dir + buf;
        write_grid(path.parent_path() / rel, *t.mask);
        tj["mask"] = rel;
      }
      tracks.push_back(std::move(tj));
    }
    fj["tracks"] = std::move(tracks);
    out << fj.dump() << "\n";
  }
  write_text(path, out.str());
}

std::vector<FrameTracks> read_tracks(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<FrameTracks> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json fj;
    try {
      fj = json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(where + ": " + e.what());
    }
    FrameTracks f;
    f.frame_id = as<int>(fj, "frame_id", where);
    const json& tracks = field(fj, "tracks", where);
    if (!tracks.is_array()) throw Error(where + ": 'tracks' must be an array");
    for (const json& tj : tracks) {
      TrackOutput t;
      t.track_id = as<int>(tj, "track_id", where);
      t.bbox = bbox_from(tj, "bbox", where);
      if (tj.contains("mask")) {
        t.mask = read_mask(path.parent_path() / as<std::string>(tj, "mask", where));
      }
      f.tracks.push_back(std::move(t));
    }
    if (!out.empty() && f.frame_id <= out.back().frame_id) {
      throw Error(where + ": frame ids must be strictly increasing");
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace stcseg
