#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "stcseg/grid.hpp"
#include "stcseg/scene_sim.hpp"
#include "stcseg/tracker.hpp"

namespace stcseg {

// scene.json layout:
//   {"config": {...}, "frames": [{"frame_id", "depth_path", "flow_path",
//     "gt": [{"id", "bbox": [x1,y1,x2,y2], "mask_path", "depth"}],
//     "detections": [{"bbox", "score", "class"}]}]}
// Paths are relative to the manifest's directory.

struct ManifestGt {
  int id = 0;
  BBox bbox;
  std::string mask_path;
  double depth = 0.0;
};

struct ManifestDetection {
  BBox bbox;
  double score = 0.0;
  int class_id = 0;
};

struct ManifestFrame {
  int frame_id = 0;
  std::string depth_path;
  std::string flow_path;
  std::vector<ManifestGt> gt;
  std::vector<ManifestDetection> detections;
};

struct Manifest {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<ManifestFrame> frames;
  std::filesystem::path base_dir;  // directory the relative paths resolve against
};

Manifest parse_manifest(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir);
nlohmann::ordered_json manifest_to_json(const Manifest& m);

Manifest read_manifest(const std::filesystem::path& path);
// Writes 2-space indented JSON followed by a newline.
void write_manifest(const std::filesystem::path& path, const Manifest& m);

// Writes every grid plus <dir>/scene.json and returns the manifest.
Manifest write_scene(const std::vector<SceneFrame>& frames, const SceneConfig& cfg,
                     const std::filesystem::path& dir);

// Loads frame k with its grids, ground-truth masks and detections.
SceneFrame load_frame(const Manifest& m, std::size_t k);

// Tracks file: one JSON object per line and per frame,
//   {"frame_id": f, "tracks": [{"track_id": id, "bbox": [...], "mask": "<path>"}]}
// ordered by frame_id, then track_id. "mask" is omitted when the track has no
// mask; mask grids are written next to the tracks file.
void write_tracks(const std::filesystem::path& path, const std::vector<FrameTracks>& frames);
std::vector<FrameTracks> read_tracks(const std::filesystem::path& path);

}  // namespace stcseg
