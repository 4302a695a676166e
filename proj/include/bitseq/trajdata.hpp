#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bitseq {

struct Point {
  float x = 0.0f;
  float y = 0.0f;
};

using Homography = std::array<double, 9>;  // row-major 3x3

/// One scene of raw observations `frame_id ped_id x y`. Rows are kept sorted
/// by (ped, frame); (frame, ped) pairs are unique.
struct SceneTable {
  struct Row {
    int frame;
    int ped;
    float x, y;
  };
  std::string name;
  std::vector<Row> rows;
  std::optional<Homography> homography;
};

/// One training/eval sample: 8 observed steps, 12 future steps, plus the
/// observed tracks of co-present neighbors ordered by proximity at the last
/// observed frame.
struct TrajectoryWindow {
  std::vector<Point> obs;
  std::vector<Point> fut;
  int ped_id = 0;
  std::string scene;
  std::vector<std::vector<Point>> neighbor_obs;
};

/// Parses a whitespace-separated scene file. Malformed rows raise a
/// FormatError naming the line; duplicate (frame, ped) pairs are rejected.
/// An empty file is a valid empty table.
SceneTable load_scene(const std::string& path);

/// 3 lines x 3 floats.
Homography load_homography(const std::string& path);

void save_scene(const SceneTable& table, const std::string& path);

/// Modal gap between consecutive frames of the same pedestrian; windows are
/// cut only from runs at exactly this stride. Returns 0 for tables with no
/// consecutive observations.
int infer_frame_stride(const SceneTable& table);

/// Sliding windows per pedestrian over contiguous frame runs. `stride` is the
/// window-start step count. Neighbors must be present on every observed frame
/// of the window.
std::vector<TrajectoryWindow> make_windows(const SceneTable& table, int obs_len = 8,
                                           int fut_len = 12, int stride = 1,
                                           int max_neighbors = 3);

/// (x', y', w') = H (x, y, 1), returned as (x'/w', y'/w'). Near-zero w'
/// raises a FormatError.
Point project_homography(Point p, const Homography& h);
std::vector<Point> project_homography(const std::vector<Point>& pts, const Homography& h);

struct SceneSplit {
  std::vector<std::string> train;
  std::string test;
};

/// Leave-one-out: train on everything except held_out. Unknown names throw;
/// a single-scene split leaves an empty train set.
SceneSplit leave_one_out_split(const std::vector<std::string>& scenes,
                               const std::string& held_out);

enum class SynthKind { Line, Turn, Crossing };
std::optional<SynthKind> synth_kind_from_string(const std::string& s);

/// Deterministic synthetic scene with closed-form tracks: straight lines,
/// constant-curvature arcs, or two crossing groups. Tracks span `n_frames`
/// consecutive frames (>= obs+fut for windowing).
SceneTable synth_scene(SynthKind kind, int n_agents, float noise_sigma, std::uint64_t seed,
                       int n_frames = 24);

}  // namespace bitseq
