#include "bitseq/trajdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bitseq/errors.hpp"
#include "bitseq/rng.hpp"

namespace bitseq {

namespace {

// Scene files in the wild write integer columns as "780.0"; accept any
// numeral that is exactly integral.
int parse_int_field(const std::string& tok, const char* what, int line_no) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw FormatError(std::string("scene file: bad ") + what + " at line " +
                      std::to_string(line_no));
  }
  if (pos != tok.size() || v != std::floor(v))
    throw FormatError(std::string("scene file: non-integral ") + what + " at line " +
                      std::to_string(line_no));
  return static_cast<int>(v);
}

float parse_float_field(const std::string& tok, const char* what, int line_no) {
  size_t pos = 0;
  float v = 0.0f;
  try {
    v = std::stof(tok, &pos);
  } catch (const std::exception&) {
    throw FormatError(std::string("scene file: bad ") + what + " at line " +
                      std::to_string(line_no));
  }
  if (pos != tok.size())
    throw FormatError(std::string("scene file: bad ") + what + " at line " +
                      std::to_string(line_no));
  return v;
}

}  // namespace

SceneTable load_scene(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scene file: " + path);
  SceneTable table;
  {
    auto slash = path.find_last_of('/');
    auto base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    table.name = dot == std::string::npos ? base : base.substr(0, dot);
  }
  std::string line;
  int line_no = 0;
  std::set<std::pair<int, int>> seen;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ss >> tok) toks.push_back(tok);
    if (toks.empty()) continue;  // blank line
    if (toks.size() != 4)
      throw FormatError("scene file: expected 4 columns, got " + std::to_string(toks.size()) +
                        " at line " + std::to_string(line_no));
    SceneTable::Row row;
    row.frame = parse_int_field(toks[0], "frame_id", line_no);
    row.ped = parse_int_field(toks[1], "ped_id", line_no);
    row.x = parse_float_field(toks[2], "x", line_no);
    row.y = parse_float_field(toks[3], "y", line_no);
    if (!seen.insert({row.frame, row.ped}).second)
      throw FormatError("scene file: duplicate (frame " + std::to_string(row.frame) + ", ped " +
                        std::to_string(row.ped) + ") at line " + std::to_string(line_no));
    table.rows.push_back(row);
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.ped, a.frame) < std::tie(b.ped, b.frame);
  });
  return table;
}

Homography load_homography(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open homography file: " + path);
  Homography h{};
  for (int i = 0; i < 9; ++i) {
    if (!(is >> h[static_cast<size_t>(i)]))
      throw FormatError("homography file: expected 9 numbers: " + path);
  }
  return h;
}

void save_scene(const SceneTable& table, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open scene file for writing: " + path);
  for (const auto& r : table.rows)
    os << r.frame << " " << r.ped << " " << r.x << " " << r.y << "\n";
  if (!os) throw IoError("write failed for scene file: " + path);
}

int infer_frame_stride(const SceneTable& table) {
  std::map<int, int> gap_count;
  std::map<int, int> last_frame;
  for (const auto& r : table.rows) {
    auto it = last_frame.find(r.ped);
    if (it != last_frame.end()) gap_count[r.frame - it->second] += 1;
    last_frame[r.ped] = r.frame;
  }
  int best_gap = 0, best_count = 0;
  for (const auto& [gap, count] : gap_count)
    if (count > best_count) {
      best_gap = gap;
      best_count = count;
    }
  return best_gap;
}

std::vector<TrajectoryWindow> make_windows(const SceneTable& table, int obs_len, int fut_len,
                                           int stride, int max_neighbors) {
  if (obs_len < 1 || fut_len < 1) throw std::invalid_argument("make_windows: lengths must be >= 1");
  if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");
  const int total = obs_len + fut_len;
  const int frame_stride = infer_frame_stride(table);
  std::vector<TrajectoryWindow> out;
  if (frame_stride == 0) return out;

  // Per-ped position lookup and per-ped sorted frame list.
  std::map<int, std::map<int, Point>> tracks;
  for (const auto& r : table.rows) tracks[r.ped][r.frame] = {r.x, r.y};

  for (const auto& [ped, frames] : tracks) {
    std::vector<std::pair<int, Point>> seq(frames.begin(), frames.end());
    // Contiguous runs at exactly the dataset stride.
    size_t run_start = 0;
    for (size_t i = 1; i <= seq.size(); ++i) {
      const bool broken = i == seq.size() || seq[i].first - seq[i - 1].first != frame_stride;
      if (!broken) continue;
      const int run_len = static_cast<int>(i - run_start);
      for (int s = 0; s + total <= run_len; s += stride) {
        TrajectoryWindow w;
        w.ped_id = ped;
        w.scene = table.name;
        for (int t = 0; t < obs_len; ++t) w.obs.push_back(seq[run_start + static_cast<size_t>(s + t)].second);
        for (int t = 0; t < fut_len; ++t)
          w.fut.push_back(seq[run_start + static_cast<size_t>(s + obs_len + t)].second);

        // Neighbors present over the whole observed span.
        const int first_frame = seq[run_start + static_cast<size_t>(s)].first;
        const int last_frame = seq[run_start + static_cast<size_t>(s + obs_len - 1)].first;
        std::vector<std::pair<float, std::vector<Point>>> cands;
        for (const auto& [other, oframes] : tracks) {
          if (other == ped) continue;
          std::vector<Point> track;
          bool full = true;
          for (int f = first_frame; f <= last_frame && full; f += frame_stride) {
            auto it = oframes.find(f);
            if (it == oframes.end()) full = false;
            else track.push_back(it->second);
          }
          if (!full) continue;
          const Point me = w.obs.back();
          const Point them = track.back();
          const float d2 = (me.x - them.x) * (me.x - them.x) + (me.y - them.y) * (me.y - them.y);
          cands.emplace_back(d2, std::move(track));
        }
        std::sort(cands.begin(), cands.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (size_t c = 0; c < cands.size() && static_cast<int>(c) < max_neighbors; ++c)
          w.neighbor_obs.push_back(std::move(cands[c].second));
        out.push_back(std::move(w));
      }
      run_start = i;
    }
  }
  return out;
}

Point project_homography(Point p, const Homography& h) {
  const double X = h[0] * p.x + h[1] * p.y + h[2];
  const double Y = h[3] * p.x + h[4] * p.y + h[5];
  const double W = h[6] * p.x + h[7] * p.y + h[8];
  if (std::fabs(W) < 1e-12)
    throw FormatError("homography projection: w' ~ 0 (point at infinity)");
  return {static_cast<float>(X / W), static_cast<float>(Y / W)};
}

std::vector<Point> project_homography(const std::vector<Point>& pts, const Homography& h) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(project_homography(p, h));
  return out;
}

SceneSplit leave_one_out_split(const std::vector<std::string>& scenes,
                               const std::string& held_out) {
  if (std::find(scenes.begin(), scenes.end(), held_out) == scenes.end())
    throw std::invalid_argument("leave_one_out_split: unknown scene '" + held_out + "'");
  SceneSplit split;
  split.test = held_out;
  for (const auto& s : scenes)
    if (s != held_out) split.train.push_back(s);
  return split;
}

std::optional<SynthKind> synth_kind_from_string(const std::string& s) {
  if (s == "line") return SynthKind::Line;
  if (s == "turn") return SynthKind::Turn;
  if (s == "crossing") return SynthKind::Crossing;
  return std::nullopt;
}

SceneTable synth_scene(SynthKind kind, int n_agents, float noise_sigma, std::uint64_t seed,
                       int n_frames) {
  if (n_agents < 1 || n_frames < 2) throw std::invalid_argument("synth_scene: bad sizes");
  Rng rng(seed);
  SceneTable table;
  switch (kind) {
    case SynthKind::Line: table.name = "synth-line"; break;
    case SynthKind::Turn: table.name = "synth-turn"; break;
    case SynthKind::Crossing: table.name = "synth-crossing"; break;
  }
  table.homography = Homography{1, 0, 0, 0, 1, 0, 0, 0, 1};

  for (int a = 0; a < n_agents; ++a) {
    float px, py, vx, vy, cx = 0, cy = 0, r = 0, theta0 = 0, omega = 0;
    if (kind == SynthKind::Turn) {
      cx = rng.uniform(8.0f, 24.0f);
      cy = rng.uniform(8.0f, 24.0f);
      r = rng.uniform(3.0f, 8.0f);
      theta0 = rng.uniform(0.0f, 6.2831853f);
      omega = (rng.uniform() < 0.5f ? 1.0f : -1.0f) * rng.uniform(0.06f, 0.14f);
      px = py = vx = vy = 0;
    } else if (kind == SynthKind::Crossing) {
      // Two groups aimed at the center from opposite-ish sides.
      const bool group = a % 2 == 0;
      px = group ? rng.uniform(2.0f, 6.0f) : rng.uniform(26.0f, 30.0f);
      py = rng.uniform(6.0f, 26.0f);
      const float tx = group ? 30.0f : 2.0f;
      const float ty = rng.uniform(6.0f, 26.0f);
      const float steps = static_cast<float>(n_frames - 1);
      vx = (tx - px) / steps;
      vy = (ty - py) / steps;
    } else {
      px = rng.uniform(2.0f, 30.0f);
      py = rng.uniform(2.0f, 30.0f);
      const float speed = rng.uniform(0.25f, 0.7f);
      const float heading = rng.uniform(0.0f, 6.2831853f);
      vx = speed * std::cos(heading);
      vy = speed * std::sin(heading);
    }
    for (int f = 0; f < n_frames; ++f) {
      Point p;
      if (kind == SynthKind::Turn) {
        const float th = theta0 + omega * static_cast<float>(f);
        p = {cx + r * std::cos(th), cy + r * std::sin(th)};
      } else {
        p = {px + vx * static_cast<float>(f), py + vy * static_cast<float>(f)};
      }
      if (noise_sigma > 0.0f) {
        p.x += rng.normal(0.0f, noise_sigma);
        p.y += rng.normal(0.0f, noise_sigma);
      }
      table.rows.push_back({f, a, p.x, p.y});
    }
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.ped, a.frame) < std::tie(b.ped, b.frame);
  });
  return table;
}

}  // namespace bitseq
