#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "bitseq/errors.hpp"
#include "bitseq/trajdata.hpp"
#include "test_helpers.hpp"

using namespace bitseq;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  os << content;
}

}  // namespace

TEST_CASE("load_scene parses and sorts a hand-written fixture") {
  write_file("scene_fix.txt", "10 2 1.5 2.5\n0 1 0.0 0.0\n10 1 1.0 1.0\n20 1 2.0 2.0\n");
  SceneTable t = load_scene("scene_fix.txt");
  CHECK(t.rows.size() == 4);
  CHECK(t.name == "scene_fix");
  // Sorted by (ped, frame).
  CHECK(t.rows[0].ped == 1);
  CHECK(t.rows[0].frame == 0);
  CHECK(t.rows[2].frame == 20);
  CHECK(t.rows[3].ped == 2);
  std::remove("scene_fix.txt");
}

TEST_CASE("load_scene accepts float-formatted integer columns") {
  write_file("scene_float.txt", "780.0 3.0 12.5 -4.25\n");
  SceneTable t = load_scene("scene_float.txt");
  CHECK(t.rows[0].frame == 780);
  CHECK(t.rows[0].ped == 3);
  std::remove("scene_float.txt");
}

TEST_CASE("load_scene: empty file is a valid empty table") {
  write_file("scene_empty.txt", "");
  SceneTable t = load_scene("scene_empty.txt");
  CHECK(t.rows.empty());
  std::remove("scene_empty.txt");
}

TEST_CASE("load_scene errors name the line") {
  write_file("scene_bad.txt", "0 1 0.0 0.0\n10 1 1.0\n");
  CHECK_THROWS_WITH_AS(load_scene("scene_bad.txt"), doctest::Contains("line 2"), FormatError);
  std::remove("scene_bad.txt");

  write_file("scene_dup.txt", "0 1 0.0 0.0\n0 1 5.0 5.0\n");
  CHECK_THROWS_WITH_AS(load_scene("scene_dup.txt"), doctest::Contains("duplicate"), FormatError);
  std::remove("scene_dup.txt");

  CHECK_THROWS_AS(load_scene("scene_missing.txt"), IoError);
}

TEST_CASE("make_windows counts from track length") {
  auto track = [](int frames, int stride = 1) {
    SceneTable t;
    t.name = "t";
    for (int f = 0; f < frames; ++f)
      t.rows.push_back({f * stride, 1, static_cast<float>(f), 0.0f});
    return t;
  };
  CHECK(make_windows(track(20)).size() == 1);   // exactly obs+fut
  CHECK(make_windows(track(19)).size() == 0);   // one frame short
  CHECK(make_windows(track(21)).size() == 2);   // stride-1 slide

  // Decimated annotations: stride inferred from the modal gap.
  auto wins = make_windows(track(20, 10));
  CHECK(wins.size() == 1);
}

TEST_CASE("windows only span contiguous frame runs") {
  SceneTable t;
  t.name = "t";
  for (int f = 0; f < 25; ++f) {
    if (f == 10) continue;  // gap splits the track into 10 + 14 frames
    t.rows.push_back({f, 1, static_cast<float>(f), 0.0f});
  }
  CHECK(make_windows(t).empty());
}

TEST_CASE("neighbors are ordered by proximity at the last observed frame") {
  SceneTable t;
  t.name = "t";
  for (int f = 0; f < 20; ++f) {
    t.rows.push_back({f, 1, 0.0f, 0.0f});
    t.rows.push_back({f, 2, 10.0f, 0.0f});  // far
    t.rows.push_back({f, 3, 1.0f, 0.0f});   // near
  }
  auto wins = make_windows(t, 8, 12, 1, 3);
  // Window for ped 1 sees ped 3 before ped 2.
  REQUIRE(!wins.empty());
  const auto& w = wins[0];
  CHECK(w.ped_id == 1);
  REQUIRE(w.neighbor_obs.size() == 2);
  CHECK(w.neighbor_obs[0][0].x == 1.0f);
  CHECK(w.neighbor_obs[1][0].x == 10.0f);
}

TEST_CASE("project_homography: identity, global scale, translation") {
  Point p{3.5f, -2.0f};
  Homography eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Point q = project_homography(p, eye);
  CHECK(q.x == p.x);
  CHECK(q.y == p.y);

  Homography two{2, 0, 0, 0, 2, 0, 0, 0, 2};  // homogeneous scale cancels
  Point q2 = project_homography(p, two);
  CHECK(q2.x == doctest::Approx(p.x));
  CHECK(q2.y == doctest::Approx(p.y));

  Homography shift{1, 0, 4.5, 0, 1, -1.5, 0, 0, 1};
  Point q3 = project_homography(p, shift);
  CHECK(q3.x == doctest::Approx(p.x + 4.5f));
  CHECK(q3.y == doctest::Approx(p.y - 1.5f));

  Homography degenerate{1, 0, 0, 0, 1, 0, 0, 0, 0};
  CHECK_THROWS_AS(project_homography({0, 0}, degenerate), FormatError);
}

TEST_CASE("homography file loads 3x3 floats") {
  write_file("h.txt", "1 0 0\n0 1 0\n0 0 1\n");
  Homography h = load_homography("h.txt");
  CHECK(h[0] == 1.0);
  CHECK(h[8] == 1.0);
  std::remove("h.txt");

  write_file("h_bad.txt", "1 0 0\n0 1\n");
  CHECK_THROWS_AS(load_homography("h_bad.txt"), FormatError);
  std::remove("h_bad.txt");
}

TEST_CASE("leave-one-out split") {
  const std::vector<std::string> scenes{"eth", "hotel", "univ", "zara1", "zara2"};
  SceneSplit s = leave_one_out_split(scenes, "eth");
  CHECK(s.test == "eth");
  CHECK(s.train == std::vector<std::string>{"hotel", "univ", "zara1", "zara2"});

  SceneSplit single = leave_one_out_split({"only"}, "only");
  CHECK(single.train.empty());

  CHECK_THROWS_AS(leave_one_out_split(scenes, "nope"), std::invalid_argument);

  // Union of train and test partitions the scene set.
  std::vector<std::string> all = s.train;
  all.push_back(s.test);
  std::sort(all.begin(), all.end());
  std::vector<std::string> sorted = scenes;
  std::sort(sorted.begin(), sorted.end());
  CHECK(all == sorted);
}

TEST_CASE("synthetic scenes are deterministic and windowable") {
  SceneTable a = synth_scene(SynthKind::Line, 4, 0.05f, 42);
  SceneTable b = synth_scene(SynthKind::Line, 4, 0.05f, 42);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].x == b.rows[i].x);
    CHECK(a.rows[i].y == b.rows[i].y);
  }
  CHECK(!make_windows(a).empty());
}

TEST_CASE("noise-free line scene: future is exact linear extrapolation") {
  SceneTable t = synth_scene(SynthKind::Line, 3, 0.0f, 7);
  auto wins = make_windows(t);
  REQUIRE(!wins.empty());
  for (const auto& w : wins) {
    const float vx = w.obs[7].x - w.obs[6].x;
    const float vy = w.obs[7].y - w.obs[6].y;
    double ade = 0.0;
    for (int k = 0; k < 12; ++k) {
      const float ex = w.obs[7].x + vx * static_cast<float>(k + 1);
      const float ey = w.obs[7].y + vy * static_cast<float>(k + 1);
      ade += std::hypot(ex - w.fut[static_cast<size_t>(k)].x, ey - w.fut[static_cast<size_t>(k)].y);
    }
    CHECK(ade / 12.0 < 1e-4);  // perfect extrapolator scores zero ADE
  }
}

TEST_CASE("turn scene tracks have constant speed and turning angle") {
  SceneTable t = synth_scene(SynthKind::Turn, 3, 0.0f, 11);
  auto wins = make_windows(t);
  REQUIRE(!wins.empty());
  const auto& w = wins[0];
  std::vector<Point> track = w.obs;
  track.insert(track.end(), w.fut.begin(), w.fut.end());
  double first_speed = -1.0, first_turn = 1e9;
  for (size_t i = 0; i + 2 < track.size(); ++i) {
    const double dx1 = track[i + 1].x - track[i].x, dy1 = track[i + 1].y - track[i].y;
    const double dx2 = track[i + 2].x - track[i + 1].x, dy2 = track[i + 2].y - track[i + 1].y;
    const double speed = std::hypot(dx1, dy1);
    const double turn = std::atan2(dx1 * dy2 - dy1 * dx2, dx1 * dx2 + dy1 * dy2);
    if (first_speed < 0) {
      first_speed = speed;
      first_turn = turn;
    } else {
      CHECK(speed == doctest::Approx(first_speed).epsilon(1e-3));
      CHECK(turn == doctest::Approx(first_turn).epsilon(1e-3));
    }
  }
}

TEST_CASE("emitted windows advance by the dataset frame stride") {
  SceneTable t = synth_scene(SynthKind::Crossing, 4, 0.0f, 3, 26);
  CHECK(infer_frame_stride(t) == 1);
  auto wins = make_windows(t);
  CHECK(!wins.empty());
}
