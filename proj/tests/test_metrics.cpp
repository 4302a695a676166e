#include <doctest.h>

#include <cmath>

#include "bitseq/metrics.hpp"
#include "test_helpers.hpp"

using namespace bitseq;

namespace {

std::vector<Point> random_traj(Rng& rng, int t) {
  std::vector<Point> out;
  for (int i = 0; i < t; ++i) out.push_back({rng.uniform(-10.0f, 10.0f), rng.uniform(-10.0f, 10.0f)});
  return out;
}

}  // namespace

TEST_CASE("min_ade pinned cases") {
  Rng rng(1);
  PredictionSet p;
  p.gt = random_traj(rng, 12);
  p.samples.push_back(p.gt);
  CHECK(min_ade(p) == doctest::Approx(0.0));

  // A single sample offset by (3,4) at every step is 5 meters off on average.
  PredictionSet q;
  q.gt = random_traj(rng, 12);
  std::vector<Point> off = q.gt;
  for (auto& pt : off) {
    pt.x += 3.0f;
    pt.y += 4.0f;
  }
  q.samples.push_back(off);
  CHECK(min_ade(q) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("min_fde pinned cases") {
  Rng rng(2);
  PredictionSet p;
  p.gt = random_traj(rng, 12);
  std::vector<Point> s = random_traj(rng, 12);  // wrong middle
  s.back() = p.gt.back();                       // perfect final point
  p.samples.push_back(s);
  CHECK(min_fde(p) == doctest::Approx(0.0));

  PredictionSet q;
  q.gt = random_traj(rng, 12);
  std::vector<Point> off = q.gt;
  off.back().y += 2.0f;
  q.samples.push_back(off);
  CHECK(min_fde(q) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("metrics equal an exhaustive per-sample oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    PredictionSet p;
    const int t = 2 + rng.uniform_int(12);
    const int k = 1 + rng.uniform_int(6);
    p.gt = random_traj(rng, t);
    for (int i = 0; i < k; ++i) p.samples.push_back(random_traj(rng, t));

    double best_ade = 1e300, best_fde = 1e300, worst_fde = 0.0;
    for (const auto& s : p.samples) {
      double sum = 0.0;
      for (int j = 0; j < t; ++j)
        sum += std::hypot(static_cast<double>(s[static_cast<size_t>(j)].x) - p.gt[static_cast<size_t>(j)].x,
                          static_cast<double>(s[static_cast<size_t>(j)].y) - p.gt[static_cast<size_t>(j)].y);
      best_ade = std::min(best_ade, sum / t);
      const double fde = std::hypot(static_cast<double>(s.back().x) - p.gt.back().x,
                                    static_cast<double>(s.back().y) - p.gt.back().y);
      best_fde = std::min(best_fde, fde);
      worst_fde = std::max(worst_fde, fde);
    }
    CHECK(min_ade(p) == doctest::Approx(best_ade).epsilon(1e-12));
    CHECK(min_fde(p) == doctest::Approx(best_fde).epsilon(1e-12));
    CHECK(min_fde(p) <= worst_fde + 1e-12);
  }
}

TEST_CASE("metrics are non-increasing in K and translation-invariant") {
  Rng rng(4);
  PredictionSet p;
  p.gt = random_traj(rng, 12);
  double prev_ade = 1e300, prev_fde = 1e300;
  for (int k = 0; k < 8; ++k) {
    p.samples.push_back(random_traj(rng, 12));
    const double a = min_ade(p), f = min_fde(p);
    CHECK(a <= prev_ade + 1e-12);
    CHECK(f <= prev_fde + 1e-12);
    prev_ade = a;
    prev_fde = f;
  }

  PredictionSet shifted = p;
  for (auto& s : shifted.samples)
    for (auto& pt : s) {
      pt.x += 11.0f;
      pt.y -= 7.0f;
    }
  for (auto& pt : shifted.gt) {
    pt.x += 11.0f;
    pt.y -= 7.0f;
  }
  CHECK(min_ade(shifted) == doctest::Approx(min_ade(p)).epsilon(1e-5));
  CHECK(min_fde(shifted) == doctest::Approx(min_fde(p)).epsilon(1e-5));
}

TEST_CASE("prediction set shape violations are rejected") {
  PredictionSet p;
  p.gt = {{0, 0}, {1, 1}};
  CHECK_THROWS_AS(min_ade(p), std::invalid_argument);  // K = 0
  p.samples.push_back({{0, 0}});                       // wrong length
  CHECK_THROWS_AS(min_fde(p), std::invalid_argument);
}

TEST_CASE("aggregate: five-scene weight-variant row averages to 0.30 ADE") {
  // Scene values from the published comparison table.
  std::vector<SceneResult> rows{
      {"eth", "weight", 0.46, 0.62, 0.0, 20},   {"hotel", "weight", 0.17, 0.27, 0.0, 20},
      {"univ", "weight", 0.42, 0.80, 0.0, 20},  {"zara1", "weight", 0.23, 0.40, 0.0, 20},
      {"zara2", "weight", 0.22, 0.39, 0.0, 20},
  };
  auto report = aggregate(rows);
  REQUIRE(report.size() == 6);
  const auto& avg = report.back().result;
  CHECK(avg.scene == "AVG");
  CHECK(avg.ade == doctest::Approx(0.30).epsilon(1e-9));
  CHECK(avg.fde == doctest::Approx(0.496).epsilon(1e-9));
}

TEST_CASE("aggregate: identical method and baseline give zero deltas") {
  std::vector<SceneResult> rows{{"a", "m", 0.5, 0.7, 0.0, 20}, {"b", "m", 0.3, 0.4, 0.0, 20}};
  auto report = aggregate(rows, rows);
  for (const auto& r : report) {
    REQUIRE(r.delta_ade.has_value());
    CHECK(*r.delta_ade == doctest::Approx(0.0));
    CHECK(*r.delta_fde == doctest::Approx(0.0));
  }
}

TEST_CASE("aggregate: single scene AVG equals that scene") {
  std::vector<SceneResult> rows{{"solo", "m", 0.42, 0.57, 0.1, 20}};
  auto report = aggregate(rows);
  REQUIRE(report.size() == 2);
  CHECK(report[1].result.ade == doctest::Approx(0.42));
  CHECK(report[1].result.fde == doctest::Approx(0.57));
}

TEST_CASE("csv round trip keeps scene rows") {
  std::vector<SceneResult> rows{{"eth", "weight", 0.46, 0.62, 0.05, 20},
                                {"hotel", "weight", 0.17, 0.27, 0.0, 20}};
  const std::string csv = report_to_csv(aggregate(rows));
  auto parsed = scene_results_from_csv(csv);
  REQUIRE(parsed.size() == 2);  // AVG row is derived, not parsed back
  CHECK(parsed[0].scene == "eth");
  CHECK(parsed[0].ade == doctest::Approx(0.46));
  CHECK(parsed[1].failure_rate == doctest::Approx(0.0));
}
