#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bitseq/trajdata.hpp"

namespace bitseq {

/// K sampled trajectories against one ground truth, all of length T.
struct PredictionSet {
  std::vector<std::vector<Point>> samples;
  std::vector<Point> gt;
};

/// Best-of-K mean Euclidean displacement over the horizon.
double min_ade(const PredictionSet& pred);

/// Best-of-K final-step Euclidean displacement.
double min_fde(const PredictionSet& pred);

struct SceneResult {
  std::string scene;
  std::string variant;
  double ade = 0.0;
  double fde = 0.0;
  double failure_rate = 0.0;  // windows scored by the constant-position fallback
  int samples = 0;            // K
};

struct ReportRow {
  SceneResult result;
  std::optional<double> delta_ade;  // method - baseline, when a baseline exists
  std::optional<double> delta_fde;
};

/// Per-scene rows plus an unweighted AVG row; deltas are filled against a
/// baseline matched by scene name (AVG against the baseline mean).
std::vector<ReportRow> aggregate(const std::vector<SceneResult>& results,
                                 const std::vector<SceneResult>& baseline = {});

/// CSV with header: scene,variant,ADE,FDE,failure_rate,samples[,delta_ADE,delta_FDE]
std::string report_to_csv(const std::vector<ReportRow>& rows);

std::vector<SceneResult> scene_results_from_csv(const std::string& csv_text);

}  // namespace bitseq
