#include "bitseq/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bitseq/errors.hpp"

namespace bitseq {

namespace {

void validate(const PredictionSet& pred) {
  if (pred.samples.empty()) throw std::invalid_argument("prediction set: K must be >= 1");
  if (pred.gt.empty()) throw std::invalid_argument("prediction set: empty ground truth");
  for (const auto& s : pred.samples)
    if (s.size() != pred.gt.size())
      throw std::invalid_argument("prediction set: sample length " + std::to_string(s.size()) +
                                  " differs from ground truth " + std::to_string(pred.gt.size()));
}

double dist(Point a, Point b) {
  const double dx = static_cast<double>(a.x) - b.x;
  const double dy = static_cast<double>(a.y) - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double min_ade(const PredictionSet& pred) {
  validate(pred);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : pred.samples) {
    double sum = 0.0;
    for (size_t t = 0; t < s.size(); ++t) sum += dist(s[t], pred.gt[t]);
    best = std::min(best, sum / static_cast<double>(s.size()));
  }
  return best;
}

double min_fde(const PredictionSet& pred) {
  validate(pred);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : pred.samples) best = std::min(best, dist(s.back(), pred.gt.back()));
  return best;
}

std::vector<ReportRow> aggregate(const std::vector<SceneResult>& results,
                                 const std::vector<SceneResult>& baseline) {
  auto find_base = [&](const std::string& scene) -> const SceneResult* {
    for (const auto& b : baseline)
      if (b.scene == scene) return &b;
    return nullptr;
  };

  std::vector<ReportRow> rows;
  SceneResult avg;
  avg.scene = "AVG";
  SceneResult base_avg;
  int base_n = 0;
  for (const auto& r : results) {
    ReportRow row;
    row.result = r;
    if (const auto* b = find_base(r.scene)) {
      row.delta_ade = r.ade - b->ade;
      row.delta_fde = r.fde - b->fde;
      base_avg.ade += b->ade;
      base_avg.fde += b->fde;
      ++base_n;
    }
    avg.variant = r.variant;
    avg.ade += r.ade;
    avg.fde += r.fde;
    avg.failure_rate += r.failure_rate;
    avg.samples = r.samples;
    rows.push_back(std::move(row));
  }
  if (!results.empty()) {
    const double n = static_cast<double>(results.size());
    avg.ade /= n;
    avg.fde /= n;
    avg.failure_rate /= n;
    ReportRow row;
    row.result = avg;
    if (base_n == static_cast<int>(results.size()) && base_n > 0) {
      row.delta_ade = avg.ade - base_avg.ade / base_n;
      row.delta_fde = avg.fde - base_avg.fde / base_n;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_to_csv(const std::vector<ReportRow>& rows) {
  bool with_delta = false;
  for (const auto& r : rows) with_delta = with_delta || r.delta_ade.has_value();
  std::ostringstream os;
  os << "scene,variant,ADE,FDE,failure_rate,samples";
  if (with_delta) os << ",delta_ADE,delta_FDE";
  os << "\n";
  os.setf(std::ios::fixed);
  os.precision(6);
  for (const auto& r : rows) {
    os << r.result.scene << "," << r.result.variant << "," << r.result.ade << "," << r.result.fde
       << "," << r.result.failure_rate << "," << r.result.samples;
    if (with_delta) {
      if (r.delta_ade)
        os << "," << *r.delta_ade << "," << *r.delta_fde;
      else
        os << ",,";
    }
    os << "\n";
  }
  return os.str();
}

std::vector<SceneResult> scene_results_from_csv(const std::string& csv_text) {
  std::istringstream is(csv_text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("results csv: empty");
  std::vector<SceneResult> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() < 6) throw FormatError("results csv: expected >= 6 fields: " + line);
    if (f[0] == "AVG") continue;  // derived row
    SceneResult r;
    r.scene = f[0];
    r.variant = f[1];
    r.ade = std::stod(f[2]);
    r.fde = std::stod(f[3]);
    r.failure_rate = std::stod(f[4]);
    r.samples = std::stoi(f[5]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace bitseq
