#include "bitseq/trajtext.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace bitseq {

const char* to_string(DecodeFailure::Reason r) {
  switch (r) {
    case DecodeFailure::Reason::TruncatedPair: return "truncated pair";
    case DecodeFailure::Reason::NonNumeric: return "non-numeric token";
    case DecodeFailure::Reason::LengthOverflow: return "length overflow";
  }
  return "?";
}

namespace {

std::string fixed(float v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, static_cast<double>(v));
  return buf;
}

void append_points(std::string& out, const std::vector<Point>& pts, int precision) {
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ' ';
    out += fixed(pts[i].x, precision);
    out += ',';
    out += fixed(pts[i].y, precision);
  }
}

bool parse_float(const std::string& tok, float& out) {
  if (tok.empty()) return false;
  char* end = nullptr;
  out = std::strtof(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && std::isfinite(out);
}

}  // namespace

std::string serialize_window(const TrajectoryWindow& window, const SerializeOptions& opts) {
  std::string out = "q: predict " + std::to_string(opts.fut_len) + " steps for agent 0 . c: a0:";
  out += ' ';
  append_points(out, window.obs, opts.precision);
  int idx = 1;
  for (const auto& track : window.neighbor_obs) {
    if (idx > opts.max_neighbors) break;
    out += " a" + std::to_string(idx) + ": ";
    append_points(out, track, opts.precision);
    ++idx;
  }
  return out;
}

std::string serialize_answer(const std::vector<Point>& points, int precision) {
  std::string out;
  append_points(out, points, precision);
  return out;
}

ParsedAnswer parse_answer(const std::string& text, std::size_t max_pairs) {
  std::vector<Point> points;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) {
    if (points.size() >= max_pairs)
      return DecodeFailure{DecodeFailure::Reason::LengthOverflow,
                           "more than " + std::to_string(max_pairs) + " pairs"};
    const auto comma = tok.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= tok.size())
      return DecodeFailure{DecodeFailure::Reason::TruncatedPair, "token '" + tok + "'"};
    if (tok.find(',', comma + 1) != std::string::npos)
      return DecodeFailure{DecodeFailure::Reason::TruncatedPair, "token '" + tok + "'"};
    Point p;
    if (!parse_float(tok.substr(0, comma), p.x) || !parse_float(tok.substr(comma + 1), p.y))
      return DecodeFailure{DecodeFailure::Reason::NonNumeric, "token '" + tok + "'"};
    points.push_back(p);
  }
  return points;
}

}  // namespace bitseq
