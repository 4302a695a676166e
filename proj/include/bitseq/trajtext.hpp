#pragma once

#include <string>
#include <variant>
#include <vector>

#include "bitseq/trajdata.hpp"

namespace bitseq {

/// Structured reason for an unusable generated answer. Parsing never throws
/// on arbitrary bytes; it reports instead.
struct DecodeFailure {
  enum class Reason { TruncatedPair, NonNumeric, LengthOverflow };
  Reason reason;
  std::string detail;
};

const char* to_string(DecodeFailure::Reason r);

using ParsedAnswer = std::variant<std::vector<Point>, DecodeFailure>;

struct SerializeOptions {
  int precision = 2;       // decimals in scene pixel space
  int max_neighbors = 3;   // neighbors actually emitted
  int fut_len = 12;        // horizon named in the question
};

/// Question/context serialization, grammar v1 (see docs):
///   "q: predict <fut_len> steps for agent 0 . c: a0: x,y x,y ... a1: ..."
/// Agent 0 is the window's own track; neighbors follow in proximity order.
std::string serialize_window(const TrajectoryWindow& window, const SerializeOptions& opts = {});

/// Space-separated "x,y" pairs at the chosen precision; empty list gives "".
std::string serialize_answer(const std::vector<Point>& points, int precision = 2);

/// Parses "x,y x,y ...". Returns the points, or a DecodeFailure for a
/// truncated pair, a non-numeric token, or more than max_pairs pairs (the
/// runaway-generation guard). Empty input parses to an empty list.
ParsedAnswer parse_answer(const std::string& text, std::size_t max_pairs = 256);

}  // namespace bitseq
