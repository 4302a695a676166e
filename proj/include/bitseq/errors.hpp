#pragma once

#include <stdexcept>
#include <string>

namespace bitseq {

/// Bad key/value in a run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing or unreadable file.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed content: parse failures, shape mismatches, corrupt payloads.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bitseq
