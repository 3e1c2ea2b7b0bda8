#pragma once

#include <stdexcept>

namespace sbn {

// File/format problems: missing files, malformed headers, truncated payloads.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data that parses but violates an invariant (manifest rules, spec shapes).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sbn
