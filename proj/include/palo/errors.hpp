#pragma once

#include <stdexcept>

namespace palo {

// Bad inputs on disk or over the wire (malformed files, schema mismatches).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad command-line / config usage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Remote language-model backend failed after retries.
struct RemoteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace palo
