#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace knerf {

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken caller contract (dimension mismatch, invalid argument).
class contract_error : public error {
 public:
  using error::error;
};

// Filesystem / image / manifest problems.
class io_error : public error {
 public:
  using error::error;
};

// Malformed or mismatched run configuration.
class config_error : public error {
 public:
  using error::error;
};

// Corrupt, truncated or wrong-version checkpoint.
class checkpoint_error : public error {
 public:
  using error::error;
};

// A pipeline stage was invoked without its prerequisite artifact.
class prerequisite_error : public error {
 public:
  using error::error;
};

#define KNERF_REQUIRE(cond, msg)                  \
  do {                                            \
    if (!(cond)) throw ::knerf::contract_error(msg); \
  } while (0)

}  // namespace knerf
