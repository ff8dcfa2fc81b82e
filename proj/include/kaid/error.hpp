#pragma once

#include <stdexcept>
#include <string>

namespace kaid {

// Bad input: malformed files, invalid configs, violated preconditions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while running a stage on otherwise valid input.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KAID_REQUIRE(cond, msg)                                   \
  do {                                                            \
    if (!(cond)) throw ::kaid::ValidationError(std::string(msg)); \
  } while (0)

}  // namespace kaid
