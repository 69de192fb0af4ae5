#pragma once

#include <stdexcept>
#include <string>

namespace ampere {

// Bad input data: malformed files, violated invariants, missing payloads.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed arguments outside an operation's contract.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ampere
