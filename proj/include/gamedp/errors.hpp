#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gamedp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user input: bad parameter values, malformed config/JSON.
// Messages name the offending field.
struct ConfigError : Error {
  using Error::Error;
};

// The n-step discretization admits no valid branch probabilities at this n.
struct StepTooCoarse : Error {
  int min_valid_n;
  StepTooCoarse(const std::string& msg, int min_valid)
      : Error(msg), min_valid_n(min_valid) {}
};

// A lattice violates a structural invariant; message names the node.
struct MalformedLattice : Error {
  using Error::Error;
};

// Exact engine refused the request (step count or state budget).
struct ExactCapExceeded : Error {
  using Error::Error;
};

// Quantized engine state count exceeded the configured budget.
struct GridOverflow : Error {
  std::uint64_t state_count;
  GridOverflow(const std::string& msg, std::uint64_t count)
      : Error(msg), state_count(count) {}
};

struct EnumerationCapExceeded : Error {
  using Error::Error;
};

struct InsufficientRows : Error {
  using Error::Error;
};

}  // namespace gamedp
