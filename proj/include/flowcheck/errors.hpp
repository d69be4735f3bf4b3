#pragma once

#include <stdexcept>
#include <string>

namespace flowcheck {

// API misuse: shape mismatches, unmet preconditions that indicate a caller bug.
class ContractError : public std::logic_error {
public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Invalid run configuration (bad B/level combinations, malformed files, ...).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Maximum-likelihood training produced a non-finite loss.
class TrainingDivergence : public std::runtime_error {
public:
  TrainingDivergence(int epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

private:
  int epoch_;
};

}  // namespace flowcheck
