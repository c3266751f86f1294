#pragma once

#include <stdexcept>
#include <string>

namespace impulse {

// Invalid or inconsistent configuration values.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or size mismatch between data objects.
struct structural_error : std::runtime_error {
  explicit structural_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Degenerate numeric input (zero variance, all-zero taps, ...).
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Not enough data to form an estimate.
struct estimation_error : std::runtime_error {
  explicit estimation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed text input (config files, event streams).
struct parse_error : std::runtime_error {
  explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged or failed.
struct training_error : std::runtime_error {
  explicit training_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace impulse
