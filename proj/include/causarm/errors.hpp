#pragma once

#include <stdexcept>
#include <string>

namespace causarm {

// Error taxonomy. The CLI maps each family to a distinct exit code
// (config=2, data=3, training=4, attribution=5), so new error types
// should derive from one of the four family roots below.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AttributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected call argument: dimension mismatch, out-of-range index, invalid flag.
class InvalidInput : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// File exists but does not parse or fails a consistency check.
class MalformedFile : public DataError {
 public:
  MalformedFile(const std::string& what, long row = -1)
      : DataError(row >= 0 ? what + " (row " + std::to_string(row) + ")" : what),
        row_(row) {}
  long row() const { return row_; }

 private:
  long row_;
};

// Reach solver gave up; the caller may re-seed and retry.
class UnreachableTarget : public DataError {
 public:
  using DataError::DataError;
};

// Loss or gradient became non-finite during optimization.
class TrainingDiverged : public TrainingError {
 public:
  TrainingDiverged(const std::string& what, long epoch = -1)
      : TrainingError(epoch >= 0 ? what + " (epoch " + std::to_string(epoch) + ")"
                                 : what),
        epoch_(epoch) {}
  long epoch() const { return epoch_; }

 private:
  long epoch_;
};

class EnumerationTooLarge : public AttributionError {
 public:
  using AttributionError::AttributionError;
};

class DegenerateCoalitions : public AttributionError {
 public:
  using AttributionError::AttributionError;
};

}  // namespace causarm
