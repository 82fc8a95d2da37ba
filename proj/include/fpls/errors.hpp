#pragma once

#include <stdexcept>

namespace fpls {

// Error families map onto CLI exit codes: ConfigError -> 2, DataError -> 3,
// EstimationError -> 4. Everything thrown by the library derives from one of
// these three.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data-stage specializations.
struct ParseError : DataError {
  using DataError::DataError;
};
struct SchemaError : DataError {
  using DataError::DataError;
};
struct EmptyDataError : DataError {
  using DataError::DataError;
};
struct DegenerateColumnError : DataError {
  using DataError::DataError;
};
struct ShapeError : DataError {
  using DataError::DataError;
};

// Estimation-stage specializations.
struct SplitInfeasibleError : EstimationError {
  using EstimationError::EstimationError;
};
struct RankDeficiencyError : EstimationError {
  using EstimationError::EstimationError;
};
struct ConvergenceError : EstimationError {
  using EstimationError::EstimationError;
};
struct TreeDegenerateError : EstimationError {
  using EstimationError::EstimationError;
};
struct PointMassError : EstimationError {
  using EstimationError::EstimationError;
};

}  // namespace fpls
