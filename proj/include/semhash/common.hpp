#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace semhash {

/// Row-major dense matrix; rows are samples throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  kEmptyInput,
  kMalformedLine,
  kCycleDetected,
  kMultipleParents,
  kMultipleRoots,
  kNoRoot,
  kUnknownNode,
  kNotALeaf,
  kShapeMismatch,
  kNonFiniteInput,
  kStaleCache,
  kNonDeterministicLoss,
  kBatchTooSmall,
  kLabelOutOfRange,
  kInvalidShapeParam,
  kEmptyTaxonomy,
  kUnknownLabel,
  kMalformedFile,
  kVersionMismatch,
  kInvalidConfig,
  kDivergedLoss,
  kLengthMismatch,
  kEmptyIndex,
  kKTooLarge,
  kNoRelevantItems,
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Selects the serial reference path or the OpenMP path of a kernel. Both
/// paths produce bit-identical results.
enum class ExecPolicy { kSerial, kParallel };

}  // namespace semhash
