#include "semhash/common.hpp"

#include <charconv>

namespace semhash {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kMalformedLine: return "MalformedLine";
    case ErrorKind::kCycleDetected: return "CycleDetected";
    case ErrorKind::kMultipleParents: return "MultipleParents";
    case ErrorKind::kMultipleRoots: return "MultipleRoots";
    case ErrorKind::kNoRoot: return "NoRoot";
    case ErrorKind::kUnknownNode: return "UnknownNode";
    case ErrorKind::kNotALeaf: return "NotALeaf";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kNonFiniteInput: return "NonFiniteInput";
    case ErrorKind::kStaleCache: return "StaleCache";
    case ErrorKind::kNonDeterministicLoss: return "NonDeterministicLoss";
    case ErrorKind::kBatchTooSmall: return "BatchTooSmall";
    case ErrorKind::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::kInvalidShapeParam: return "InvalidShapeParam";
    case ErrorKind::kEmptyTaxonomy: return "EmptyTaxonomy";
    case ErrorKind::kUnknownLabel: return "UnknownLabel";
    case ErrorKind::kMalformedFile: return "MalformedFile";
    case ErrorKind::kVersionMismatch: return "VersionMismatch";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kDivergedLoss: return "DivergedLoss";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kEmptyIndex: return "EmptyIndex";
    case ErrorKind::kKTooLarge: return "KTooLarge";
    case ErrorKind::kNoRelevantItems: return "NoRelevantItems";
    case ErrorKind::kIo: return "Io";
  }
  return "Unknown";
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace semhash
