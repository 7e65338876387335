#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace figo {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  CorruptHeader,
  BadDimensions,
  ParseError,
  EmptyCatalog,
  TooFewSubjects,
  KindMismatch,
  ImageTooSmall,
  FieldShapeMismatch,
  BadResolution,
  NonFiniteLoss,
  ShapeMismatch,
  ResolutionMismatch,
  VersionMismatch,
  CorruptCheckpoint,
  TooFewIdentities,
  DegeneratePairs,
  EmptyGallery,
  MissingCheckpoint,
  EmptyProbeSet,
  ConfigNotFound,
  SchemaViolation,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every domain failure in the library surfaces as this exception; the CLI maps
// it to exit code 1 plus a JSON error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace figo
