#include "figo/error.hpp"

namespace figo {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::BadDimensions: return "BadDimensions";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyCatalog: return "EmptyCatalog";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::FieldShapeMismatch: return "FieldShapeMismatch";
    case ErrorCode::BadResolution: return "BadResolution";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::TooFewIdentities: return "TooFewIdentities";
    case ErrorCode::DegeneratePairs: return "DegeneratePairs";
    case ErrorCode::EmptyGallery: return "EmptyGallery";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::EmptyProbeSet: return "EmptyProbeSet";
    case ErrorCode::ConfigNotFound: return "ConfigNotFound";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace figo
