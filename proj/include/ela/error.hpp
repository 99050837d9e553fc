#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ela {

enum class ErrorCode {
  InvalidArgument,
  UnsupportedFormat,
  CorruptFile,
  ImageTooSmall,
  EncodeFailure,
  Io,
  Parse,
  MissingDirectory,
  EmptyCorpus,
  TooFewExamples,
  RectOutOfBounds,
  ShapeMismatch,
  StaleCache,
  DivergedLoss,
  EmptyPredictionSet,
  SingleClassOnly,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::EncodeFailure: return "EncodeFailure";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::MissingDirectory: return "MissingDirectory";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::TooFewExamples: return "TooFewExamples";
    case ErrorCode::RectOutOfBounds: return "RectOutOfBounds";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::EmptyPredictionSet: return "EmptyPredictionSet";
    case ErrorCode::SingleClassOnly: return "SingleClassOnly";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace ela
