#pragma once

#include <stdexcept>
#include <string>

namespace ganaug {

// Every failure the library can raise, named. The category drives the CLI
// exit code (config -> 2, data -> 3, numeric -> 4).
enum class ErrorKind {
  // tensor / autodiff
  InvalidShape,
  IncompatibleShapes,
  AxisOutOfRange,
  NonScalarLoss,
  DetachedTensor,
  // layers / networks
  ChannelMismatch,
  OutputTooSmall,
  SingleElementBatch,
  ShapeMismatch,
  InvalidConfig,
  IndivisibleInputSize,
  // losses / optimizer
  LabelOutOfRange,
  NonFiniteGradient,
  NonFiniteLoss,
  // metrics
  DimensionMismatch,
  DegenerateClass,
  EmptyClass,
  // data io
  MissingClassDir,
  NoImages,
  UndecodableImage,
  UnsupportedFormat,
  CorruptFile,
  EmptyDataset,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  // cli config
  UnknownConfigKey,
  BadConfigValue,
  IoError,
};

enum class ErrorCategory { Config, Data, Numeric, Internal };

inline ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::UnknownConfigKey:
    case ErrorKind::BadConfigValue:
    case ErrorKind::BadMagic:
    case ErrorKind::VersionMismatch:
    case ErrorKind::TruncatedFile:
      return ErrorCategory::Config;
    case ErrorKind::MissingClassDir:
    case ErrorKind::NoImages:
    case ErrorKind::UndecodableImage:
    case ErrorKind::UnsupportedFormat:
    case ErrorKind::CorruptFile:
    case ErrorKind::EmptyDataset:
    case ErrorKind::EmptyClass:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::DegenerateClass:
    case ErrorKind::LabelOutOfRange:
    case ErrorKind::IoError:
      return ErrorCategory::Data;
    case ErrorKind::NonFiniteGradient:
    case ErrorKind::NonFiniteLoss:
      return ErrorCategory::Numeric;
    default:
      return ErrorCategory::Internal;
  }
}

inline const char* name_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::IncompatibleShapes: return "IncompatibleShapes";
    case ErrorKind::AxisOutOfRange: return "AxisOutOfRange";
    case ErrorKind::NonScalarLoss: return "NonScalarLoss";
    case ErrorKind::DetachedTensor: return "DetachedTensor";
    case ErrorKind::ChannelMismatch: return "ChannelMismatch";
    case ErrorKind::OutputTooSmall: return "OutputTooSmall";
    case ErrorKind::SingleElementBatch: return "SingleElementBatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::IndivisibleInputSize: return "IndivisibleInputSize";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateClass: return "DegenerateClass";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::MissingClassDir: return "MissingClassDir";
    case ErrorKind::NoImages: return "NoImages";
    case ErrorKind::UndecodableImage: return "UndecodableImage";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::CorruptFile: return "CorruptFile";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::UnknownConfigKey: return "UnknownConfigKey";
    case ErrorKind::BadConfigValue: return "BadConfigValue";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(name_of(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  ErrorCategory category() const { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) raise(kind, message);
}

}  // namespace ganaug
