#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace latefit {

enum class ErrorKind {
  EmptyDocument,
  UnknownSectionType,
  EmptyUtterance,
  DimensionMismatch,
  MissingCategoricalRow,
  BadMagic,
  DimMismatch,
  TruncatedFile,
  EmptySequence,
  NonFiniteLogit,
  LengthMismatch,
  EmptyDistribution,
  CacheMiss,
  EmptyBatch,
  NoValidPairs,
  DegenerateProject,
  InsufficientProjects,
  NonFiniteLoss,
  EmptyDataset,
  UnknownSliceKey,
  ForeignSkill,
  ExhaustedSampler,
  MalformedRecord,
  BadCheckpoint,
  Io,
  Usage,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyDocument: return "EmptyDocument";
    case ErrorKind::UnknownSectionType: return "UnknownSectionType";
    case ErrorKind::EmptyUtterance: return "EmptyUtterance";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MissingCategoricalRow: return "MissingCategoricalRow";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::NonFiniteLogit: return "NonFiniteLogit";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyDistribution: return "EmptyDistribution";
    case ErrorKind::CacheMiss: return "CacheMiss";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::NoValidPairs: return "NoValidPairs";
    case ErrorKind::DegenerateProject: return "DegenerateProject";
    case ErrorKind::InsufficientProjects: return "InsufficientProjects";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::UnknownSliceKey: return "UnknownSliceKey";
    case ErrorKind::ForeignSkill: return "ForeignSkill";
    case ErrorKind::ExhaustedSampler: return "ExhaustedSampler";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

/// Single exception type for the library; `kind()` lets callers branch
/// without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace latefit
