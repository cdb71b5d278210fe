#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace edl {

/// Failure categories raised across the library. Every thrown edl::Error
/// carries exactly one of these.
enum class Errc {
  // domain
  UnknownLabel,
  InvalidGrade,
  InvalidRubric,
  MismatchedKeyCount,
  EmptyPackage,
  EmptyPackageId,
  EmptyAnswerKey,
  DuplicateQuestionId,
  // loop engine
  WrongPhase,
  AnswerCountMismatch,
  MissingSelfReflection,
  UnauthorizedActor,
  ProviderFailure,
  UnknownSession,
  UnknownPackage,
  DuplicatePackage,
  VersionConflict,
  MalformedEvent,
  // grading intake
  CountMismatch,
  // analytics
  EmptySelection,
  AllZeroDifferences,
  DegenerateInput,
  LengthMismatch,
  SampleTooLarge,
  DuplicateRecord,
  // store
  SequenceGap,
  StorageFailure,
  ChecksumMismatch,
  MalformedHeader,
  MalformedRow,
  IOFailure,
  // service
  ConfigError,
  BindFailure,
  Unauthenticated,
  BadRequest,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::InvalidGrade: return "InvalidGrade";
    case Errc::InvalidRubric: return "InvalidRubric";
    case Errc::MismatchedKeyCount: return "MismatchedKeyCount";
    case Errc::EmptyPackage: return "EmptyPackage";
    case Errc::EmptyPackageId: return "EmptyPackageId";
    case Errc::EmptyAnswerKey: return "EmptyAnswerKey";
    case Errc::DuplicateQuestionId: return "DuplicateQuestionId";
    case Errc::WrongPhase: return "WrongPhase";
    case Errc::AnswerCountMismatch: return "AnswerCountMismatch";
    case Errc::MissingSelfReflection: return "MissingSelfReflection";
    case Errc::UnauthorizedActor: return "UnauthorizedActor";
    case Errc::ProviderFailure: return "ProviderFailure";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::UnknownPackage: return "UnknownPackage";
    case Errc::DuplicatePackage: return "DuplicatePackage";
    case Errc::VersionConflict: return "VersionConflict";
    case Errc::MalformedEvent: return "MalformedEvent";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::EmptySelection: return "EmptySelection";
    case Errc::AllZeroDifferences: return "AllZeroDifferences";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::SampleTooLarge: return "SampleTooLarge";
    case Errc::DuplicateRecord: return "DuplicateRecord";
    case Errc::SequenceGap: return "SequenceGap";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::IOFailure: return "IOFailure";
    case Errc::ConfigError: return "ConfigError";
    case Errc::BindFailure: return "BindFailure";
    case Errc::Unauthenticated: return "Unauthenticated";
    case Errc::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace edl
