#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace p910 {

enum class ErrorCode {
  // qualification
  UnknownPlate,
  NonPositiveWidth,
  NonPositiveInput,
  EmptyTrials,
  TooManyTrials,
  WrongArity,
  // testprep
  NoCandidates,
  NoMessages,
  InsufficientClips,
  InsufficientGoldOrTrapping,
  EmptySecret,
  MalformedToken,
  EmptyPlanSet,
  ConfigInvalid,
  // service
  WorkerDisqualified,
  DuplicateSubmission,
  IncompleteSubmission,
  StorageFailure,
  UnknownTest,
  UnknownPlan,
  NoPlanAvailable,
  // cleansing
  MissingGoldVote,
  MissingTrappingVote,
  MissingTelemetry,
  TooFewVotes,
  MissingAnswers,
  // statistics
  NoVotes,
  NoReferenceVotes,
  UnmappedSequence,
  LengthMismatch,
  ZeroVariance,
  DegenerateFit,
  DegenerateR,
  TooFewSamples,
  EmptyVotes,
  MissingReference,
  Misaligned,
  // io / cli
  MalformedInput,
  ConfigMismatch,
  UnknownLevel,
  IoFailure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownPlate: return "UnknownPlate";
    case ErrorCode::NonPositiveWidth: return "NonPositiveWidth";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::EmptyTrials: return "EmptyTrials";
    case ErrorCode::TooManyTrials: return "TooManyTrials";
    case ErrorCode::WrongArity: return "WrongArity";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::NoMessages: return "NoMessages";
    case ErrorCode::InsufficientClips: return "InsufficientClips";
    case ErrorCode::InsufficientGoldOrTrapping: return "InsufficientGoldOrTrapping";
    case ErrorCode::EmptySecret: return "EmptySecret";
    case ErrorCode::MalformedToken: return "MalformedToken";
    case ErrorCode::EmptyPlanSet: return "EmptyPlanSet";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::WorkerDisqualified: return "WorkerDisqualified";
    case ErrorCode::DuplicateSubmission: return "DuplicateSubmission";
    case ErrorCode::IncompleteSubmission: return "IncompleteSubmission";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::UnknownTest: return "UnknownTest";
    case ErrorCode::UnknownPlan: return "UnknownPlan";
    case ErrorCode::NoPlanAvailable: return "NoPlanAvailable";
    case ErrorCode::MissingGoldVote: return "MissingGoldVote";
    case ErrorCode::MissingTrappingVote: return "MissingTrappingVote";
    case ErrorCode::MissingTelemetry: return "MissingTelemetry";
    case ErrorCode::TooFewVotes: return "TooFewVotes";
    case ErrorCode::MissingAnswers: return "MissingAnswers";
    case ErrorCode::NoVotes: return "NoVotes";
    case ErrorCode::NoReferenceVotes: return "NoReferenceVotes";
    case ErrorCode::UnmappedSequence: return "UnmappedSequence";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::DegenerateR: return "DegenerateR";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::EmptyVotes: return "EmptyVotes";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::Misaligned: return "Misaligned";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI, the HTTP layer) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
        code_(code) {}
  explicit Error(ErrorCode code) : Error(code, "") {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace p910
