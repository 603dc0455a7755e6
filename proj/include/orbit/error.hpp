#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orbit {

enum class ErrorCode {
  // core-model
  MalformedJson,
  SchemaViolation,
  // seed-harvest
  MissingFile,
  MalformedCatalog,
  CategoryNotFound,
  ApiError,
  RateLimited,
  // llm-gateway
  UnknownTemplate,
  UnboundPlaceholder,
  ProviderTimeout,
  ProviderRefusal,
  ProviderError,
  ScenarioExhausted,
  UnmatchedRequest,
  // genesis
  MissingSection,
  NoOutputBlock,
  UnparseableCite,
  UnparseableEvidenceEntry,
  // verification
  EmptyReport,
  UnparseableVerdict,
  PreconditionViolation,
  NoLiveEvidence,
  // webtext
  Timeout,
  TooLarge,
  RobotsDisallowed,
  HttpError,
  DnsFailure,
  NotHtml,
  TooManyRedirects,
  // metasearch
  AllBackendsFailed,
  EmptyQuery,
  ReplayMiss,
  // evalbench / datastats
  PoolTooSmall,
  InvalidUrl,
  UnparseableType,
  UnparseableList,
  // plumbing
  IoError,
  ConfigError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `detail()` carries the offending
/// field, index, status or payload named by the error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, std::string detail = {});

}  // namespace orbit
