#include "orbit/error.hpp"

namespace orbit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedCatalog: return "MalformedCatalog";
    case ErrorCode::CategoryNotFound: return "CategoryNotFound";
    case ErrorCode::ApiError: return "ApiError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::ProviderTimeout: return "ProviderTimeout";
    case ErrorCode::ProviderRefusal: return "ProviderRefusal";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::ScenarioExhausted: return "ScenarioExhausted";
    case ErrorCode::UnmatchedRequest: return "UnmatchedRequest";
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::NoOutputBlock: return "NoOutputBlock";
    case ErrorCode::UnparseableCite: return "UnparseableCite";
    case ErrorCode::UnparseableEvidenceEntry: return "UnparseableEvidenceEntry";
    case ErrorCode::EmptyReport: return "EmptyReport";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::NoLiveEvidence: return "NoLiveEvidence";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::RobotsDisallowed: return "RobotsDisallowed";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::DnsFailure: return "DnsFailure";
    case ErrorCode::NotHtml: return "NotHtml";
    case ErrorCode::TooManyRedirects: return "TooManyRedirects";
    case ErrorCode::AllBackendsFailed: return "AllBackendsFailed";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::InvalidUrl: return "InvalidUrl";
    case ErrorCode::UnparseableType: return "UnparseableType";
    case ErrorCode::UnparseableList: return "UnparseableList";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {
std::string compose(ErrorCode code, const std::string& detail) {
  std::string msg(to_string(code));
  if (!detail.empty()) msg += "(" + detail + ")";
  return msg;
}
}  // namespace

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(compose(code, detail)), code_(code), detail_(std::move(detail)) {}

void fail(ErrorCode code, std::string detail) { throw Error(code, std::move(detail)); }

}  // namespace orbit
