#pragma once

#include <stdexcept>
#include <string>

namespace s3ap {

// Base for everything thrown by this library.
struct S3apError : std::runtime_error {
  explicit S3apError(const std::string& what) : std::runtime_error(what) {}
};

// core: tag grammar and trajectory bookkeeping
struct MalformedTagError : S3apError {
  using S3apError::S3apError;
};
struct TagAtOriginError : S3apError {
  using S3apError::S3apError;
};
struct UnknownAgentIndexError : S3apError {
  using S3apError::S3apError;
};
struct UnknownAgentError : S3apError {
  using S3apError::S3apError;
};
struct AgentSetMismatchError : S3apError {
  using S3apError::S3apError;
};
struct BoundsError : S3apError {
  using S3apError::S3apError;
};

// schema
struct EncodeError : S3apError {
  using S3apError::S3apError;
};

// llm backend
struct BackendError : S3apError {
  enum class Kind { Auth, RateLimited, Transport, BadResponse };
  Kind kind;
  BackendError(Kind k, const std::string& what) : S3apError(what), kind(k) {}
};
struct ScriptExhaustedError : S3apError {
  using S3apError::S3apError;
};
struct CacheIoError : S3apError {
  using S3apError::S3apError;
};

// oracle
struct InvalidEventError : S3apError {
  using S3apError::S3apError;
};
struct UnknownEntityError : S3apError {
  using S3apError::S3apError;
};
struct InfeasibleParamsError : S3apError {
  using S3apError::S3apError;
};

// parser
struct TemplateMismatchError : S3apError {
  using S3apError::S3apError;
};

// swm
struct PredictionDecodeError : S3apError {
  using S3apError::S3apError;
};

// agent / toy environments
struct ActionDecodeError : S3apError {
  using S3apError::S3apError;
};
struct EnvRuleError : S3apError {
  using S3apError::S3apError;
};

// bench
struct DatasetFormatError : S3apError {
  DatasetFormatError(const std::string& what, int line)
      : S3apError("line " + std::to_string(line) + ": " + what), line(line) {}
  int line;
};
struct MissingGroupError : S3apError {
  using S3apError::S3apError;
};

}  // namespace s3ap
