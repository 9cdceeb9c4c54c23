#pragma once

#include <stdexcept>
#include <string>

namespace refmap {

enum class ErrorCode {
  DegenerateInput,
  InsufficientPoints,
  ParseError,
  ShapeError,
  IoError,
  DegenerateNormals,
  RankDeficient,
  NoValidModel,
  SingularNormalEquations,
  MissingPose,
  ConfigError,
};

const char* to_string(ErrorCode code);

/// Every module reports failures through this one exception type; callers
/// that need to branch on the failure inspect code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace refmap
