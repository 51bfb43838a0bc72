#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace maskverify {

// Base of every domain error. `kind()` is a stable machine-readable tag that
// the CLI prints in its structured error output.
class Error : public std::runtime_error {
  public:
    Error(std::string kind, const std::string & message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string & kind() const noexcept { return kind_; }

  private:
    std::string kind_;
};

#define MASKVERIFY_DEFINE_ERROR(Name)                                                   \
    class Name : public Error {                                                         \
      public:                                                                           \
        explicit Name(const std::string & message) : Error(#Name, message) {}           \
    };

MASKVERIFY_DEFINE_ERROR(InvalidSpec)
MASKVERIFY_DEFINE_ERROR(InvalidScene)
MASKVERIFY_DEFINE_ERROR(InfeasibleSpec)
MASKVERIFY_DEFINE_ERROR(IncompleteGrid)
MASKVERIFY_DEFINE_ERROR(InvalidGrid)
MASKVERIFY_DEFINE_ERROR(BadEta)
MASKVERIFY_DEFINE_ERROR(BadStep)
MASKVERIFY_DEFINE_ERROR(LengthMismatch)
MASKVERIFY_DEFINE_ERROR(EmptyDecomposition)
MASKVERIFY_DEFINE_ERROR(MissingVerdicts)
MASKVERIFY_DEFINE_ERROR(NonFinite)
MASKVERIFY_DEFINE_ERROR(InvalidArgument)
MASKVERIFY_DEFINE_ERROR(IoFailure)
MASKVERIFY_DEFINE_ERROR(SchemaError)

#undef MASKVERIFY_DEFINE_ERROR

// Prompt text outside the closed template grammar. `offset` is the byte offset
// of the first token that could not be consumed.
class UnparsablePrompt : public Error {
  public:
    UnparsablePrompt(std::size_t offset, const std::string & reason)
        : Error("UnparsablePrompt", "unparsable prompt at byte " + std::to_string(offset) + ": " + reason),
          offset_(offset),
          reason_(reason) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string & reason() const noexcept { return reason_; }

  private:
    std::size_t offset_;
    std::string reason_;
};

class MalformedTranscript : public Error {
  public:
    MalformedTranscript(std::size_t position, const std::string & reason)
        : Error("MalformedTranscript", "malformed transcript at byte " + std::to_string(position) + ": " + reason),
          position_(position),
          reason_(reason) {}

    std::size_t position() const noexcept { return position_; }
    const std::string & reason() const noexcept { return reason_; }

  private:
    std::size_t position_;
    std::string reason_;
};

}  // namespace maskverify
