#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace panelsynth {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ValidationCode {
    EmptyInstruction,
    EmptyAnswer,
    EmptyResponse,
    DuplicateId,
    EmptyReviewSet,
    EmptyDataset,
    EmptyRound,
    FailedConversationInExport,
    BadTurnSequence,
    BadConfig,
};

const char *to_string(ValidationCode code);

class ValidationError : public Error {
public:
    ValidationError(ValidationCode code, const std::string &detail)
        : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ValidationCode code() const noexcept { return code_; }

private:
    ValidationCode code_;
};

enum class ParseCode {
    MissingRequiredTag,
    EmptyTagBody,
    UnterminatedTag,
    MalformedNesting,
    BadJudgeJson,
    BadTaggerOutput,
};

const char *to_string(ParseCode code);

class ParseError : public Error {
public:
    ParseError(ParseCode code, const std::string &detail)
        : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ParseCode code() const noexcept { return code_; }

private:
    ParseCode code_;
};

enum class BackendErrorKind { Transient, Permanent, Timeout };

const char *to_string(BackendErrorKind kind);

class BackendError : public Error {
public:
    BackendError(BackendErrorKind kind, const std::string &detail)
        : Error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    BackendErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept { return kind_ != BackendErrorKind::Permanent; }

private:
    BackendErrorKind kind_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed input file. line is 1-based; 0 when the position is unknown.
class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string &cause)
        : Error(line ? "line " + std::to_string(line) + ": " + cause : cause), line_(line), cause_(cause) {}

    std::size_t line() const noexcept { return line_; }
    const std::string &cause() const noexcept { return cause_; }

private:
    std::size_t line_;
    std::string cause_;
};

}  // namespace panelsynth
