#pragma once

#include <stdexcept>
#include <string>

namespace gs {

// Base of every toolkit error. exit_code() is the CLI contract: 2 for
// user/config/data problems, 3 for internal numeric failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const noexcept { return 2; }
};

#define GS_DEFINE_ERROR(NAME)                           \
    class NAME : public Error {                         \
    public:                                             \
        explicit NAME(const std::string& msg)           \
            : Error(std::string(#NAME) + ": " + msg) {} \
    }

// Input and configuration errors (exit code 2).
GS_DEFINE_ERROR(InvalidBase);
GS_DEFINE_ERROR(ParseError);
GS_DEFINE_ERROR(EmptySequence);
GS_DEFINE_ERROR(TokenizeError);
GS_DEFINE_ERROR(SequenceTooShort);
GS_DEFINE_ERROR(NotInvertible);
GS_DEFINE_ERROR(ConfigError);
GS_DEFINE_ERROR(ShapeError);
GS_DEFINE_ERROR(RankError);
GS_DEFINE_ERROR(VocabError);
GS_DEFINE_ERROR(LabelError);
GS_DEFINE_ERROR(JoinError);
GS_DEFINE_ERROR(LengthError);
GS_DEFINE_ERROR(ValueError);
GS_DEFINE_ERROR(DegenerateInput);
GS_DEFINE_ERROR(FormatError);
GS_DEFINE_ERROR(CorruptionError);
GS_DEFINE_ERROR(IoError);

#undef GS_DEFINE_ERROR

// Non-finite values, divergence, and similar internal failures (exit code 3).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg)
        : Error("NumericError: " + msg) {}
    int exit_code() const noexcept override { return 3; }
};

}  // namespace gs
