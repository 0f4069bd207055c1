#pragma once

#include <stdexcept>
#include <string>

namespace spoofdet {

// Error taxonomy used across the toolkit. Each class maps to a stable
// machine-parsable tag (see what()) so the CLI can emit one-line errors.
class Error : public std::runtime_error {
public:
    Error(const std::string& tag, const std::string& msg)
        : std::runtime_error(tag + ": " + msg), tag_(tag) {}
    const std::string& tag() const { return tag_; }

private:
    std::string tag_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error("invalid-shape", msg) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error("numeric-failure", msg) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error("invalid-input", msg) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error("parse-error", msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error("validation-error", msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("io-error", msg) {}
};

class CheckpointHeaderError : public Error {
public:
    explicit CheckpointHeaderError(const std::string& msg) : Error("corrupt-header", msg) {}
};

class TruncatedPayloadError : public Error {
public:
    explicit TruncatedPayloadError(const std::string& msg) : Error("truncated-payload", msg) {}
};

class InsufficientDataError : public Error {
public:
    explicit InsufficientDataError(const std::string& msg)
        : Error("insufficient-data", msg) {}
};

}  // namespace spoofdet
