#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neckcheck {

/// Failure categories map onto CLI exit codes (validation = 1, io = 2).
enum class ErrorKind { validation, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// A malformed input line. `line()` is 1-based within its file or stream.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& reason)
        : ValidationError("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

}  // namespace neckcheck
