#pragma once

#include <stdexcept>
#include <string>

namespace csm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A primitive received operands whose shapes it cannot combine.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A precondition on argument values was violated (range, probability, size).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A computed value became NaN or infinite.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; carries the 1-based line (record) where parsing failed.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A binary file is not in the expected format or is damaged.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Stored checksum does not match the content.
class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

/// File written by an incompatible format version.
class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace csm
