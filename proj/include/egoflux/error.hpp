#pragma once

#include <stdexcept>
#include <string>

namespace egoflux {

// Base for every error raised by the library. Precondition and data errors are
// reported by exception; recoverable per-item problems (a malformed row, a
// skipped pair) are reported through return values instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class SingularDesignError : public Error {
public:
    using Error::Error;
};

class DegenerateSeriesError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

}  // namespace egoflux
