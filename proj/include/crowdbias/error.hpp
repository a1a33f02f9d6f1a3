#pragma once

#include <stdexcept>
#include <string>

namespace crowdbias {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or record; the message carries the location.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Arguments that violate an operation's preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Training blew up (non-finite values or runaway parameters).
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace crowdbias
