#pragma once

#include <stdexcept>
#include <string>

namespace roa {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or naming mismatch between objects (dimensions, variable lists, indices).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Malformed textual input (polynomial strings, config files, interchange formats).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A point was given outside the set an operation is defined on.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A conic solution could not be turned into a certificate.
class SolveError : public Error {
public:
    using Error::Error;
};

} // namespace roa
