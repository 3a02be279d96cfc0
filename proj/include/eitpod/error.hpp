#pragma once

#include <stdexcept>
#include <string>

namespace eitpod {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on arguments was violated (bad sizes, bad indices, bad flags).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Input data is malformed or inconsistent (file formats, protocol hash mismatch).
class DataError : public Error {
public:
    using Error::Error;
};

/// A numerical operation failed: singular system, ill-conditioned inverse.
class NumericalError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace eitpod
