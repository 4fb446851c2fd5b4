#pragma once

#include <stdexcept>
#include <string>

namespace fqb {

/// Raised for malformed or inconsistent input data (files, matrices, scores).
/// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace fqb
