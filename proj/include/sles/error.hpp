#pragma once

#include <stdexcept>
#include <string>

namespace sles {

// Base of every error the library raises. The CLI maps subclasses of
// InputError to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller supplied something that does not satisfy a contract.
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

// A name that does not resolve to a declared element.
class ReferenceError : public InputError {
public:
    using InputError::InputError;
};

class CardinalityError : public InputError {
public:
    using InputError::InputError;
};

class InfeasibleError : public InputError {
public:
    using InputError::InputError;
};

class SingularSystemError : public Error {
public:
    using Error::Error;
};

} // namespace sles
