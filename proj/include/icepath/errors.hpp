#pragma once

#include <stdexcept>
#include <string>

namespace icepath {

/// Bad input: malformed graph, unknown name, violated precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a result (singular design,
/// non-convergent fit, empty estimation sample).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularDesignError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace icepath
