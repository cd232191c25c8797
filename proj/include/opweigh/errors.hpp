#pragma once

#include <stdexcept>
#include <string>

namespace opweigh {

/// Failure of a numerical routine. what() carries the category message
/// ("singular operator", "no sign change in bracket", ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: inconsistent dimensions, invalid arguments, bad
/// problem files.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace opweigh
