#pragma once

#include <stdexcept>

namespace ingsl {

/// Incompatible tensor or matrix dimensions.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Input outside an operation's mathematical domain.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Misuse of stateful objects (tape reuse, missing gradients).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Invalid user-supplied configuration or ranges.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed bundle file; the message names the file and line.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Divergence during training (NaN loss or gradient).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ingsl
