#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isaacs {

/// Lexical or syntactic failure while parsing an expression or problem file.
/// `offset` is the byte offset into the source text where the error occurred.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, std::size_t offset)
        : std::runtime_error(message + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Runtime evaluation failure: unbound variable or a domain error
/// (division by zero, log/sqrt of a negative, non-finite result).
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problem-file level failure: missing keys, dimension mismatches,
/// empty control sets, invalid option values.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adaptive quadrature failed to reach the requested tolerance.
class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Grid/scheme failure: CFL violation, non-finite value during a march,
/// non-contraction in value iteration.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Monte-Carlo engine failure: non-finite state, contraction condition
/// violated, singular regression.
class McError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace isaacs
