#pragma once

#include <stdexcept>
#include <string>

namespace cocob {

/// Argument outside an operation's domain (non-finite values, K > J, ...).
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A factorization or update hit a non-positive pivot / denominator.
struct numerical_degeneracy : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file or record; carries the 1-based line when known.
struct parse_error : std::runtime_error {
    parse_error(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed record with a value the schema does not allow.
struct schema_error : parse_error {
    using parse_error::parse_error;
};

/// Inconsistent data, e.g. a replayed user missing from the log index.
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cocob
