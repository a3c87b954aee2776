#pragma once

#include <stdexcept>
#include <string>

namespace ggnscore {

// Inconsistent dimensions between arguments (vector lengths, matrix shapes).
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values or loss of positivity where the math requires it.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A linear solve failed or its residual exceeded tolerance.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data; carries the 1-based line number of the offending record.
struct ParseError : std::runtime_error {
    ParseError(const std::string& what, long line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    long line_number;
};

}  // namespace ggnscore
