#pragma once

#include <stdexcept>
#include <string>

namespace gar {

// Base class for every error this library raises on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimension mismatch (matvec, parameter shapes, ...).
struct ShapeError : Error {
    using Error::Error;
};

// Semantically invalid argument (empty sequence, label out of range, ...).
struct DomainError : Error {
    using Error::Error;
};

// Invalid or inconsistent configuration (task spec, model config, experiment file).
struct ConfigError : Error {
    using Error::Error;
};

// Problem with a dataset or its labels.
struct DataError : Error {
    using Error::Error;
};

// Operation called in the wrong model lifecycle state (e.g. stage-2 before stage-1).
struct StateError : Error {
    using Error::Error;
};

// Malformed file; carries the 1-based line number where parsing failed.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

// Model and dataset (or config) do not fit together.
struct CompatError : Error {
    using Error::Error;
};

} // namespace gar
