#pragma once

#include <stdexcept>
#include <string>

namespace td2ip {

// Shape or axis problems in tensor/model code.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (MSQ, TDW, feature CSV, JSON config file syntax).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Semantically invalid configuration (bad field values, inconsistent dims).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required (training abort, grad_check).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// A caller broke an API precondition (e.g. backward on a non-scalar loss).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace td2ip
