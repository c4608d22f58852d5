#pragma once

#include <stdexcept>
#include <string>

namespace gift {

// A caller handed us something the operation's preconditions exclude.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : ContractError {
    using ContractError::ContractError;
};

// Structurally valid but numerically unusable input (near-zero row ahead of a
// normalization, collinear plane anchors).
struct DegenerateInputError : ContractError {
    using ContractError::ContractError;
};

struct ParameterError : ContractError {
    using ContractError::ContractError;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace gift
