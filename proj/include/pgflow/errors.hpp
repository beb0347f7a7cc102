#pragma once

#include <stdexcept>
#include <string>

namespace pgflow {

// Point lies outside the closure of the domain beyond the tolerance band.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Nearest-point projection requested outside the unique-projection collar.
struct ProjectionError : std::runtime_error {
    explicit ProjectionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Time step too large for the prox radius / Lipschitz motion of the domain.
struct StepSizeError : std::runtime_error {
    explicit StepSizeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problem size exceeds a solver cap.
struct SizeError : std::runtime_error {
    explicit SizeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Iterative solver failed to reach its tolerance within the iteration cap.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

// Scenario schema violation; message names the offending field.
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace pgflow
