#pragma once

#include <stdexcept>
#include <string>

namespace peregrinn {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input (bad JSON, bad NNet text, bad CLI vector syntax).
struct ParseError : Error {
    using Error::Error;
};

// Dimension mismatches anywhere: layers, polytopes, LP rows, queries.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite entries where finite values are required.
struct ValueError : Error {
    using Error::Error;
};

// A phase was required to be fixed but is not (fold_affine prefix).
struct PhaseError : Error {
    using Error::Error;
};

// Precondition on a numeric domain violated (e.g. relax_relu on a
// non-straddling neuron, unbounded input region).
struct DomainError : Error {
    using Error::Error;
};

// Rejection sampling exceeded its round cap.
struct SamplingError : Error {
    using Error::Error;
};

// LP pivot breakdown or an iteration cap hit even under Bland's rule.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace peregrinn
